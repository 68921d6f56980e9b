#include "glucorl/kvfile.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_double(double v) { return fmt::format("{}", v); }

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError(fmt::format("not a number: '{}'", s));
  }
  return v;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError(fmt::format("not an integer: '{}'", s));
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError(fmt::format("not an unsigned integer: '{}'", s));
  }
  return v;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
  KeyValueDoc doc;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(fmt::format("line {}: expected 'key = value'", line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw FormatError(fmt::format("line {}: empty key", line_no));
    if (doc.contains(key)) {
      throw FormatError(fmt::format("line {}: duplicate key '{}'", line_no, key));
    }
    doc.entries_.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return doc;
}

KeyValueDoc KeyValueDoc::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KeyValueDoc::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

void KeyValueDoc::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValueDoc::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void KeyValueDoc::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool KeyValueDoc::contains(std::string_view key) const { return find(key).has_value(); }

std::optional<std::string> KeyValueDoc::find(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

const std::string& KeyValueDoc::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw FormatError(fmt::format("missing key '{}'", key));
}

double KeyValueDoc::get_double(std::string_view key) const { return parse_double(get(key)); }
std::int64_t KeyValueDoc::get_int(std::string_view key) const { return parse_int(get(key)); }
std::uint64_t KeyValueDoc::get_uint(std::string_view key) const { return parse_uint(get(key)); }

std::string KeyValueDoc::str() const {
  std::string out;
  for (const auto& [k, v] : entries_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueDoc::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingInput("cannot write " + path.string());
  out << str();
}

}  // namespace glucorl
