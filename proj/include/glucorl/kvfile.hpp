#pragma once

// Flat "key = value" text documents. Used for experiment configs, scenario
// files and cohort parameter files. Lines starting with '#' are comments,
// keys are unique, and order is preserved so that written files are stable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace glucorl {

class KeyValueDoc {
 public:
  using Entry = std::pair<std::string, std::string>;

  static KeyValueDoc parse(std::string_view text);
  static KeyValueDoc load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }

  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;

  // Typed getters throw FormatError on missing keys or malformed values.
  const std::string& get(std::string_view key) const;
  double get_double(std::string_view key) const;
  std::int64_t get_int(std::string_view key) const;
  std::uint64_t get_uint(std::string_view key) const;

  const std::vector<Entry>& entries() const { return entries_; }

  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<Entry> entries_;
};

// Number <-> text helpers shared by every text format in the project.
// Doubles are written in shortest round-trip form.
std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);
std::uint64_t parse_uint(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace glucorl
