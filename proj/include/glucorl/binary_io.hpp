#pragma once

// Little-endian binary streams for checkpoints. Doubles are stored as their
// raw IEEE-754 bits so a save -> load -> save cycle is bit-exact.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "glucorl/errors.hpp"

namespace glucorl {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  template <typename T>
    requires std::is_arithmetic_v<T> || std::is_enum_v<T>
  void write(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void write_bool(bool b) { write<std::uint8_t>(b ? 1 : 0); }
  void write_string(const std::string& s) {
    write<std::uint64_t>(s.size());
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void write_doubles(const double* data, std::size_t n) {
    write<std::uint64_t>(n);
    os_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  }
  void write_vector(const std::vector<double>& v) { write_doubles(v.data(), v.size()); }
  void write_vector(const Eigen::VectorXd& v) { write_doubles(v.data(), static_cast<std::size_t>(v.size())); }

 private:
  std::ostream& os_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::istream& is) : is_(is) {}

  template <typename T>
    requires std::is_arithmetic_v<T> || std::is_enum_v<T>
  T read() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  bool read_bool() { return read<std::uint8_t>() != 0; }
  std::string read_string() {
    const auto n = read_size(1u << 30);
    std::string s(n, '\0');
    is_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  std::vector<double> read_vector() {
    const auto n = read_size(1u << 28);
    std::vector<double> v(n);
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  Eigen::VectorXd read_eigen() {
    const auto n = read_size(1u << 28);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    check();
    return v;
  }
  std::size_t read_size(std::size_t limit) {
    const auto n = read<std::uint64_t>();
    if (n > limit) throw FormatError("corrupt checkpoint: implausible length");
    return static_cast<std::size_t>(n);
  }

 private:
  void check() {
    if (!is_) throw FormatError("unexpected end of checkpoint data");
  }
  std::istream& is_;
};

}  // namespace glucorl
