#pragma once

#include <cstdint>

namespace glucorl {

// Independent random streams derived from one experiment seed.
enum class SeedStream : std::uint64_t {
  network_init = 1,
  general_scenario = 2,
  general_rng = 3,
  personal_scenario = 4,
  personal_rng = 5,
  test_scenario = 6,
  generate = 7,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, SeedStream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ static_cast<std::uint64_t>(stream)) + index);
}

}  // namespace glucorl
