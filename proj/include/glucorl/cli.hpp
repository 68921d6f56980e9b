#pragma once

// Experiment configuration and the subcommands behind the `glucorl` tool.
// Every command can also be driven in-process through run_cli.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "glucorl/kvfile.hpp"
#include "glucorl/patient.hpp"
#include "glucorl/therapy.hpp"
#include "glucorl/training.hpp"

namespace glucorl {

struct ExperimentConfig {
  Cohort cohort = Cohort::adult;
  HormoneMode mode = HormoneMode::single_hormone;
  int cohort_size = 10;
  std::uint64_t cohort_seed = kDefaultCohortSeed;
  std::vector<int> subjects{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string policy = "personal";  // which checkpoints `evaluate` reads
  std::vector<std::string> controllers{"LGS", "DRL-SH", "DRL-DH"};
  std::string baseline = "LGS";
  TrainConfig train;
  // Where artifacts go. Not part of the hashed configuration.
  std::filesystem::path output_dir = "out";

  // Applies one key. Throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  void validate() const;

  // Canonical text of every hashed key, in a fixed order.
  KeyValueDoc to_doc() const;
  static ExperimentConfig from_doc(const KeyValueDoc& doc);

  std::uint64_t hash() const;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitOther = 4;

// Parses `args` (without the program name) and runs one subcommand. Progress
// goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Subject id made safe for file names ("adult#001" -> "adult_001").
std::string file_tag(const std::string& subject_id);

// Artifact paths, relative to the output directory.
std::filesystem::path general_checkpoint_path(HormoneMode mode);
std::filesystem::path personal_checkpoint_path(HormoneMode mode, const std::string& subject_id);

}  // namespace glucorl
