#pragma once

// Two-phase training. The generalized phase explores freely on the
// cohort-average subject with uniform replay; the personalized phase starts
// from those networks and memory, runs behind the safety gate on one subject
// and learns from prioritized replay with an n-step term and weight decay.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "glucorl/env.hpp"
#include "glucorl/kvfile.hpp"
#include "glucorl/qnet.hpp"
#include "glucorl/replay.hpp"
#include "glucorl/rl_core.hpp"
#include "glucorl/trace.hpp"

namespace glucorl {

struct TrainConfig {
  double gamma = 0.9;
  std::int64_t exploration_steps = 2000;  // k
  std::int64_t target_period_general = 1000;
  std::int64_t target_period_personal = 100;
  int batch_size = 32;
  double learning_rate = 1e-5;
  int window = kDefaultWindow;
  std::size_t buffer_size = 5000;
  double alpha = 0.3;
  double epsilon_prime = 1e-3;
  double beta_start = 0.4;
  double beta_end = 1.0;
  double lambda1 = 0.1;
  double lambda2 = 1e-5;
  double epsilon_start = 0.5;
  double epsilon_end = 0.01;
  double epsilon_personal = 0.01;
  int nstep = 12;
  int generalized_days = 200;
  int personalized_days = 30;
  int test_days = 90;
  int freeze_lower_layers = 0;
  CellType cell = CellType::vanilla_rnn;
  std::vector<LayerSpec> layers{{1, 32}, {2, 64}, {4, 128}};
  RewardScheme reward = kDefaultRewardScheme;
  std::uint64_t seed = 1;

  // Throws ConfigError on non-positive sizes or out-of-range rates.
  void validate() const;
  // Sets one field from text. Returns false for an unknown key; throws
  // ConfigError for a malformed value.
  bool set(std::string_view key, std::string_view value);
  void to_doc(KeyValueDoc& doc) const;
  static TrainConfig from_doc(const KeyValueDoc& doc);

  QNetConfig net_config(HormoneMode mode) const;

  bool operator==(const TrainConfig&) const = default;
};

enum class TrainPhase { generalized, personalized };
const char* to_string(TrainPhase p);

// One row per simulated day of training.
struct ProgressRow {
  std::int64_t step = 0;
  std::int64_t episode = 0;
  double episode_reward = 0.0;  // cumulative reward of the running episode
  double day_reward = 0.0;
  double running_tir = 0.0;     // % of the day's CGM readings in [70, 180]
  double loss = 0.0;            // mean loss of the day's gradient steps
  double epsilon = 0.0;
  double beta = 0.0;

  bool operator==(const ProgressRow&) const = default;
};

std::string progress_csv(const std::vector<ProgressRow>& rows);

class Trainer {
 public:
  // Fresh networks on the cohort-average subject.
  static Trainer generalized(const TrainConfig& config, HormoneMode mode, Cohort cohort);
  // Networks and replay memory from a finished (or partial) generalized run,
  // trained on `subject`. `subject_index` selects the scenario stream.
  static Trainer personalized(const Trainer& general, const PatientParams& subject, int subject_index);

  // One environment step plus, when due, one gradient step and target sync.
  void step();
  // Steps until the budget is used. `on_day` sees each progress row.
  void run(const std::function<void(const ProgressRow&)>& on_day = {});

  bool finished() const { return steps_ >= total_steps_; }
  std::int64_t steps_done() const { return steps_; }
  std::int64_t total_steps() const { return total_steps_; }
  std::int64_t gradient_steps() const { return gradient_steps_; }

  TrainPhase phase() const { return phase_; }
  HormoneMode mode() const { return mode_; }
  Cohort cohort() const { return cohort_; }
  const TrainConfig& config() const { return config_; }
  const GlucoseEnv& env() const { return *env_; }
  const QNetWeights& theta1() const { return theta1_; }
  const QNetWeights& theta2() const { return theta2_; }
  const AdamState& adam() const { return adam_; }
  const ReplayMemory& memory() const { return memory_; }
  const NStepAccumulator& pending() const { return accumulator_; }
  const std::vector<ProgressRow>& progress() const { return progress_; }
  const StepOutcome& last_outcome() const { return last_; }
  double epsilon() const;
  double beta() const;

  void save(BinaryWriter& w) const;
  static Trainer load(BinaryReader& r);
  void save(const std::filesystem::path& path) const;
  static Trainer load(const std::filesystem::path& path);

 private:
  Trainer() = default;
  void store(const Transition& t);
  void learn();
  void record_day();

  TrainPhase phase_ = TrainPhase::generalized;
  HormoneMode mode_ = HormoneMode::single_hormone;
  Cohort cohort_ = Cohort::adult;
  int subject_index_ = -1;
  TrainConfig config_;
  std::unique_ptr<GlucoseEnv> env_;
  QNetWeights theta1_;
  QNetWeights theta2_;
  AdamState adam_;
  ParamMask mask_;
  ReplayMemory memory_;
  NStepAccumulator accumulator_;
  std::mt19937_64 rng_;
  std::int64_t steps_ = 0;
  std::int64_t total_steps_ = 0;
  std::int64_t gradient_steps_ = 0;
  StepOutcome last_;

  // Running daily statistics.
  double episode_reward_ = 0.0;
  double day_reward_ = 0.0;
  std::int64_t day_in_range_ = 0;
  double day_loss_ = 0.0;
  std::int64_t day_loss_count_ = 0;
  std::vector<ProgressRow> progress_;
};

// A controller under test: low-glucose suspension when `net` is null,
// otherwise the greedy policy of `net` behind the safety gate.
struct Controller {
  std::string tag;
  ActionSpace space;
  const QNetWeights* net = nullptr;
  SafetyConstraints gate;
};

Controller lgs_controller();
Controller drl_controller(const QNetWeights& net, HormoneMode mode);

// Runs `days` days on `scenario` without restarts. Terminal readings are
// recorded but do not reset the patient.
Trace rollout(const Controller& controller, const PatientParams& params, const Scenario& scenario, int days,
              RewardScheme reward = kDefaultRewardScheme, SimOptions sim = {});

// The test scenario shared by every controller for subject `index`.
Scenario test_scenario(const TrainConfig& config, const PatientParams& params, int index);

}  // namespace glucorl
