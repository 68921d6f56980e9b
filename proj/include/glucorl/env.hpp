#pragma once

// Closed-loop environment: one virtual patient, the meal-bolus calculator,
// a discrete basal/glucagon action space and the reward. Each call to step()
// advances five minutes.

#include <cstdint>

#include "glucorl/binary_io.hpp"
#include "glucorl/observation.hpp"
#include "glucorl/patient.hpp"
#include "glucorl/reward.hpp"
#include "glucorl/therapy.hpp"

namespace glucorl {

struct EnvOptions {
  ActionSpace space;
  RewardScheme reward = kDefaultRewardScheme;
  SimOptions sim;
  int window = kDefaultWindow;
};

struct StepOutcome {
  std::int64_t t_min = 0;  // start of the step
  double cgm_before = 0.0;
  double glucose_before = 0.0;
  int requested_action = 0;
  int action = 0;  // after cap/gate overrides
  double basal_u_per_h = 0.0;
  double bolus_u = 0.0;
  double glucagon_mg = 0.0;
  double carbs_true = 0.0;       // meal starting this step
  double carbs_announced = 0.0;
  double cgm = 0.0;              // reading at the end of the step
  double plasma_glucose = 0.0;
  double reward = 0.0;
  bool done = false;
};

class GlucoseEnv {
 public:
  GlucoseEnv(PatientParams params, Scenario scenario, EnvOptions options = {});

  // Current observation o_t (raw units, oldest step first).
  Observation observation() const { return make_observation(history_, options_.window); }
  double cgm() const { return patient_.cgm(); }
  double glucagon_today() const { return patient_.state().glucagon_delivered_today; }
  std::int64_t time() const { return patient_.state().t_min; }
  std::int64_t episode() const { return episode_; }
  std::int64_t episode_step() const { return episode_step_; }

  const ActionSpace& space() const { return options_.space; }
  const EnvOptions& options() const { return options_; }
  const PatientParams& params() const { return patient_.params(); }
  const VirtualPatient& patient() const { return patient_; }

  // Executes `action`. With a gate the safety constraints override the
  // action; without one only the glucagon daily cap applies.
  StepOutcome step(int action, const SafetyConstraints* gate = nullptr);

  // Back to the fasting steady state with a freshly padded history; the
  // clock and the scenario keep running. Starts a new episode.
  void restart();

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  StepRecord steady_record() const;

  EnvOptions options_;
  VirtualPatient patient_;
  History history_;
  InsulinOnBoard iob_;
  std::int64_t episode_ = 0;
  std::int64_t episode_step_ = 0;
};

}  // namespace glucorl
