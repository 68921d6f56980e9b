#pragma once

// Virtual type-1 diabetes subject: a Hovorka-type glucose/insulin model with a
// two-compartment gut and a first-order plasma glucagon compartment that
// scales endogenous glucose production.

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "glucorl/kvfile.hpp"
#include "glucorl/scenario.hpp"

namespace glucorl {

enum class Cohort { adult, adolescent };

const char* to_string(Cohort c);
Cohort parse_cohort(std::string_view s);

inline constexpr double kMmolToMgdl = 18.0;
inline constexpr double kGlucoseMolarMass = 180.16;  // g/mol

// Compartmental-model constants. Quantities marked per kg are multiplied by
// body weight inside the model.
struct OdeParams {
  double egp0 = 0.0161;       // endogenous glucose production at zero insulin, mmol/kg/min
  double f01 = 0.0097;        // insulin-independent glucose flux, mmol/kg/min
  double k12 = 0.066;         // transfer rate non-accessible -> accessible, 1/min
  double ka1 = 0.006;         // insulin-action deactivation rates, 1/min
  double ka2 = 0.06;
  double ka3 = 0.03;
  double sit = 51.2e-4;       // sensitivity of transport, 1/min per mU/L
  double sid = 8.2e-4;        // sensitivity of disposal, 1/min per mU/L
  double sie = 520e-4;        // sensitivity of EGP, per mU/L
  double ke = 0.138;          // plasma insulin elimination, 1/min
  double vi = 0.12;           // insulin distribution volume, L/kg
  double vg = 0.16;           // glucose distribution volume, L/kg
  double tmax_i = 55.0;       // subcutaneous insulin absorption, min
  double tmax_g = 40.0;       // gut absorption, min
  double ag = 0.8;            // carbohydrate bioavailability
  double glucagon_potency = 3.0;       // fractional EGP gain per ug/kg of plasma glucagon
  double glucagon_clearance = 0.05;    // 1/min

  bool operator==(const OdeParams&) const = default;
};

struct PatientParams {
  std::string subject_id;
  Cohort cohort = Cohort::adult;
  double body_weight = 70.0;      // kg
  double basal_rate = 1.0;        // U/h
  double icr = 10.0;              // g/U
  double isf = 40.0;              // mg/dL per U
  OdeParams ode;
  double fasting_setpoint = 120.0;  // mg/dL

  // Throws ConfigError when a rate, volume or therapy parameter is not
  // strictly positive.
  void validate() const;

  KeyValueDoc to_doc() const;
  static PatientParams from_doc(const KeyValueDoc& doc);
  bool operator==(const PatientParams&) const = default;
};

enum Compartment : std::size_t {
  kQ1,        // accessible glucose mass, mmol
  kQ2,        // non-accessible glucose mass, mmol
  kS1,        // subcutaneous insulin, mU
  kS2,
  kPlasmaInsulin,  // mU/L
  kX1,        // insulin action on transport, 1/min
  kX2,        // insulin action on disposal, 1/min
  kX3,        // insulin action on EGP, dimensionless
  kD1,        // gut glucose, mmol
  kD2,
  kGlucagon,  // plasma glucagon, ug/kg
  kCompartmentCount
};

using StateVector = std::array<double, kCompartmentCount>;

struct PatientState {
  std::int64_t t_min = 0;
  StateVector x{};
  double glucagon_delivered_today = 0.0;  // mg

  bool operator==(const PatientState&) const = default;
};

// Plasma glucose in mg/dL.
double plasma_glucose(const PatientState& s, const PatientParams& p);

// Exogenous inputs held constant over one 5-minute step.
struct Dose {
  double basal_u_per_h = 0.0;
  double bolus_u = 0.0;
  double glucagon_mg = 0.0;
};

// Right-hand side of the ODE. `insulin_mu_per_min` is the continuous
// subcutaneous infusion, `carb_mmol_per_min` the ingestion rate; the scenario
// modulation factors are supplied explicitly so the function is pure.
struct Modulation {
  double insulin_sensitivity = 1.0;
  double absorption = 1.0;
  double bioavailability = 1.0;
};
StateVector ode_rhs(const StateVector& x, const PatientParams& p, double insulin_mu_per_min,
                    double carb_mmol_per_min, const Modulation& mod);

// Plasma insulin (mU/L) that holds glucose at `glucose_mgdl` in the fasting
// steady state, found by bisection on the glucose balance.
double steady_state_insulin(const OdeParams& ode, double body_weight, double glucose_mgdl);
// Steady state of the full ODE under basal insulin, no meals, nominal
// parameters, and glucose at `glucose_mgdl`.
StateVector steady_state(const PatientParams& p, double glucose_mgdl);
// Basal rate (U/h) that yields that steady state.
double steady_state_basal(const OdeParams& ode, double body_weight, double glucose_mgdl);

inline constexpr double kDefaultSubstepMin = 1.0;

// Advances the physiological state by one 5-minute step with fixed-step RK4.
// Bolus insulin and glucagon are added to their depots at the start of the
// step. Compartments are clamped at zero after every substep. Throws
// NumericalBlowup on non-finite state. Resets the daily glucagon counter when
// the step ends on midnight.
PatientState advance(const PatientState& state, const PatientParams& params, const Scenario& scenario,
                     const Dose& dose, double substep_min = kDefaultSubstepMin);

// AR(1) Gaussian sensor error: e_t = rho * e_{t-1} + sd * sqrt(1 - rho^2) * z_t.
class CgmSensor {
 public:
  CgmSensor() = default;
  CgmSensor(std::uint64_t seed, bool enabled, double sd = 2.0, double rho = 0.7);

  double read(double plasma_glucose);
  double error() const { return error_; }

  std::string serialize() const;
  void deserialize(const std::string& s);

 private:
  std::mt19937_64 rng_;
  bool enabled_ = false;
  double sd_ = 2.0;
  double rho_ = 0.7;
  double error_ = 0.0;
};

struct SimOptions {
  bool cgm_noise = true;
  double substep_min = kDefaultSubstepMin;
};

struct StepReading {
  double cgm = 0.0;
  double plasma_glucose = 0.0;
};

// Stateful wrapper: one subject, one scenario, one sensor.
class VirtualPatient {
 public:
  VirtualPatient(PatientParams params, Scenario scenario, SimOptions options = {});

  const PatientParams& params() const { return params_; }
  const Scenario& scenario() const { return scenario_; }
  const PatientState& state() const { return state_; }
  double cgm() const { return cgm_; }
  double plasma_glucose() const { return glucorl::plasma_glucose(state_, params_); }

  // Preconditions: doses non-negative and finite (throws InvalidAction otherwise).
  StepReading step(const Dose& dose);

  // Physiological state back to the fasting steady state at the current time.
  // The sensor stream and daily glucagon counter carry on.
  void reset_physiology();

  void set_state(const PatientState& s, double cgm) {
    state_ = s;
    cgm_ = cgm;
  }
  CgmSensor& sensor() { return sensor_; }
  const CgmSensor& sensor() const { return sensor_; }

 private:
  PatientParams params_;
  Scenario scenario_;
  SimOptions options_;
  CgmSensor sensor_;
  PatientState state_;
  double cgm_ = 0.0;
};

// Cohort construction ------------------------------------------------------

inline constexpr double kSubjectParamCv = 0.20;
inline constexpr double kAdolescentSensitivityScale = 0.70;
inline constexpr std::uint64_t kDefaultCohortSeed = 20200611;

// Cohort-average subject: published means, calibrated basal/ICR/ISF.
PatientParams average_subject(Cohort cohort);
// `count` virtual subjects drawn by seeded log-normal perturbation of the means.
std::vector<PatientParams> make_cohort(Cohort cohort, int count = 10, std::uint64_t seed = kDefaultCohortSeed);

// Fills basal_rate, icr and isf from the ODE constants.
void calibrate_therapy(PatientParams& p);

}  // namespace glucorl
