#include "glucorl/patient.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

namespace {

constexpr int kParamsSchemaVersion = 1;
constexpr double kGlucoseSaturationMmol = 4.5;
constexpr double kRenalThresholdMmol = 9.0;
constexpr double kRenalClearance = 0.003;

double glucose_mmol(double q1, const PatientParams& p) { return q1 / (p.ode.vg * p.body_weight); }

StateVector axpy(const StateVector& x, double a, const StateVector& k) {
  StateVector out;
  for (std::size_t i = 0; i < kCompartmentCount; ++i) out[i] = x[i] + a * k[i];
  return out;
}

Modulation modulation_at(const Scenario& s, double t) {
  return {s.insulin_sensitivity_factor(t), s.absorption_factor(t), s.bioavailability_factor(t)};
}

// Insulin-independent uptake and renal loss at glucose G (mmol/L).
double glucose_outflow(double g, const OdeParams& ode, double bw) {
  const double f01 = ode.f01 * bw;
  const double f01c = g >= kGlucoseSaturationMmol ? f01 : f01 * g / kGlucoseSaturationMmol;
  const double fr = g > kRenalThresholdMmol ? kRenalClearance * (g - kRenalThresholdMmol) * ode.vg * bw : 0.0;
  return f01c + fr;
}

}  // namespace

const char* to_string(Cohort c) { return c == Cohort::adult ? "adult" : "adolescent"; }

Cohort parse_cohort(std::string_view s) {
  if (s == "adult") return Cohort::adult;
  if (s == "adolescent") return Cohort::adolescent;
  throw ConfigError(fmt::format("unknown cohort '{}'", s));
}

double plasma_glucose(const PatientState& s, const PatientParams& p) {
  return glucose_mmol(s.x[kQ1], p) * kMmolToMgdl;
}

void PatientParams::validate() const {
  const auto& o = ode;
  const double positives[] = {o.egp0, o.f01, o.k12, o.ka1, o.ka2, o.ka3, o.sit, o.sid, o.sie,
                              o.ke,   o.vi,  o.vg,  o.tmax_i, o.tmax_g, o.ag, o.glucagon_potency,
                              o.glucagon_clearance, body_weight, basal_rate, icr, isf, fasting_setpoint};
  for (double v : positives) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(fmt::format("subject {}: parameters must be strictly positive", subject_id));
    }
  }
}

namespace {

struct OdeField {
  const char* key;
  double OdeParams::*member;
};

constexpr OdeField kOdeFields[] = {
    {"ode.egp0", &OdeParams::egp0},     {"ode.f01", &OdeParams::f01},       {"ode.k12", &OdeParams::k12},
    {"ode.ka1", &OdeParams::ka1},       {"ode.ka2", &OdeParams::ka2},       {"ode.ka3", &OdeParams::ka3},
    {"ode.sit", &OdeParams::sit},       {"ode.sid", &OdeParams::sid},       {"ode.sie", &OdeParams::sie},
    {"ode.ke", &OdeParams::ke},         {"ode.vi", &OdeParams::vi},         {"ode.vg", &OdeParams::vg},
    {"ode.tmax_i", &OdeParams::tmax_i}, {"ode.tmax_g", &OdeParams::tmax_g}, {"ode.ag", &OdeParams::ag},
    {"ode.glucagon_potency", &OdeParams::glucagon_potency},
    {"ode.glucagon_clearance", &OdeParams::glucagon_clearance},
};

}  // namespace

KeyValueDoc PatientParams::to_doc() const {
  KeyValueDoc doc;
  doc.set("schema_version", kParamsSchemaVersion);
  doc.set("kind", std::string("patient"));
  doc.set("subject_id", subject_id);
  doc.set("cohort", std::string(to_string(cohort)));
  doc.set("body_weight", body_weight);
  doc.set("basal_rate", basal_rate);
  doc.set("icr", icr);
  doc.set("isf", isf);
  doc.set("fasting_setpoint", fasting_setpoint);
  for (const auto& f : kOdeFields) doc.set(f.key, ode.*f.member);
  return doc;
}

PatientParams PatientParams::from_doc(const KeyValueDoc& doc) {
  if (doc.get_int("schema_version") != kParamsSchemaVersion) {
    throw FormatError("unsupported patient schema_version " + doc.get("schema_version"));
  }
  if (doc.get("kind") != "patient") throw FormatError("not a patient parameter file");
  PatientParams p;
  p.subject_id = doc.get("subject_id");
  p.cohort = parse_cohort(doc.get("cohort"));
  p.body_weight = doc.get_double("body_weight");
  p.basal_rate = doc.get_double("basal_rate");
  p.icr = doc.get_double("icr");
  p.isf = doc.get_double("isf");
  p.fasting_setpoint = doc.get_double("fasting_setpoint");
  for (const auto& f : kOdeFields) p.ode.*f.member = doc.get_double(f.key);
  p.validate();
  return p;
}

StateVector ode_rhs(const StateVector& x, const PatientParams& p, double insulin_mu_per_min,
                    double carb_mmol_per_min, const Modulation& mod) {
  const auto& o = p.ode;
  const double bw = p.body_weight;
  const double q1 = x[kQ1];
  const double q2 = x[kQ2];
  const double g = glucose_mmol(q1, p);
  const double x1 = x[kX1];
  const double x2 = x[kX2];
  const double x3 = x[kX3];
  const double insulin = x[kPlasmaInsulin];

  const double egp = o.egp0 * bw * std::max(0.0, 1.0 - x3) * (1.0 + o.glucagon_potency * x[kGlucagon]);
  const double tmax_g = o.tmax_g / mod.absorption;
  const double ag = std::min(1.0, o.ag * mod.bioavailability);
  const double gut_appearance = x[kD2] / tmax_g;

  StateVector dx{};
  dx[kQ1] = -glucose_outflow(g, o, bw) - x1 * q1 + o.k12 * q2 + gut_appearance + egp;
  dx[kQ2] = x1 * q1 - (o.k12 + x2) * q2;
  dx[kS1] = insulin_mu_per_min - x[kS1] / o.tmax_i;
  dx[kS2] = (x[kS1] - x[kS2]) / o.tmax_i;
  dx[kPlasmaInsulin] = x[kS2] / (o.tmax_i * o.vi * bw) - o.ke * insulin;
  dx[kX1] = o.ka1 * (mod.insulin_sensitivity * o.sit * insulin - x1);
  dx[kX2] = o.ka2 * (mod.insulin_sensitivity * o.sid * insulin - x2);
  dx[kX3] = o.ka3 * (mod.insulin_sensitivity * o.sie * insulin - x3);
  dx[kD1] = ag * carb_mmol_per_min - x[kD1] / tmax_g;
  dx[kD2] = (x[kD1] - x[kD2]) / tmax_g;
  dx[kGlucagon] = -o.glucagon_clearance * x[kGlucagon];
  return dx;
}

double steady_state_insulin(const OdeParams& ode, double body_weight, double glucose_mgdl) {
  const double g = glucose_mgdl / kMmolToMgdl;
  const double q1 = g * ode.vg * body_weight;
  // Net glucose balance of Q1 once Q2 has equilibrated; strictly decreasing in
  // insulin until EGP is fully suppressed.
  const auto balance = [&](double insulin) {
    const double x1 = ode.sit * insulin;
    const double x2 = ode.sid * insulin;
    const double uptake = x1 * q1 * x2 / (ode.k12 + x2);
    return ode.egp0 * body_weight * std::max(0.0, 1.0 - ode.sie * insulin) - glucose_outflow(g, ode, body_weight) -
           uptake;
  };
  double lo = 0.0;
  double hi = 1.0 / ode.sie;
  if (balance(lo) <= 0.0) {
    throw ConfigError("no insulin level holds the requested fasting glucose (EGP below uptake)");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (balance(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double steady_state_basal(const OdeParams& ode, double body_weight, double glucose_mgdl) {
  const double insulin = steady_state_insulin(ode, body_weight, glucose_mgdl);
  const double mu_per_min = insulin * ode.vi * body_weight * ode.ke;
  return mu_per_min * 60.0 / 1000.0;
}

StateVector steady_state(const PatientParams& p, double glucose_mgdl) {
  const auto& o = p.ode;
  const double bw = p.body_weight;
  const double insulin = steady_state_insulin(o, bw, glucose_mgdl);
  const double infusion = insulin * o.vi * bw * o.ke;
  StateVector x{};
  x[kQ1] = glucose_mgdl / kMmolToMgdl * o.vg * bw;
  x[kX1] = o.sit * insulin;
  x[kX2] = o.sid * insulin;
  x[kX3] = o.sie * insulin;
  x[kQ2] = x[kX1] * x[kQ1] / (o.k12 + x[kX2]);
  x[kS1] = infusion * o.tmax_i;
  x[kS2] = infusion * o.tmax_i;
  x[kPlasmaInsulin] = insulin;
  return x;
}

PatientState advance(const PatientState& state, const PatientParams& params, const Scenario& scenario,
                     const Dose& dose, double substep_min) {
  if (state.t_min % kStepMinutes != 0) throw InvalidAction("state time is not on the 5-minute grid");
  if (!(substep_min > 0.0)) throw InvalidAction("substep must be positive");

  PatientState s = state;
  s.x[kS1] += dose.bolus_u * 1000.0;
  s.x[kGlucagon] += dose.glucagon_mg * 1000.0 / params.body_weight;
  s.glucagon_delivered_today += dose.glucagon_mg;

  const double infusion = dose.basal_u_per_h * 1000.0 / 60.0;
  const double carbs = scenario.carb_rate(state.t_min) * 1000.0 / kGlucoseMolarMass;
  const int substeps = static_cast<int>(std::ceil(kStepMinutes / substep_min - 1e-9));
  const double h = static_cast<double>(kStepMinutes) / substeps;

  auto& x = s.x;
  for (int i = 0; i < substeps; ++i) {
    const double t0 = static_cast<double>(state.t_min) + i * h;
    const auto m0 = modulation_at(scenario, t0);
    const auto mh = modulation_at(scenario, t0 + 0.5 * h);
    const auto m1 = modulation_at(scenario, t0 + h);
    const auto k1 = ode_rhs(x, params, infusion, carbs, m0);
    const auto k2 = ode_rhs(axpy(x, 0.5 * h, k1), params, infusion, carbs, mh);
    const auto k3 = ode_rhs(axpy(x, 0.5 * h, k2), params, infusion, carbs, mh);
    const auto k4 = ode_rhs(axpy(x, h, k3), params, infusion, carbs, m1);
    for (std::size_t c = 0; c < kCompartmentCount; ++c) {
      x[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
      if (!std::isfinite(x[c])) {
        throw NumericalBlowup(fmt::format("subject {}: compartment {} non-finite at t={} min", params.subject_id,
                                          c, t0 + h));
      }
      x[c] = std::max(0.0, x[c]);
    }
  }
  s.t_min += kStepMinutes;
  if (s.t_min % kMinutesPerDay == 0) s.glucagon_delivered_today = 0.0;
  return s;
}

// Sensor ----------------------------------------------------------------------

CgmSensor::CgmSensor(std::uint64_t seed, bool enabled, double sd, double rho)
    : rng_(seed), enabled_(enabled), sd_(sd), rho_(rho) {
  if (enabled_) error_ = sd_ * std::normal_distribution<double>(0.0, 1.0)(rng_);
}

double CgmSensor::read(double plasma_glucose) {
  if (enabled_) {
    const double z = std::normal_distribution<double>(0.0, 1.0)(rng_);
    error_ = rho_ * error_ + sd_ * std::sqrt(1.0 - rho_ * rho_) * z;
  }
  return std::max(1.0, plasma_glucose + error_);
}

std::string CgmSensor::serialize() const {
  std::ostringstream os;
  os << rng_ << ' ' << (enabled_ ? 1 : 0) << ' ' << format_double(sd_) << ' ' << format_double(rho_) << ' '
     << format_double(error_);
  return os.str();
}

void CgmSensor::deserialize(const std::string& s) {
  std::istringstream is(s);
  int enabled = 0;
  std::string sd, rho, err;
  is >> rng_ >> enabled >> sd >> rho >> err;
  if (!is) throw FormatError("corrupt sensor state");
  enabled_ = enabled != 0;
  sd_ = parse_double(sd);
  rho_ = parse_double(rho);
  error_ = parse_double(err);
}

// Virtual patient ---------------------------------------------------------------

VirtualPatient::VirtualPatient(PatientParams params, Scenario scenario, SimOptions options)
    : params_(std::move(params)),
      scenario_(std::move(scenario)),
      options_(options),
      sensor_(scenario_.cgm_noise_seed, options.cgm_noise) {
  params_.validate();
  state_.x = steady_state(params_, params_.fasting_setpoint);
  cgm_ = sensor_.read(params_.fasting_setpoint);
}

StepReading VirtualPatient::step(const Dose& dose) {
  for (double v : {dose.basal_u_per_h, dose.bolus_u, dose.glucagon_mg}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidAction("doses must be finite and non-negative");
  }
  state_ = advance(state_, params_, scenario_, dose, options_.substep_min);
  const double g = plasma_glucose();
  cgm_ = sensor_.read(g);
  return {cgm_, g};
}

void VirtualPatient::reset_physiology() {
  state_.x = steady_state(params_, params_.fasting_setpoint);
  cgm_ = std::max(1.0, params_.fasting_setpoint + sensor_.error());
}

}  // namespace glucorl
