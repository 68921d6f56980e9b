#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "glucorl/errors.hpp"
#include "glucorl/patient.hpp"

namespace glucorl {

namespace {

constexpr double kAdultWeight = 70.0;
constexpr double kAdolescentWeight = 50.0;
constexpr int kCalibrationSteps = 8 * 60 / kStepMinutes;
constexpr double kCalibrationMeal = 50.0;

OdeParams cohort_mean(Cohort cohort) {
  OdeParams o;
  if (cohort == Cohort::adolescent) {
    o.sit *= kAdolescentSensitivityScale;
    o.sid *= kAdolescentSensitivityScale;
    o.sie *= kAdolescentSensitivityScale;
  }
  return o;
}

// Glucose trace (mg/dL, one sample per 5 min) of a fasting subject on basal
// who receives `bolus` units and optionally a meal at t = 0.
std::vector<double> response(const PatientParams& p, double bolus, double meal_carbs) {
  Scenario s = Scenario::quiet(1);
  if (meal_carbs > 0.0) s.meals.push_back({0, meal_carbs, meal_carbs, 15});
  PatientState st;
  st.x = steady_state(p, p.fasting_setpoint);
  std::vector<double> trace;
  trace.reserve(kCalibrationSteps);
  for (int i = 0; i < kCalibrationSteps; ++i) {
    st = advance(st, p, s, {p.basal_rate, i == 0 ? bolus : 0.0, 0.0});
    trace.push_back(plasma_glucose(st, p));
  }
  return trace;
}

}  // namespace

void calibrate_therapy(PatientParams& p) {
  p.basal_rate = steady_state_basal(p.ode, p.body_weight, p.fasting_setpoint);

  // ISF: nadir drop after a 1 U correction bolus.
  const auto corr = response(p, 1.0, 0.0);
  p.isf = p.fasting_setpoint - *std::min_element(corr.begin(), corr.end());

  // ICR: the bolus for a 50 g meal whose glucose excursion integrates to zero
  // over 8 hours.
  const auto excursion = [&](double bolus) {
    double area = 0.0;
    for (double g : response(p, bolus, kCalibrationMeal)) area += g - p.fasting_setpoint;
    return area;
  };
  double lo = 0.0;
  double hi = 1.0;
  while (excursion(hi) > 0.0 && hi < 1e3) hi *= 2.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (excursion(mid) > 0.0 ? lo : hi) = mid;
  }
  p.icr = kCalibrationMeal / (0.5 * (lo + hi));
}

PatientParams average_subject(Cohort cohort) {
  PatientParams p;
  p.subject_id = fmt::format("{}#avg", to_string(cohort));
  p.cohort = cohort;
  p.body_weight = cohort == Cohort::adult ? kAdultWeight : kAdolescentWeight;
  p.ode = cohort_mean(cohort);
  calibrate_therapy(p);
  p.validate();
  return p;
}

std::vector<PatientParams> make_cohort(Cohort cohort, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ (cohort == Cohort::adult ? 0x5A17ull : 0xAD01ull));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma = std::sqrt(std::log(1.0 + kSubjectParamCv * kSubjectParamCv));
  const auto lognormal = [&] { return std::exp(sigma * normal(rng) - 0.5 * sigma * sigma); };

  const OdeParams mean = cohort_mean(cohort);
  const double mean_weight = cohort == Cohort::adult ? kAdultWeight : kAdolescentWeight;

  std::vector<PatientParams> subjects;
  for (int i = 0; i < count; ++i) {
    while (true) {
      PatientParams p;
      p.subject_id = fmt::format("{}#{:03}", to_string(cohort), i + 1);
      p.cohort = cohort;
      p.body_weight = mean_weight * lognormal();
      auto& o = p.ode;
      o = mean;
      for (double* v : {&o.egp0, &o.f01, &o.k12, &o.ka1, &o.ka2, &o.ka3, &o.sit, &o.sid, &o.sie, &o.ke, &o.vi,
                        &o.vg, &o.tmax_i, &o.tmax_g, &o.glucagon_potency}) {
        *v *= lognormal();
      }
      // Subjects whose glucose production cannot cover insulin-independent
      // uptake at the fasting setpoint have no basal steady state; redraw.
      if (o.egp0 < 1.2 * o.f01) continue;
      calibrate_therapy(p);
      p.validate();
      subjects.push_back(std::move(p));
      break;
    }
  }
  return subjects;
}

}  // namespace glucorl
