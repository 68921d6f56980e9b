#include "glucorl/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "glucorl/errors.hpp"
#include "glucorl/patient.hpp"

namespace glucorl {

namespace {

constexpr int kScenarioSchemaVersion = 1;

double sinusoid(double amplitude, double phase, double t_min) {
  const double day_fraction = std::fmod(t_min, static_cast<double>(kMinutesPerDay)) / kMinutesPerDay;
  return 1.0 + amplitude * std::sin(2.0 * std::numbers::pi * day_fraction + phase);
}

const DailyVariability& day_phases(const Scenario& s, double t_min) {
  static const DailyVariability kNone{};
  if (s.variability.empty()) return kNone;
  const auto day = static_cast<std::size_t>(std::max(0.0, std::floor(t_min / kMinutesPerDay)));
  return s.variability[day % s.variability.size()];
}
}  // namespace

double Scenario::insulin_sensitivity_factor(double t_min) const {
  return sinusoid(insulin_sensitivity_amplitude, day_phases(*this, t_min).insulin_sensitivity_phase, t_min);
}

double Scenario::absorption_factor(double t_min) const {
  return sinusoid(absorption_amplitude, day_phases(*this, t_min).absorption_phase, t_min);
}

double Scenario::bioavailability_factor(double t_min) const {
  return sinusoid(bioavailability_amplitude, day_phases(*this, t_min).bioavailability_phase, t_min);
}

const MealEvent* Scenario::meal_starting_at(std::int64_t t_min) const {
  const auto it = std::lower_bound(meals.begin(), meals.end(), t_min,
                                   [](const MealEvent& m, std::int64_t t) { return m.time_min < t; });
  if (it != meals.end() && it->time_min == t_min) return &*it;
  return nullptr;
}

double Scenario::carb_rate(std::int64_t step_start_min) const {
  // Meals never overlap, so only the latest meal that started at or before t
  // can be active.
  auto it = std::upper_bound(meals.begin(), meals.end(), step_start_min,
                             [](std::int64_t t, const MealEvent& m) { return t < m.time_min; });
  if (it == meals.begin()) return 0.0;
  --it;
  if (step_start_min < it->time_min + it->duration_min) return it->true_carbs / it->duration_min;
  return 0.0;
}

Scenario Scenario::quiet(int days) {
  Scenario s;
  s.days = days;
  return s;
}

Scenario generate_scenario(const PatientParams& params, int days, std::uint64_t seed) {
  if (days < 1) throw ConfigError("scenario needs at least one day");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> misestimate(kMisestimationLow, kMisestimationHigh);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  Scenario s;
  s.seed = seed;
  s.days = days;
  s.insulin_sensitivity_amplitude = params.cohort == Cohort::adult ? 0.30 : 0.20;
  s.absorption_amplitude = kAbsorptionVariability;
  s.bioavailability_amplitude = kBioavailabilityVariability;

  for (int d = 0; d < days; ++d) {
    const std::int64_t day_start = static_cast<std::int64_t>(d) * kMinutesPerDay;
    for (const auto& nominal : kNominalMeals) {
      const double jitter = kMealTimeSdMin * normal(rng);
      auto minute = static_cast<std::int64_t>(std::llround((nominal.minute_of_day + jitter) / kStepMinutes)) *
                    kStepMinutes;
      minute = std::clamp<std::int64_t>(minute, 0, kMinutesPerDay - 15);
      const double size_z = std::clamp(normal(rng), -3.0, 3.0);
      MealEvent meal;
      meal.time_min = day_start + minute;
      meal.true_carbs = nominal.carbs * (1.0 + kMealSizeCv * size_z);
      meal.announced_carbs = meal.true_carbs * (1.0 + misestimate(rng));
      s.meals.push_back(meal);
    }
    s.variability.push_back({phase(rng), phase(rng), phase(rng)});
  }

  std::stable_sort(s.meals.begin(), s.meals.end(),
                   [](const MealEvent& a, const MealEvent& b) { return a.time_min < b.time_min; });
  // Push colliding meals later so ingestion windows never overlap.
  for (std::size_t i = 1; i < s.meals.size(); ++i) {
    const auto earliest = s.meals[i - 1].time_min + s.meals[i - 1].duration_min;
    if (s.meals[i].time_min < earliest) s.meals[i].time_min = earliest;
  }
  s.cgm_noise_seed = rng();
  return s;
}

KeyValueDoc Scenario::to_doc() const {
  KeyValueDoc doc;
  doc.set("schema_version", kScenarioSchemaVersion);
  doc.set("kind", std::string("scenario"));
  doc.set("seed", seed);
  doc.set("days", days);
  doc.set("cgm_noise_seed", cgm_noise_seed);
  doc.set("insulin_sensitivity_amplitude", insulin_sensitivity_amplitude);
  doc.set("absorption_amplitude", absorption_amplitude);
  doc.set("bioavailability_amplitude", bioavailability_amplitude);
  doc.set("meal_count", static_cast<std::int64_t>(meals.size()));
  for (std::size_t i = 0; i < meals.size(); ++i) {
    const auto& m = meals[i];
    doc.set(fmt::format("meal.{}", i), fmt::format("{}, {}, {}, {}", m.time_min, format_double(m.true_carbs),
                                                   format_double(m.announced_carbs), m.duration_min));
  }
  for (std::size_t i = 0; i < variability.size(); ++i) {
    const auto& v = variability[i];
    doc.set(fmt::format("variability.{}", i),
            fmt::format("{}, {}, {}", format_double(v.insulin_sensitivity_phase), format_double(v.absorption_phase),
                        format_double(v.bioavailability_phase)));
  }
  return doc;
}

Scenario Scenario::from_doc(const KeyValueDoc& doc) {
  if (doc.get_int("schema_version") != kScenarioSchemaVersion) {
    throw FormatError("unsupported scenario schema_version " + doc.get("schema_version"));
  }
  if (doc.get("kind") != "scenario") throw FormatError("not a scenario file");
  Scenario s;
  s.seed = doc.get_uint("seed");
  s.days = static_cast<int>(doc.get_int("days"));
  s.cgm_noise_seed = doc.get_uint("cgm_noise_seed");
  s.insulin_sensitivity_amplitude = doc.get_double("insulin_sensitivity_amplitude");
  s.absorption_amplitude = doc.get_double("absorption_amplitude");
  s.bioavailability_amplitude = doc.get_double("bioavailability_amplitude");
  const auto count = doc.get_int("meal_count");
  for (std::int64_t i = 0; i < count; ++i) {
    const auto fields = split(doc.get(fmt::format("meal.{}", i)), ',');
    if (fields.size() != 4) throw FormatError(fmt::format("meal.{}: expected 4 fields", i));
    MealEvent m;
    m.time_min = parse_int(fields[0]);
    m.true_carbs = parse_double(fields[1]);
    m.announced_carbs = parse_double(fields[2]);
    m.duration_min = static_cast<int>(parse_int(fields[3]));
    s.meals.push_back(m);
  }
  for (int d = 0; doc.contains(fmt::format("variability.{}", d)); ++d) {
    const auto fields = split(doc.get(fmt::format("variability.{}", d)), ',');
    if (fields.size() != 3) throw FormatError(fmt::format("variability.{}: expected 3 fields", d));
    s.variability.push_back({parse_double(fields[0]), parse_double(fields[1]), parse_double(fields[2])});
  }
  return s;
}

void Scenario::save(const std::filesystem::path& path) const { to_doc().save(path); }

Scenario Scenario::load(const std::filesystem::path& path) { return from_doc(KeyValueDoc::load(path)); }

}  // namespace glucorl
