#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "glucorl/kvfile.hpp"

namespace glucorl {

struct PatientParams;

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kStepMinutes = 5;
inline constexpr int kStepsPerDay = kMinutesPerDay / kStepMinutes;

struct MealEvent {
  std::int64_t time_min = 0;  // absolute minutes, aligned to the 5-min grid
  double true_carbs = 0.0;    // g
  double announced_carbs = 0.0;
  int duration_min = 15;

  bool operator==(const MealEvent&) const = default;
};

// Per-day phases of the three multiplicative modulation sinusoids.
struct DailyVariability {
  double insulin_sensitivity_phase = 0.0;
  double absorption_phase = 0.0;
  double bioavailability_phase = 0.0;

  bool operator==(const DailyVariability&) const = default;
};

struct Scenario {
  std::uint64_t seed = 0;
  int days = 0;
  std::vector<MealEvent> meals;  // sorted by time, non-overlapping
  double insulin_sensitivity_amplitude = 0.0;
  double absorption_amplitude = 0.0;
  double bioavailability_amplitude = 0.0;
  std::vector<DailyVariability> variability;  // one entry per day
  std::uint64_t cgm_noise_seed = 0;

  // Multipliers applied to the subject's parameters at time t (minutes).
  // Outside the scenario horizon the first day's phases repeat.
  double insulin_sensitivity_factor(double t_min) const;
  double absorption_factor(double t_min) const;
  double bioavailability_factor(double t_min) const;

  // Meal whose ingestion starts exactly at t, if any.
  const MealEvent* meal_starting_at(std::int64_t t_min) const;
  // True carbohydrate ingestion rate (g/min) over [t, t + 5).
  double carb_rate(std::int64_t step_start_min) const;

  // An empty scenario: no meals, no variability. Used for calibration and
  // steady-state checks.
  static Scenario quiet(int days);

  KeyValueDoc to_doc() const;
  static Scenario from_doc(const KeyValueDoc& doc);
  void save(const std::filesystem::path& path) const;
  static Scenario load(const std::filesystem::path& path);

  bool operator==(const Scenario&) const = default;
};

// Nominal daily meal pattern: (minute of day, grams).
struct NominalMeal {
  int minute_of_day;
  double carbs;
};
inline constexpr NominalMeal kNominalMeals[] = {{7 * 60, 70.0}, {10 * 60, 30.0}, {14 * 60, 110.0}, {21 * 60, 90.0}};

inline constexpr double kMealTimeSdMin = 60.0;
inline constexpr double kMealSizeCv = 0.10;
inline constexpr double kMisestimationLow = -0.30;
inline constexpr double kMisestimationHigh = 0.10;
inline constexpr double kAbsorptionVariability = 0.30;
inline constexpr double kBioavailabilityVariability = 0.10;

Scenario generate_scenario(const PatientParams& params, int days, std::uint64_t seed);

}  // namespace glucorl
