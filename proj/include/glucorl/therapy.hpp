#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "glucorl/patient.hpp"

namespace glucorl {

enum class HormoneMode { single_hormone, dual_hormone };

const char* to_string(HormoneMode m);        // "SH" / "DH"
HormoneMode parse_hormone_mode(std::string_view s);

// Discrete basal actions: index i < 5 scales the basal rate by multipliers[i];
// in dual-hormone mode index 5 delivers a fixed glucagon mini-bolus with basal
// suspended for the step.
struct ActionSpace {
  HormoneMode mode = HormoneMode::single_hormone;
  std::array<double, 5> basal_multipliers{0.0, 0.5, 1.0, 1.5, 2.0};
  double glucagon_ug_per_kg = 0.3;
  double glucagon_daily_cap_mg = 1.0;

  static ActionSpace single() { return {}; }
  static ActionSpace dual() {
    ActionSpace s;
    s.mode = HormoneMode::dual_hormone;
    return s;
  }

  int size() const { return mode == HormoneMode::dual_hormone ? 6 : 5; }
  bool is_glucagon(int action) const { return mode == HormoneMode::dual_hormone && action == 5; }
  // Index of the multiplier-1.0 action.
  static constexpr int kNominalBasal = 2;
  static constexpr int kSuspend = 0;
  static constexpr int kGlucagon = 5;
};

struct SafetyConstraints {
  double insulin_suspend_below = 80.0;   // mg/dL
  double glucagon_suspend_above = 160.0;  // mg/dL
};

struct Delivery {
  double basal_u_per_h = 0.0;
  double glucagon_mg = 0.0;
  // The action whose delivery actually happened after overrides; always a
  // valid index of the same space.
  int effective_action = 0;
};

// Maps an action to hormone delivery, enforcing the daily glucagon cap but no
// glucose-dependent gate. Throws InvalidAction on an out-of-range index.
Delivery decode_action(int action, const ActionSpace& space, const PatientParams& params,
                       double glucagon_today_mg);

// decode_action followed by the safety gate: basal forced to zero below
// `insulin_suspend_below`, glucagon forced to zero above
// `glucagon_suspend_above`.
Delivery apply_action(int action, const ActionSpace& space, const PatientParams& params, double cgm,
                      const SafetyConstraints& constraints, double glucagon_today_mg);

// Bolus calculator ------------------------------------------------------------

inline constexpr double kCorrectionTarget = 120.0;   // mg/dL
inline constexpr double kInsulinActionMin = 240.0;   // linear IOB decay horizon

// max(0, carbs/icr + (cgm - target)/isf - iob)
double bolus_dose(double announced_carbs, double cgm, const PatientParams& params, double iob);

// Insulin on board from prior boluses, each decaying linearly to zero over
// four hours.
class InsulinOnBoard {
 public:
  struct Entry {
    std::int64_t t_min;
    double units;
    bool operator==(const Entry&) const = default;
  };

  void add(std::int64_t t_min, double units);
  double at(std::int64_t t_min) const;
  void clear() { entries_.clear(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void set_entries(std::vector<Entry> e) { entries_ = std::move(e); }

 private:
  std::vector<Entry> entries_;
};

// Low-glucose suspension baseline: basal suspended strictly below 80 mg/dL.
inline constexpr double kLgsThreshold = 80.0;
double lgs_basal(double cgm, const PatientParams& params);
// The same policy expressed as an action index (0 or 2).
int lgs_action(double cgm);

}  // namespace glucorl
