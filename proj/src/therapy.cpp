#include "glucorl/therapy.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

const char* to_string(HormoneMode m) { return m == HormoneMode::single_hormone ? "SH" : "DH"; }

HormoneMode parse_hormone_mode(std::string_view s) {
  if (s == "SH" || s == "single_hormone") return HormoneMode::single_hormone;
  if (s == "DH" || s == "dual_hormone") return HormoneMode::dual_hormone;
  throw ConfigError(fmt::format("unknown hormone mode '{}'", s));
}

Delivery decode_action(int action, const ActionSpace& space, const PatientParams& params,
                       double glucagon_today_mg) {
  if (action < 0 || action >= space.size()) {
    throw InvalidAction(fmt::format("action {} outside [0, {})", action, space.size()));
  }
  if (space.is_glucagon(action)) {
    const double dose = space.glucagon_ug_per_kg * params.body_weight * 1e-3;
    if (glucagon_today_mg + dose > space.glucagon_daily_cap_mg + 1e-12) {
      return {0.0, 0.0, ActionSpace::kSuspend};
    }
    return {0.0, dose, action};
  }
  return {space.basal_multipliers[static_cast<std::size_t>(action)] * params.basal_rate, 0.0, action};
}

Delivery apply_action(int action, const ActionSpace& space, const PatientParams& params, double cgm,
                      const SafetyConstraints& constraints, double glucagon_today_mg) {
  Delivery d = decode_action(action, space, params, glucagon_today_mg);
  if (cgm < constraints.insulin_suspend_below && d.basal_u_per_h > 0.0) {
    d.basal_u_per_h = 0.0;
    d.effective_action = ActionSpace::kSuspend;
  }
  if (cgm > constraints.glucagon_suspend_above && d.glucagon_mg > 0.0) {
    d.glucagon_mg = 0.0;
    d.effective_action = ActionSpace::kSuspend;
  }
  return d;
}

double bolus_dose(double announced_carbs, double cgm, const PatientParams& params, double iob) {
  const double dose = announced_carbs / params.icr + (cgm - kCorrectionTarget) / params.isf - iob;
  return std::max(0.0, dose);
}

void InsulinOnBoard::add(std::int64_t t_min, double units) {
  if (units > 0.0) entries_.push_back({t_min, units});
  std::erase_if(entries_, [&](const Entry& e) { return t_min - e.t_min >= kInsulinActionMin; });
}

double InsulinOnBoard::at(std::int64_t t_min) const {
  double total = 0.0;
  for (const auto& e : entries_) {
    const double elapsed = static_cast<double>(t_min - e.t_min);
    if (elapsed < 0.0) continue;
    total += e.units * std::max(0.0, 1.0 - elapsed / kInsulinActionMin);
  }
  return total;
}

double lgs_basal(double cgm, const PatientParams& params) { return cgm < kLgsThreshold ? 0.0 : params.basal_rate; }

int lgs_action(double cgm) { return cgm < kLgsThreshold ? ActionSpace::kSuspend : ActionSpace::kNominalBasal; }

}  // namespace glucorl
