#include "glucorl/env.hpp"

namespace glucorl {

GlucoseEnv::GlucoseEnv(PatientParams params, Scenario scenario, EnvOptions options)
    : options_(options), patient_(std::move(params), std::move(scenario), options.sim), history_(options.window) {
  history_.pad(steady_record());
}

StepRecord GlucoseEnv::steady_record() const {
  return {patient_.cgm(), 0.0, patient_.params().basal_rate * kStepMinutes / 60.0, 0.0};
}

StepOutcome GlucoseEnv::step(int action, const SafetyConstraints* gate) {
  StepOutcome out;
  out.t_min = time();
  out.cgm_before = patient_.cgm();
  out.glucose_before = patient_.plasma_glucose();
  out.requested_action = action;

  const auto& params = patient_.params();
  if (const MealEvent* meal = patient_.scenario().meal_starting_at(out.t_min)) {
    out.carbs_true = meal->true_carbs;
    out.carbs_announced = meal->announced_carbs;
    out.bolus_u = bolus_dose(meal->announced_carbs, out.cgm_before, params, iob_.at(out.t_min));
    iob_.add(out.t_min, out.bolus_u);
  }

  const Delivery d = gate ? apply_action(action, options_.space, params, out.cgm_before, *gate, glucagon_today())
                          : decode_action(action, options_.space, params, glucagon_today());
  out.action = d.effective_action;
  out.basal_u_per_h = d.basal_u_per_h;
  out.glucagon_mg = d.glucagon_mg;

  const auto reading = patient_.step({d.basal_u_per_h, out.bolus_u, d.glucagon_mg});
  out.cgm = reading.cgm;
  out.plasma_glucose = reading.plasma_glucose;
  out.reward = compute_reward(out.cgm, options_.reward);
  out.done = is_terminal(out.cgm);

  history_.push({out.cgm, out.carbs_announced, out.bolus_u + d.basal_u_per_h * kStepMinutes / 60.0, d.glucagon_mg});
  ++episode_step_;
  return out;
}

void GlucoseEnv::restart() {
  patient_.reset_physiology();
  iob_.clear();
  history_.pad(steady_record());
  ++episode_;
  episode_step_ = 0;
}

void GlucoseEnv::save(BinaryWriter& w) const {
  const auto& st = patient_.state();
  w.write<std::int64_t>(st.t_min);
  w.write_doubles(st.x.data(), st.x.size());
  w.write<double>(st.glucagon_delivered_today);
  w.write<double>(patient_.cgm());
  w.write_string(patient_.sensor().serialize());
  w.write<std::uint64_t>(history_.size());
  for (const auto& r : history_.records()) {
    w.write(r.cgm);
    w.write(r.carbs);
    w.write(r.insulin);
    w.write(r.glucagon);
  }
  w.write<std::uint64_t>(iob_.entries().size());
  for (const auto& e : iob_.entries()) {
    w.write(e.t_min);
    w.write(e.units);
  }
  w.write(episode_);
  w.write(episode_step_);
}

void GlucoseEnv::load(BinaryReader& r) {
  PatientState st;
  st.t_min = r.read<std::int64_t>();
  const auto x = r.read_vector();
  if (x.size() != st.x.size()) throw FormatError("corrupt environment state");
  std::copy(x.begin(), x.end(), st.x.begin());
  st.glucagon_delivered_today = r.read<double>();
  const double cgm = r.read<double>();
  patient_.set_state(st, cgm);
  patient_.sensor().deserialize(r.read_string());
  history_.clear();
  const auto n = r.read_size(1u << 20);
  for (std::size_t i = 0; i < n; ++i) {
    StepRecord rec;
    rec.cgm = r.read<double>();
    rec.carbs = r.read<double>();
    rec.insulin = r.read<double>();
    rec.glucagon = r.read<double>();
    history_.push(rec);
  }
  std::vector<InsulinOnBoard::Entry> entries(r.read_size(1u << 20));
  for (auto& e : entries) {
    e.t_min = r.read<std::int64_t>();
    e.units = r.read<double>();
  }
  iob_.set_entries(std::move(entries));
  episode_ = r.read<std::int64_t>();
  episode_step_ = r.read<std::int64_t>();
}

}  // namespace glucorl
