#include "glucorl/observation.hpp"

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

void History::push(const StepRecord& r) {
  records_.push_back(r);
  while (records_.size() > static_cast<std::size_t>(capacity_)) records_.pop_front();
}

void History::pad(const StepRecord& r) { records_.assign(static_cast<std::size_t>(capacity_), r); }

Observation make_observation(const History& history, int window) {
  const auto& recs = history.records();
  if (window <= 0 || recs.size() < static_cast<std::size_t>(window)) {
    throw InsufficientHistory(fmt::format("need {} steps of history, have {}", window, recs.size()));
  }
  Observation obs(window);
  const std::size_t first = recs.size() - static_cast<std::size_t>(window);
  for (int i = 0; i < window; ++i) {
    const auto& r = recs[first + static_cast<std::size_t>(i)];
    obs.at(i, kChannelGlucose) = r.cgm;
    obs.at(i, kChannelCarbs) = r.carbs;
    obs.at(i, kChannelInsulin) = r.insulin;
    obs.at(i, kChannelGlucagon) = r.glucagon;
  }
  return obs;
}

}  // namespace glucorl
