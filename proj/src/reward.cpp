#include "glucorl/reward.hpp"

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

RewardScheme reward_scheme_from_int(int id) {
  if (id < 1 || id > 4) throw ConfigError(fmt::format("reward_scheme must be 1..4, got {}", id));
  return static_cast<RewardScheme>(id);
}

double compute_reward(double g, RewardScheme scheme) {
  if (90.0 <= g && g <= 140.0) return 1.0;
  if ((70.0 <= g && g < 90.0) || (140.0 < g && g <= 180.0)) return 0.1;
  const bool hyper = 180.0 < g && g <= 300.0;
  const bool hypo = 30.0 <= g && g < 70.0;
  switch (scheme) {
    case RewardScheme::s1:
      if (hyper || hypo) return -1.0;
      return -10.0;
    case RewardScheme::s2:
      if (hyper || hypo) return -0.5;
      return -1.0;
    case RewardScheme::s3:
      if (hyper) return -0.5 - (g - 180.0) / 240.0;
      if (hypo) return -0.5 + (g - 70.0) / 80.0;
      return -1.0;
    case RewardScheme::s4:
      if (hyper) return -0.4 - (g - 180.0) / 200.0;
      if (hypo) return -0.6 + (g - 70.0) / 100.0;
      return -1.0;
  }
  return -1.0;
}

}  // namespace glucorl
