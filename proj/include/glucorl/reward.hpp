#pragma once

#include <string_view>

namespace glucorl {

// Piecewise reward schemes over next-step glucose. All share the plateaus
// +1 on [90, 140] and +0.1 on [70, 90) and (140, 180]; they differ outside.
enum class RewardScheme { s1 = 1, s2 = 2, s3 = 3, s4 = 4 };

inline constexpr RewardScheme kDefaultRewardScheme = RewardScheme::s4;

RewardScheme reward_scheme_from_int(int id);

double compute_reward(double g_next, RewardScheme scheme = kDefaultRewardScheme);

// Exploration restarts when glucose leaves [30, 300] mg/dL.
inline bool is_terminal(double g_next) { return g_next < 30.0 || g_next > 300.0; }

}  // namespace glucorl
