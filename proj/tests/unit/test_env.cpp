#include <doctest.h>

#include <sstream>

#include "glucorl/env.hpp"
#include "glucorl/errors.hpp"

using namespace glucorl;

namespace {

GlucoseEnv make_env(HormoneMode mode = HormoneMode::single_hormone, int days = 2) {
  const auto p = make_cohort(Cohort::adult, 1).front();
  EnvOptions o;
  o.space = mode == HormoneMode::dual_hormone ? ActionSpace::dual() : ActionSpace::single();
  return GlucoseEnv(p, generate_scenario(p, days, 31), o);
}

}  // namespace

TEST_CASE("initial observation is padded with the steady record") {
  const auto env = make_env();
  const auto o = env.observation();
  REQUIRE(o.length() == kDefaultWindow);
  for (int t = 1; t < o.length(); ++t) {
    for (int c = 0; c < kChannels; ++c) CHECK(o.at(t, c) == o.at(0, c));
  }
  CHECK(o.at(0, kChannelGlucose) == doctest::Approx(env.cgm()));
  CHECK(o.at(0, kChannelInsulin) == doctest::Approx(env.params().basal_rate * kStepMinutes / 60.0));
}

TEST_CASE("step bookkeeping") {
  auto env = make_env();
  const double before = env.cgm();
  const auto out = env.step(ActionSpace::kNominalBasal);
  CHECK(out.t_min == 0);
  CHECK(env.time() == kStepMinutes);
  CHECK(out.cgm_before == before);
  CHECK(out.cgm == env.cgm());
  CHECK(out.reward == compute_reward(out.cgm));
  CHECK(out.done == is_terminal(out.cgm));
  const auto o = env.observation();
  CHECK(o.at(kDefaultWindow - 1, kChannelGlucose) == out.cgm);
  CHECK_THROWS_AS(env.step(7), InvalidAction);
}

TEST_CASE("meal steps carry announced carbs and a bolus") {
  auto env = make_env();
  const auto& meals = env.patient().scenario().meals;
  REQUIRE_FALSE(meals.empty());
  const auto first = meals.front();
  StepOutcome out;
  while (env.time() <= first.time_min) out = env.step(ActionSpace::kNominalBasal);
  CHECK(out.t_min == first.time_min);
  CHECK(out.carbs_true == first.true_carbs);
  CHECK(out.carbs_announced == first.announced_carbs);
  CHECK(out.bolus_u > 0.0);
  CHECK(env.observation().at(kDefaultWindow - 1, kChannelCarbs) == first.announced_carbs);
}

TEST_CASE("restart starts a new episode at steady state") {
  auto env = make_env();
  for (int k = 0; k < 100; ++k) env.step(4);
  const auto t = env.time();
  env.restart();
  CHECK(env.episode() == 1);
  CHECK(env.episode_step() == 0);
  CHECK(env.time() == t);
  const auto o = env.observation();
  for (int r = 1; r < o.length(); ++r) CHECK(o.at(r, kChannelGlucose) == o.at(0, kChannelGlucose));
}

TEST_CASE("environment state round-trips") {
  auto a = make_env(HormoneMode::dual_hormone);
  for (int k = 0; k < 200; ++k) a.step(k % 6);
  std::stringstream ss;
  BinaryWriter w(ss);
  a.save(w);
  auto b = make_env(HormoneMode::dual_hormone);
  BinaryReader r(ss);
  b.load(r);
  for (int k = 0; k < 200; ++k) {
    const auto x = a.step(k % 6), y = b.step(k % 6);
    REQUIRE(x.cgm == y.cgm);
    REQUIRE(x.action == y.action);
    REQUIRE(x.glucagon_mg == y.glucagon_mg);
  }
  CHECK(a.observation() == b.observation());
}
