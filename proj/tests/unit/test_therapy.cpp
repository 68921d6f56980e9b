#include <doctest.h>

#include "glucorl/errors.hpp"
#include "glucorl/patient.hpp"
#include "glucorl/reward.hpp"
#include "glucorl/therapy.hpp"

using namespace glucorl;

TEST_CASE("action decoding") {
  auto p = average_subject(Cohort::adult);
  p.basal_rate = 1.2;
  p.body_weight = 80.0;
  const auto sh = ActionSpace::single();
  const auto dh = ActionSpace::dual();
  CHECK(sh.size() == 5);
  CHECK(dh.size() == 6);
  const double expect[] = {0.0, 0.6, 1.2, 1.8, 2.4};
  for (int a = 0; a < 5; ++a) {
    const auto d = decode_action(a, sh, p, 0.0);
    CHECK(d.basal_u_per_h == doctest::Approx(expect[a]));
    CHECK(d.glucagon_mg == 0.0);
    CHECK(d.effective_action == a);
  }
  const auto g = decode_action(5, dh, p, 0.0);
  CHECK(g.basal_u_per_h == 0.0);
  CHECK(g.glucagon_mg == doctest::Approx(0.3 * 80.0 * 1e-3));
  CHECK_THROWS_AS(decode_action(5, sh, p, 0.0), InvalidAction);
  CHECK_THROWS_AS(decode_action(-1, dh, p, 0.0), InvalidAction);
}

TEST_CASE("daily glucagon cap") {
  auto p = average_subject(Cohort::adult);
  p.body_weight = 100.0;  // 0.03 mg per dose
  const auto dh = ActionSpace::dual();
  CHECK(decode_action(5, dh, p, 0.97).glucagon_mg == doctest::Approx(0.03));
  const auto capped = decode_action(5, dh, p, 0.98);
  CHECK(capped.glucagon_mg == 0.0);
  CHECK(capped.effective_action == ActionSpace::kSuspend);
}

TEST_CASE("safety gate") {
  const auto p = average_subject(Cohort::adult);
  const auto dh = ActionSpace::dual();
  const SafetyConstraints gate;
  for (int a = 0; a < 5; ++a) {
    CHECK(apply_action(a, dh, p, 79.9, gate, 0.0).basal_u_per_h == 0.0);
    CHECK(apply_action(a, dh, p, 79.9, gate, 0.0).effective_action == (a == 0 ? 0 : ActionSpace::kSuspend));
  }
  CHECK(apply_action(2, dh, p, 80.0, gate, 0.0).basal_u_per_h == doctest::Approx(p.basal_rate));
  CHECK(apply_action(5, dh, p, 160.1, gate, 0.0).glucagon_mg == 0.0);
  CHECK(apply_action(5, dh, p, 160.0, gate, 0.0).glucagon_mg > 0.0);
}

TEST_CASE("bolus calculator and insulin on board") {
  auto p = average_subject(Cohort::adult);
  p.icr = 10.0;
  p.isf = 50.0;
  CHECK(bolus_dose(60.0, 120.0, p, 0.0) == doctest::Approx(6.0));
  CHECK(bolus_dose(60.0, 220.0, p, 1.0) == doctest::Approx(7.0));
  CHECK(bolus_dose(0.0, 60.0, p, 0.0) == 0.0);

  InsulinOnBoard iob;
  iob.add(0, 4.0);
  CHECK(iob.at(0) == doctest::Approx(4.0));
  CHECK(iob.at(120) == doctest::Approx(2.0));
  CHECK(iob.at(240) == doctest::Approx(0.0));
  iob.add(60, 2.0);
  CHECK(iob.at(180) == doctest::Approx(1.0 + 1.0));
}

TEST_CASE("low-glucose suspension") {
  const auto p = average_subject(Cohort::adult);
  CHECK(lgs_basal(79.99, p) == 0.0);
  CHECK(lgs_basal(80.0, p) == doctest::Approx(p.basal_rate));
  CHECK(lgs_action(50.0) == ActionSpace::kSuspend);
  CHECK(lgs_action(150.0) == ActionSpace::kNominalBasal);
}

TEST_CASE("reward schemes") {
  CHECK(compute_reward(100, RewardScheme::s1) == 1.0);
  CHECK(compute_reward(200, RewardScheme::s1) == -1.0);
  CHECK(compute_reward(20, RewardScheme::s1) == -10.0);
  CHECK(compute_reward(50, RewardScheme::s2) == -0.5);
  CHECK(compute_reward(310, RewardScheme::s2) == -1.0);
  CHECK(compute_reward(240, RewardScheme::s3) == doctest::Approx(-0.75));
  CHECK(compute_reward(30, RewardScheme::s3) == doctest::Approx(-1.0));
  CHECK(compute_reward(50, RewardScheme::s4) == doctest::Approx(-0.8));
  CHECK(compute_reward(300, RewardScheme::s4) == doctest::Approx(-1.0));
  CHECK(compute_reward(180.0) == 0.1);
  CHECK_THROWS_AS(reward_scheme_from_int(0), ConfigError);
  CHECK(is_terminal(29.9));
  CHECK_FALSE(is_terminal(30.0));
  CHECK_FALSE(is_terminal(300.0));
  CHECK(is_terminal(300.1));
}
