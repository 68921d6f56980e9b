#pragma once

// Double-DQN targets, n-step returns, epsilon-greedy action selection and the
// combined replay loss. Targets pick the next action with the online network
// (theta1) and evaluate it with the target network (theta2).

#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "glucorl/binary_io.hpp"
#include "glucorl/qnet.hpp"
#include "glucorl/replay.hpp"

namespace glucorl {

// Index of the largest entry; ties go to the lowest index.
int greedy_action(const Eigen::VectorXd& q);

// Uniformly random action with probability epsilon, otherwise greedy.
int epsilon_greedy(const Eigen::VectorXd& q, double epsilon, std::mt19937_64& rng);

// Linear interpolation from `start` to `end` over `horizon` steps, then flat.
struct LinearSchedule {
  double start = 0.0;
  double end = 0.0;
  std::int64_t horizon = 1;

  double at(std::int64_t step) const;
};

// r if done, else r + gamma * Q2(o', argmax_a Q1(o', a)). `Q1` and `Q2` map an
// observation to a vector of action values, so tabular stand-ins work too.
template <typename Obs, typename Q1, typename Q2>
double td_target_1step(double r, const Obs& o_next, bool done, const Q1& q_online, const Q2& q_target, double gamma) {
  if (done) return r;
  const int a = greedy_action(q_online(o_next));
  return r + gamma * q_target(o_next)[a];
}

// Summarises the window starting at window[0]. Rewards are summed until the
// first terminal transition or the end of the window, whichever comes first.
// Throws NonContiguousWindow if consecutive entries do not belong to the same
// episode with consecutive step indices.
NStepReturn summarize_nstep(std::span<const Transition> window, double gamma);

// sum_{k<m} gamma^k r_k + gamma^m Q2(o_m, argmax Q1(o_m)), bootstrap dropped
// at a terminal.
template <typename Q1, typename Q2>
double td_target_nstep(const NStepReturn& s, const Q1& q_online, const Q2& q_target, double gamma) {
  if (s.terminal) return s.discounted_reward;
  const int a = greedy_action(q_online(s.bootstrap_obs));
  return s.discounted_reward + std::pow(gamma, s.length) * q_target(s.bootstrap_obs)[a];
}

template <typename Q1, typename Q2>
double td_target_nstep(std::span<const Transition> window, const Q1& q_online, const Q2& q_target, double gamma) {
  return td_target_nstep(summarize_nstep(window, gamma), q_online, q_target, gamma);
}

// Holds the most recent transitions until their n-step window is complete.
// A transition is released once n successors are known or the episode ends.
class NStepAccumulator {
 public:
  explicit NStepAccumulator(int n = 12, double gamma = 0.9);

  // Appends t and returns every transition whose summary is now final, with
  // its `nstep` field filled in. A transition from a new episode first
  // flushes the previous one with truncated, bootstrapped windows.
  std::vector<Transition> add(Transition t);
  // Releases everything pending with whatever window is available.
  std::vector<Transition> flush();

  int n() const { return n_; }
  double gamma() const { return gamma_; }
  const std::deque<Transition>& pending() const { return pending_; }
  void clear() { pending_.clear(); }

  void save(BinaryWriter& w) const;
  void load(BinaryReader& r);

 private:
  Transition release_front();

  int n_;
  double gamma_;
  std::deque<Transition> pending_;
};

struct LossWeights {
  double gamma = 0.9;
  double lambda1 = 0.0;  // weight of the n-step term
  double lambda2 = 0.0;  // L2 weight decay
};

struct CombinedLoss {
  double loss = 0.0;  // J_DQ + lambda1 J_n + lambda2 |theta1|^2
  double j_dq = 0.0;
  double j_n = 0.0;
  Eigen::VectorXd gradient;     // with respect to theta1
  std::vector<double> td_error; // one-step y - Q(o, a), per sample
  std::vector<double> target_1step;
  std::vector<double> target_nstep;
};

// Batched double-DQN targets for a sampled batch.
std::vector<double> batch_targets_1step(std::span<const Transition* const> batch, const QNetWeights& theta1,
                                        const QNetWeights& theta2, double gamma);
std::vector<double> batch_targets_nstep(std::span<const Transition* const> batch, const QNetWeights& theta1,
                                        const QNetWeights& theta2, double gamma);

// J_DQ = sum_i w_i (y1_i - Q_i)^2 / B and J_n the same with n-step targets.
// With lambda1 = 0 the n-step targets are not computed.
CombinedLoss combined_loss(std::span<const Transition* const> batch, std::span<const double> is_weights,
                           const QNetWeights& theta1, const QNetWeights& theta2, const LossWeights& weights);

}  // namespace glucorl
