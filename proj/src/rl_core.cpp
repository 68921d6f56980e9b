#include "glucorl/rl_core.hpp"

#include <cmath>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

int greedy_action(const Eigen::VectorXd& q) {
  if (q.size() == 0) throw ShapeMismatch("empty Q-value vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return static_cast<int>(best);
}

int epsilon_greedy(const Eigen::VectorXd& q, double epsilon, std::mt19937_64& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError(fmt::format("epsilon {} outside [0, 1]", epsilon));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(q.size()) - 1);
    return pick(rng);
  }
  return greedy_action(q);
}

double LinearSchedule::at(std::int64_t step) const {
  if (horizon <= 0 || step >= horizon) return end;
  if (step <= 0) return start;
  const double frac = static_cast<double>(step) / static_cast<double>(horizon);
  return start + (end - start) * frac;
}

NStepReturn summarize_nstep(std::span<const Transition> window, double gamma) {
  if (window.empty()) throw NonContiguousWindow("empty n-step window");
  NStepReturn s;
  double discount = 1.0;
  for (std::size_t k = 0; k < window.size(); ++k) {
    const auto& t = window[k];
    if (k > 0) {
      const auto& prev = window[k - 1];
      if (t.episode != prev.episode || t.step != prev.step + 1) {
        throw NonContiguousWindow(fmt::format("transition (episode {}, step {}) does not follow (episode {}, step {})",
                                              t.episode, t.step, prev.episode, prev.step));
      }
    }
    s.discounted_reward += discount * t.r;
    discount *= gamma;
    s.length = static_cast<int>(k) + 1;
    if (t.done) {
      s.terminal = true;
      break;
    }
  }
  s.bootstrap_obs = window[static_cast<std::size_t>(s.length) - 1].o_next;
  return s;
}

NStepAccumulator::NStepAccumulator(int n, double gamma) : n_(n), gamma_(gamma) {
  if (n_ < 1) throw ConfigError("n-step horizon must be at least 1");
}

Transition NStepAccumulator::release_front() {
  const std::size_t len = std::min(pending_.size(), static_cast<std::size_t>(n_));
  std::vector<Transition> window(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(len));
  Transition t = std::move(pending_.front());
  pending_.pop_front();
  t.nstep = summarize_nstep(window, gamma_);
  return t;
}

std::vector<Transition> NStepAccumulator::add(Transition t) {
  std::vector<Transition> out;
  if (!pending_.empty()) {
    const auto& last = pending_.back();
    if (t.episode != last.episode || t.step != last.step + 1) out = flush();
  }
  const bool done = t.done;
  pending_.push_back(std::move(t));
  if (done) {
    auto rest = flush();
    out.insert(out.end(), std::make_move_iterator(rest.begin()), std::make_move_iterator(rest.end()));
  } else if (pending_.size() >= static_cast<std::size_t>(n_)) {
    out.push_back(release_front());
  }
  return out;
}

std::vector<Transition> NStepAccumulator::flush() {
  std::vector<Transition> out;
  while (!pending_.empty()) out.push_back(release_front());
  return out;
}

void NStepAccumulator::save(BinaryWriter& w) const {
  w.write<std::int32_t>(n_);
  w.write(gamma_);
  w.write<std::uint64_t>(pending_.size());
  for (const auto& t : pending_) save_transition(w, t);
}

void NStepAccumulator::load(BinaryReader& r) {
  n_ = r.read<std::int32_t>();
  gamma_ = r.read<double>();
  if (n_ < 1) throw FormatError("corrupt n-step horizon");
  const auto k = r.read_size(static_cast<std::size_t>(n_));
  pending_.clear();
  for (std::size_t i = 0; i < k; ++i) pending_.push_back(load_transition(r));
}

namespace {

// Double-DQN bootstrap values Q2(o, argmax Q1(o)) for a batch of observations.
std::vector<double> bootstrap_values(const std::vector<const Observation*>& obs, const QNetWeights& theta1,
                                     const QNetWeights& theta2) {
  std::vector<double> v(obs.size(), 0.0);
  if (obs.empty()) return v;
  const Eigen::MatrixXd q1 = forward_batch(theta1, obs);
  const Eigen::MatrixXd q2 = forward_batch(theta2, obs);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    v[i] = q2(greedy_action(q1.col(col)), col);
  }
  return v;
}

}  // namespace

std::vector<double> batch_targets_1step(std::span<const Transition* const> batch, const QNetWeights& theta1,
                                        const QNetWeights& theta2, double gamma) {
  std::vector<const Observation*> obs;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!batch[i]->done) {
      obs.push_back(&batch[i]->o_next);
      where.push_back(i);
    }
  }
  const auto boot = bootstrap_values(obs, theta1, theta2);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i]->r;
  for (std::size_t k = 0; k < where.size(); ++k) y[where[k]] += gamma * boot[k];
  return y;
}

std::vector<double> batch_targets_nstep(std::span<const Transition* const> batch, const QNetWeights& theta1,
                                        const QNetWeights& theta2, double gamma) {
  std::vector<const Observation*> obs;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i]->nstep;
    if (s.length < 1) throw NonContiguousWindow("transition carries no n-step summary");
    if (!s.terminal) {
      obs.push_back(&s.bootstrap_obs);
      where.push_back(i);
    }
  }
  const auto boot = bootstrap_values(obs, theta1, theta2);
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) y[i] = batch[i]->nstep.discounted_reward;
  for (std::size_t k = 0; k < where.size(); ++k) {
    y[where[k]] += std::pow(gamma, batch[where[k]]->nstep.length) * boot[k];
  }
  return y;
}

CombinedLoss combined_loss(std::span<const Transition* const> batch, std::span<const double> is_weights,
                           const QNetWeights& theta1, const QNetWeights& theta2, const LossWeights& lw) {
  const std::size_t n = batch.size();
  if (n == 0) throw ShapeMismatch("empty batch");
  if (is_weights.size() != n) throw ShapeMismatch("importance weights and batch differ in length");

  CombinedLoss out;
  out.target_1step = batch_targets_1step(batch, theta1, theta2, lw.gamma);
  const bool use_n = lw.lambda1 != 0.0;
  if (use_n) out.target_nstep = batch_targets_nstep(batch, theta1, theta2, lw.gamma);

  // J_DQ + lambda1 J_n has the same gradient as (1 + lambda1) times the loss
  // against the blended target (y1 + lambda1 yn) / (1 + lambda1).
  std::vector<const Observation*> obs(n);
  std::vector<int> actions(n);
  std::vector<double> blended(n), weights(n);
  const double scale = 1.0 + lw.lambda1;
  for (std::size_t i = 0; i < n; ++i) {
    obs[i] = &batch[i]->o;
    actions[i] = batch[i]->a;
    blended[i] = use_n ? (out.target_1step[i] + lw.lambda1 * out.target_nstep[i]) / scale : out.target_1step[i];
    weights[i] = is_weights[i] * scale;
  }
  auto lg = backward(theta1, obs, actions, blended, weights, lw.lambda2);
  out.gradient = std::move(lg.gradient);

  out.td_error.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = lg.q_selected[static_cast<Eigen::Index>(i)];
    out.td_error[i] = out.target_1step[i] - q;
    out.j_dq += is_weights[i] * out.td_error[i] * out.td_error[i];
    if (use_n) {
      const double e = out.target_nstep[i] - q;
      out.j_n += is_weights[i] * e * e;
    }
  }
  out.j_dq /= static_cast<double>(n);
  out.j_n /= static_cast<double>(n);
  out.loss = out.j_dq + lw.lambda1 * out.j_n + lw.lambda2 * theta1.params().squaredNorm();
  return out;
}

}  // namespace glucorl
