#include "glucorl/replay.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "glucorl/errors.hpp"

namespace glucorl {

namespace {

constexpr std::uint32_t kReplayMagic = 0x52504C59;  // "RPLY"
constexpr std::uint32_t kReplayVersion = 1;

void save_obs(BinaryWriter& w, const Observation& o) {
  w.write<std::int32_t>(o.length());
  w.write_vector(o.values());
}

Observation load_obs(BinaryReader& r) {
  const int len = r.read<std::int32_t>();
  if (len < 0 || len > 4096) throw FormatError("corrupt observation length");
  Observation o(len);
  auto v = r.read_vector();
  if (v.size() != o.values().size()) throw FormatError("corrupt observation data");
  o.values() = std::move(v);
  return o;
}

}  // namespace

void save_transition(BinaryWriter& w, const Transition& t) {
  save_obs(w, t.o);
  w.write<std::int32_t>(t.a);
  w.write(t.r);
  save_obs(w, t.o_next);
  w.write_bool(t.done);
  w.write(t.priority);
  w.write(t.source);
  w.write(t.episode);
  w.write(t.step);
  w.write(t.nstep.discounted_reward);
  save_obs(w, t.nstep.bootstrap_obs);
  w.write_bool(t.nstep.terminal);
  w.write<std::int32_t>(t.nstep.length);
}

Transition load_transition(BinaryReader& r) {
  Transition t;
  t.o = load_obs(r);
  t.a = r.read<std::int32_t>();
  t.r = r.read<double>();
  t.o_next = load_obs(r);
  t.done = r.read_bool();
  t.priority = r.read<double>();
  t.source = r.read<TransitionSource>();
  if (t.source != TransitionSource::generalized_pool && t.source != TransitionSource::policy_generated) {
    throw FormatError("corrupt transition source");
  }
  t.episode = r.read<std::int64_t>();
  t.step = r.read<std::int64_t>();
  t.nstep.discounted_reward = r.read<double>();
  t.nstep.bootstrap_obs = load_obs(r);
  t.nstep.terminal = r.read_bool();
  t.nstep.length = r.read<std::int32_t>();
  return t;
}

SumTree::SumTree(std::size_t leaves)
    : leaves_(leaves), base_(std::bit_ceil(std::max<std::size_t>(leaves, 1))), nodes_(2 * base_, 0.0) {}

void SumTree::set(std::size_t i, double value) {
  if (i >= leaves_) throw IndexOutOfRange(fmt::format("sum-tree leaf {} of {}", i, leaves_));
  std::size_t node = base_ + i;
  nodes_[node] = value;
  // Parents are recomputed from their children, never adjusted by deltas, so
  // rounding errors do not accumulate.
  for (node /= 2; node >= 1; node /= 2) nodes_[node] = nodes_[2 * node] + nodes_[2 * node + 1];
}

std::size_t SumTree::find(double u) const {
  std::size_t node = 1;
  while (node < base_) {
    const std::size_t left = 2 * node;
    if (u < nodes_[left] || nodes_[left + 1] <= 0.0) {
      node = left;
    } else {
      u -= nodes_[left];
      node = left + 1;
    }
  }
  std::size_t leaf = node - base_;
  // Rounding at interval edges can land on an empty leaf; step back to the
  // nearest occupied one.
  while (leaf > 0 && nodes_[base_ + leaf] <= 0.0) --leaf;
  return leaf;
}

ReplayMemory::ReplayMemory(ReplayConfig config) : config_(config), tree_(config.capacity) {
  if (config_.capacity == 0) throw ConfigError("replay capacity must be positive");
  if (!(config_.alpha >= 0.0) || !(config_.epsilon_prime > 0.0)) {
    throw ConfigError("replay alpha must be >= 0 and eps' > 0");
  }
  slots_.reserve(config_.capacity);
}

const Transition& ReplayMemory::at(std::size_t i) const {
  if (i >= slots_.size()) throw IndexOutOfRange(fmt::format("replay index {} of {}", i, slots_.size()));
  return slots_[i];
}

double ReplayMemory::probability(std::size_t i) const {
  if (i >= slots_.size()) throw IndexOutOfRange(fmt::format("replay index {} of {}", i, slots_.size()));
  return tree_.get(i) / tree_.total();
}

void ReplayMemory::set_priority(std::size_t i, double p) {
  slots_[i].priority = p;
  tree_.set(i, std::pow(p, config_.alpha));
}

void ReplayMemory::push(Transition t) {
  std::size_t slot = 0;
  if (slots_.size() < config_.capacity) {
    slot = slots_.size();
    slots_.push_back({});
    inserted_.push_back(0);
  } else {
    auto& victims = pool_fifo_.empty() ? policy_fifo_ : pool_fifo_;
    slot = victims.front();
    victims.pop_front();
  }
  queue_for(t.source).push_back(slot);
  slots_[slot] = std::move(t);
  inserted_[slot] = next_seq_++;
  set_priority(slot, max_priority_);
}

ReplaySample ReplayMemory::sample(std::size_t batch, double beta, std::mt19937_64& rng) const {
  if (batch == 0 || slots_.size() < batch) {
    throw InsufficientSamples(fmt::format("need {} samples, memory holds {}", batch, slots_.size()));
  }
  const double total = tree_.total();
  const double n = static_cast<double>(slots_.size());
  double min_mass = tree_.get(0);
  for (std::size_t i = 1; i < slots_.size(); ++i) min_mass = std::min(min_mass, tree_.get(i));
  const double max_weight = std::pow(n * min_mass / total, -beta);

  std::uniform_real_distribution<double> u(0.0, total);
  ReplaySample s;
  s.indices.reserve(batch);
  for (std::size_t k = 0; k < batch; ++k) {
    const std::size_t i = std::min(tree_.find(u(rng)), slots_.size() - 1);
    const double pr = tree_.get(i) / total;
    s.indices.push_back(i);
    s.probabilities.push_back(pr);
    s.is_weights.push_back(std::pow(n * pr, -beta) / max_weight);
  }
  return s;
}

ReplaySample ReplayMemory::sample_uniform(std::size_t batch, std::mt19937_64& rng) const {
  if (batch == 0 || slots_.size() < batch) {
    throw InsufficientSamples(fmt::format("need {} samples, memory holds {}", batch, slots_.size()));
  }
  std::uniform_int_distribution<std::size_t> pick(0, slots_.size() - 1);
  ReplaySample s;
  for (std::size_t k = 0; k < batch; ++k) s.indices.push_back(pick(rng));
  s.is_weights.assign(batch, 1.0);
  s.probabilities.assign(batch, 1.0 / static_cast<double>(slots_.size()));
  return s;
}

void ReplayMemory::update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors) {
  if (indices.size() != td_errors.size()) throw ShapeMismatch("indices and TD errors differ in length");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= slots_.size()) {
      throw IndexOutOfRange(fmt::format("replay index {} of {}", indices[k], slots_.size()));
    }
    if (!std::isfinite(td_errors[k])) throw NumericalBlowup("non-finite TD error");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const double p = std::abs(td_errors[k]) + config_.epsilon_prime;
    max_priority_ = std::max(max_priority_, p);
    set_priority(indices[k], p);
  }
}

void ReplayMemory::relabel_as_pool() {
  std::vector<std::size_t> order(slots_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return inserted_[a] < inserted_[b]; });
  pool_fifo_.assign(order.begin(), order.end());
  policy_fifo_.clear();
  for (auto& t : slots_) t.source = TransitionSource::generalized_pool;
}

void ReplayMemory::save(BinaryWriter& w) const {
  w.write(kReplayMagic);
  w.write(kReplayVersion);
  w.write<std::uint64_t>(config_.capacity);
  w.write(config_.alpha);
  w.write(config_.epsilon_prime);
  w.write(max_priority_);
  w.write(next_seq_);
  w.write<std::uint64_t>(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    w.write(inserted_[i]);
    save_transition(w, slots_[i]);
  }
  for (const auto* q : {&pool_fifo_, &policy_fifo_}) {
    w.write<std::uint64_t>(q->size());
    for (auto i : *q) w.write<std::uint64_t>(i);
  }
}

ReplayMemory ReplayMemory::load(BinaryReader& r) {
  if (r.read<std::uint32_t>() != kReplayMagic) throw FormatError("not a replay memory block");
  if (r.read<std::uint32_t>() != kReplayVersion) throw FormatError("unsupported replay format version");
  ReplayConfig cfg;
  cfg.capacity = r.read_size(1u << 24);
  cfg.alpha = r.read<double>();
  cfg.epsilon_prime = r.read<double>();
  ReplayMemory m(cfg);
  m.max_priority_ = r.read<double>();
  m.next_seq_ = r.read<std::uint64_t>();
  const auto n = r.read_size(cfg.capacity);
  for (std::size_t i = 0; i < n; ++i) {
    m.inserted_.push_back(r.read<std::uint64_t>());
    m.slots_.push_back(load_transition(r));
    m.tree_.set(i, std::pow(m.slots_.back().priority, cfg.alpha));
  }
  for (auto* q : {&m.pool_fifo_, &m.policy_fifo_}) {
    const auto k = r.read_size(n);
    for (std::size_t j = 0; j < k; ++j) {
      const auto i = r.read_size(n - 1);
      q->push_back(i);
    }
  }
  if (m.pool_fifo_.size() + m.policy_fifo_.size() != n) throw FormatError("corrupt replay eviction queues");
  return m;
}

bool ReplayMemory::operator==(const ReplayMemory& o) const {
  return config_ == o.config_ && slots_ == o.slots_ && inserted_ == o.inserted_ && next_seq_ == o.next_seq_ &&
         pool_fifo_ == o.pool_fifo_ && policy_fifo_ == o.policy_fifo_ && max_priority_ == o.max_priority_;
}

}  // namespace glucorl
