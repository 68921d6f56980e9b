#pragma once

// Prioritized experience replay. Sampling probability of item i is
// p_i^alpha / sum_j p_j^alpha with p_i = |delta_i| + eps'. New items enter at
// the largest priority seen so far so each is replayed at least once.

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include "glucorl/binary_io.hpp"
#include "glucorl/observation.hpp"

namespace glucorl {

enum class TransitionSource : std::uint8_t { generalized_pool = 0, policy_generated = 1 };

// Discounted reward over up to n steps from a transition, plus where to
// bootstrap from. `length` is the number of reward terms m.
struct NStepReturn {
  double discounted_reward = 0.0;
  Observation bootstrap_obs;
  bool terminal = false;
  int length = 0;

  bool operator==(const NStepReturn&) const = default;
};

struct Transition {
  Observation o;
  int a = 0;
  double r = 0.0;
  Observation o_next;
  bool done = false;
  double priority = 0.0;  // mirrors the memory's stored value
  TransitionSource source = TransitionSource::policy_generated;
  std::int64_t episode = 0;
  std::int64_t step = 0;  // index within the episode
  NStepReturn nstep;

  bool operator==(const Transition&) const = default;
};

void save_transition(BinaryWriter& w, const Transition& t);
Transition load_transition(BinaryReader& r);

// Binary tree of partial sums over a fixed number of leaves.
class SumTree {
 public:
  explicit SumTree(std::size_t leaves = 0);

  void set(std::size_t i, double value);
  double get(std::size_t i) const { return nodes_[base_ + i]; }
  double total() const { return nodes_.empty() ? 0.0 : nodes_[1]; }
  std::size_t leaves() const { return leaves_; }
  // Leaf whose cumulative interval contains u, u in [0, total()). Leaves with
  // zero mass are never returned.
  std::size_t find(double u) const;

 private:
  std::size_t leaves_ = 0;
  std::size_t base_ = 1;
  std::vector<double> nodes_;
};

struct ReplayConfig {
  std::size_t capacity = 5000;
  double alpha = 0.3;
  double epsilon_prime = 1e-3;

  bool operator==(const ReplayConfig&) const = default;
};

struct ReplaySample {
  std::vector<std::size_t> indices;
  std::vector<double> is_weights;
  std::vector<double> probabilities;
};

class ReplayMemory {
 public:
  explicit ReplayMemory(ReplayConfig config = {});

  const ReplayConfig& config() const { return config_; }
  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  double max_priority() const { return max_priority_; }

  const Transition& at(std::size_t i) const;
  double priority(std::size_t i) const { return at(i).priority; }
  // Pr_i under the current priorities.
  double probability(std::size_t i) const;
  // sum_i p_i^alpha as held at the tree root.
  double total_mass() const { return tree_.total(); }

  // Full memory evicts a generalized-pool item first, otherwise the oldest.
  void push(Transition t);

  // Independent draws with replacement, Pr_i proportional to p_i^alpha.
  // Weights (N Pr_i)^-beta are divided by their largest possible value over
  // the whole memory. Throws InsufficientSamples when size() < batch.
  ReplaySample sample(std::size_t batch, double beta, std::mt19937_64& rng) const;
  // Uniform draws with replacement; all weights are 1.
  ReplaySample sample_uniform(std::size_t batch, std::mt19937_64& rng) const;

  // p_i <- |delta_i| + eps'. Throws IndexOutOfRange for unknown indices.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> td_errors);

  // Marks every stored item as part of the generalized pool, keeping
  // insertion order for eviction.
  void relabel_as_pool();

  void save(BinaryWriter& w) const;
  static ReplayMemory load(BinaryReader& r);

  bool operator==(const ReplayMemory& o) const;

 private:
  void set_priority(std::size_t i, double p);
  std::deque<std::size_t>& queue_for(TransitionSource s) {
    return s == TransitionSource::generalized_pool ? pool_fifo_ : policy_fifo_;
  }

  ReplayConfig config_;
  std::vector<Transition> slots_;
  std::vector<std::uint64_t> inserted_;  // insertion sequence per slot
  std::uint64_t next_seq_ = 0;
  std::deque<std::size_t> pool_fifo_;
  std::deque<std::size_t> policy_fifo_;
  SumTree tree_;
  double max_priority_ = 1.0;
};

}  // namespace glucorl
