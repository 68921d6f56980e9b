#pragma once

#include <cstddef>
#include <deque>
#include <vector>

namespace glucorl {

inline constexpr int kChannels = 4;
inline constexpr int kDefaultWindow = 12;

enum Channel : int { kChannelGlucose = 0, kChannelCarbs = 1, kChannelInsulin = 2, kChannelGlucagon = 3 };

// What happened during one completed 5-minute step: the CGM reading at its
// end, carbohydrates announced at its start, total insulin (bolus + basal) and
// glucagon delivered over it.
struct StepRecord {
  double cgm = 0.0;       // mg/dL
  double carbs = 0.0;     // g
  double insulin = 0.0;   // U
  double glucagon = 0.0;  // mg

  bool operator==(const StepRecord&) const = default;
};

// L x 4 window of raw (unnormalised) step records, oldest row first.
class Observation {
 public:
  Observation() = default;
  explicit Observation(int length) : length_(length), values_(static_cast<std::size_t>(length) * kChannels, 0.0) {}

  int length() const { return length_; }
  double at(int step, int channel) const { return values_[static_cast<std::size_t>(step) * kChannels + channel]; }
  double& at(int step, int channel) { return values_[static_cast<std::size_t>(step) * kChannels + channel]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool operator==(const Observation&) const = default;

 private:
  int length_ = 0;
  std::vector<double> values_;
};

// Bounded history of step records; keeps only the latest `capacity` entries.
class History {
 public:
  explicit History(int capacity = kDefaultWindow) : capacity_(capacity) {}

  void push(const StepRecord& r);
  // Replaces the contents with `capacity` copies of `r`.
  void pad(const StepRecord& r);
  void clear() { records_.clear(); }

  int capacity() const { return capacity_; }
  std::size_t size() const { return records_.size(); }
  const std::deque<StepRecord>& records() const { return records_; }

 private:
  int capacity_;
  std::deque<StepRecord> records_;
};

// Latest `window` records as an observation. Throws InsufficientHistory when
// fewer records exist.
Observation make_observation(const History& history, int window = kDefaultWindow);

}  // namespace glucorl
