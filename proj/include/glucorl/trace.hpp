#pragma once

// Per-step record of a closed-loop run, exportable as CSV.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace glucorl {

struct TraceRecord {
  std::int64_t t_min = 0;  // start of the step
  double cgm = 0.0;        // reading at the end of the step
  double glucose = 0.0;    // plasma glucose at the end of the step
  double basal = 0.0;      // U/h
  double bolus = 0.0;      // U
  double glucagon = 0.0;   // mg
  double carbs = 0.0;      // true carbs of a meal starting this step, g
  double reward = 0.0;
  int action = 0;          // executed action

  bool operator==(const TraceRecord&) const = default;
};

struct Trace {
  std::string subject_id;
  std::string controller;
  std::vector<TraceRecord> records;

  bool operator==(const Trace&) const = default;
};

inline constexpr int kTraceSchemaVersion = 1;

// Columns: subject_id,controller,t_min,cgm,glucose,basal_u_per_h,bolus_u,
// glucagon_mg,carbs_g,reward,action
std::string trace_csv_header();
void append_trace_csv(std::string& out, const Trace& trace);
void save_trace_csv(const std::filesystem::path& path, const Trace& trace);
// Reads every trace in a CSV file, split by (subject_id, controller) in order
// of first appearance.
std::vector<Trace> load_traces_csv(const std::filesystem::path& path);

}  // namespace glucorl
