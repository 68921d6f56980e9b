#include "glucorl/trace.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "glucorl/errors.hpp"
#include "glucorl/kvfile.hpp"

namespace glucorl {

std::string trace_csv_header() {
  return "subject_id,controller,t_min,cgm,glucose,basal_u_per_h,bolus_u,glucagon_mg,carbs_g,reward,action\n";
}

void append_trace_csv(std::string& out, const Trace& trace) {
  for (const auto& r : trace.records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", trace.subject_id, trace.controller, r.t_min, r.cgm,
                       r.glucose, r.basal, r.bolus, r.glucagon, r.carbs, r.reward, r.action);
  }
}

void save_trace_csv(const std::filesystem::path& path, const Trace& trace) {
  std::string out = trace_csv_header();
  append_trace_csv(out, trace);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw MissingInput("cannot write " + path.string());
  f << out;
}

std::vector<Trace> load_traces_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingInput("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line + "\n" != trace_csv_header()) {
    throw FormatError(path.string() + ": not a trace CSV");
  }
  std::vector<Trace> traces;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 11) throw FormatError(fmt::format("{}:{}: expected 11 columns", path.string(), line_no));
    Trace* t = nullptr;
    for (auto& existing : traces) {
      if (existing.subject_id == cols[0] && existing.controller == cols[1]) t = &existing;
    }
    if (t == nullptr) {
      traces.push_back({cols[0], cols[1], {}});
      t = &traces.back();
    }
    TraceRecord r;
    r.t_min = parse_int(cols[2]);
    r.cgm = parse_double(cols[3]);
    r.glucose = parse_double(cols[4]);
    r.basal = parse_double(cols[5]);
    r.bolus = parse_double(cols[6]);
    r.glucagon = parse_double(cols[7]);
    r.carbs = parse_double(cols[8]);
    r.reward = parse_double(cols[9]);
    r.action = static_cast<int>(parse_int(cols[10]));
    t->records.push_back(r);
  }
  return traces;
}

}  // namespace glucorl
