#include "glucorl/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "glucorl/errors.hpp"
#include "glucorl/eval.hpp"
#include "glucorl/plot.hpp"
#include "glucorl/seeding.hpp"
#include "glucorl/trace.hpp"

namespace glucorl {

namespace fs = std::filesystem;

// Configuration ---------------------------------------------------------------

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ',';
    s += items[i];
  }
  return s;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  for (auto& part : split(value, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// "0,2,5-7" -> {0, 2, 5, 6, 7}
std::vector<int> parse_subjects(std::string_view value) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(static_cast<int>(parse_int(item)));
      continue;
    }
    const auto lo = parse_int(std::string_view(item).substr(0, dash));
    const auto hi = parse_int(std::string_view(item).substr(dash + 1));
    if (hi < lo) throw ConfigError(fmt::format("empty subject range '{}'", item));
    for (auto i = lo; i <= hi; ++i) out.push_back(static_cast<int>(i));
  }
  return out;
}

template <typename F>
auto config_value(std::string_view key, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "cohort") {
    cohort = config_value(key, [&] { return parse_cohort(value); });
  } else if (key == "mode") {
    mode = config_value(key, [&] { return parse_hormone_mode(value); });
  } else if (key == "cohort_size") {
    cohort_size = static_cast<int>(config_value(key, [&] { return parse_int(value); }));
  } else if (key == "cohort_seed") {
    cohort_seed = config_value(key, [&] { return parse_uint(value); });
  } else if (key == "subjects") {
    subjects = config_value(key, [&] { return parse_subjects(value); });
  } else if (key == "policy") {
    policy = std::string(value);
  } else if (key == "controllers") {
    controllers = split_list(value);
  } else if (key == "baseline") {
    baseline = std::string(value);
  } else if (key == "output_dir") {
    output_dir = fs::path(std::string(value));
  } else if (!config_value(key, [&] { return train.set(key, value); })) {
    throw ConfigError(fmt::format("unknown config key '{}'", key));
  }
}

void ExperimentConfig::validate() const {
  train.validate();
  if (cohort_size < 1) throw ConfigError("cohort_size must be positive");
  if (subjects.empty()) throw ConfigError("subjects must not be empty");
  for (int s : subjects) {
    if (s < 0 || s >= cohort_size) {
      throw ConfigError(fmt::format("subject index {} outside cohort of {}", s, cohort_size));
    }
  }
  auto sorted = subjects;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("subjects must not repeat");
  }
  if (policy != "personal" && policy != "general") {
    throw ConfigError(fmt::format("policy must be 'personal' or 'general', got '{}'", policy));
  }
  if (controllers.empty()) throw ConfigError("controllers must not be empty");
  for (const auto& c : controllers) {
    if (c != "LGS" && c != "DRL-SH" && c != "DRL-DH") {
      throw ConfigError(fmt::format("unknown controller '{}' (expected LGS, DRL-SH or DRL-DH)", c));
    }
  }
  if (std::find(controllers.begin(), controllers.end(), baseline) == controllers.end()) {
    throw ConfigError(fmt::format("baseline '{}' is not among the controllers", baseline));
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

KeyValueDoc ExperimentConfig::to_doc() const {
  KeyValueDoc doc;
  doc.set("cohort", std::string(to_string(cohort)));
  doc.set("mode", std::string(to_string(mode)));
  doc.set("cohort_size", cohort_size);
  doc.set("cohort_seed", cohort_seed);
  std::vector<std::string> ids;
  for (int s : subjects) ids.push_back(std::to_string(s));
  doc.set("subjects", join(ids));
  doc.set("policy", policy);
  doc.set("controllers", join(controllers));
  doc.set("baseline", baseline);
  train.to_doc(doc);
  return doc;
}

ExperimentConfig ExperimentConfig::from_doc(const KeyValueDoc& doc) {
  ExperimentConfig c;
  for (const auto& [k, v] : doc.entries()) c.set(k, v);
  c.validate();
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_doc().str()); }

fs::path general_checkpoint_path(HormoneMode mode) {
  return fs::path("checkpoints") / fmt::format("general_{}.ckpt", to_string(mode));
}

std::string file_tag(const std::string& subject_id) {
  auto s = subject_id;
  std::replace(s.begin(), s.end(), '#', '_');
  return s;
}

fs::path personal_checkpoint_path(HormoneMode mode, const std::string& subject_id) {
  return fs::path("checkpoints") / fmt::format("personal_{}_{}.ckpt", to_string(mode), file_tag(subject_id));
}

// Commands ---------------------------------------------------------------------

namespace {

struct CommandArgs {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string output_dir;
  std::string checkpoint;
  std::string reports;
};

ExperimentConfig resolve_config(const CommandArgs& a) {
  ExperimentConfig cfg;
  if (!a.config_file.empty()) {
    if (!fs::exists(a.config_file)) throw MissingInput("config file not found: " + a.config_file);
    KeyValueDoc doc;
    try {
      doc = KeyValueDoc::load(a.config_file);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    for (const auto& [k, v] : doc.entries()) cfg.set(k, v);
  }
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("--set expects key=value, got '{}'", o));
    cfg.set(trim(std::string_view(o).substr(0, eq)), std::string_view(o).substr(eq + 1));
  }
  if (!a.output_dir.empty()) cfg.output_dir = a.output_dir;
  cfg.validate();
  return cfg;
}

// Collects the files a command writes so the manifest can list their hashes.
class Artifacts {
 public:
  Artifacts(const ExperimentConfig& cfg, std::string command) : cfg_(cfg), command_(std::move(command)) {}

  void write(const fs::path& rel, const std::string& content) {
    const auto full = cfg_.output_dir / rel;
    fs::create_directories(full.parent_path());
    std::ofstream f(full, std::ios::binary);
    if (!f) throw MissingInput("cannot write " + full.string());
    f << content;
    files_.emplace_back(rel.generic_string(), fnv1a64(content));
  }

  // Files written by other code (checkpoints); hashed after the fact.
  void record(const fs::path& rel) {
    std::ifstream f(cfg_.output_dir / rel, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    files_.emplace_back(rel.generic_string(), fnv1a64(ss.str()));
  }

  void seed(const std::string& name, std::uint64_t value) { seeds_.emplace_back(name, value); }
  void input(const fs::path& rel) { inputs_.push_back(rel.generic_string()); }

  void write_manifest(const std::string& suffix = {}) {
    KeyValueDoc doc;
    doc.set("command", command_);
    doc.set("config_hash", hex64(cfg_.hash()));
    const auto config = cfg_.to_doc();
    for (const auto& [k, v] : config.entries()) doc.set("config." + k, v);
    for (const auto& [k, v] : seeds_) doc.set("seed." + k, v);
    for (std::size_t i = 0; i < inputs_.size(); ++i) doc.set(fmt::format("input.{}", i), inputs_[i]);
    for (const auto& [path, h] : files_) doc.set("output." + path, hex64(h));
    const auto name = suffix.empty() ? command_ : command_ + "_" + suffix;
    write_raw(fs::path("manifests") / (name + ".kv"), doc.str());
  }

 private:
  void write_raw(const fs::path& rel, const std::string& content) {
    const auto full = cfg_.output_dir / rel;
    fs::create_directories(full.parent_path());
    std::ofstream f(full, std::ios::binary);
    if (!f) throw MissingInput("cannot write " + full.string());
    f << content;
  }

  const ExperimentConfig& cfg_;
  std::string command_;
  std::vector<std::pair<std::string, std::uint64_t>> files_;
  std::vector<std::pair<std::string, std::uint64_t>> seeds_;
  std::vector<std::string> inputs_;
};

std::vector<PatientParams> selected_subjects(const ExperimentConfig& cfg) {
  const auto cohort = make_cohort(cfg.cohort, cfg.cohort_size, cfg.cohort_seed);
  std::vector<PatientParams> out;
  for (int s : cfg.subjects) out.push_back(cohort[static_cast<std::size_t>(s)]);
  return out;
}

fs::path require_file(const ExperimentConfig& cfg, const std::string& explicit_path, const fs::path& rel) {
  const fs::path p = explicit_path.empty() ? cfg.output_dir / rel : fs::path(explicit_path);
  if (!fs::exists(p)) throw MissingInput("required input not found: " + p.string());
  return p;
}

Trainer load_checkpoint(const fs::path& path, const ExperimentConfig& cfg) {
  Trainer t = Trainer::load(path);
  if (!(t.config() == cfg.train)) {
    throw ConfigError(fmt::format("{} was trained with a different configuration", path.string()));
  }
  if (t.cohort() != cfg.cohort) {
    throw ConfigError(fmt::format("{} belongs to the {} cohort", path.string(), to_string(t.cohort())));
  }
  return t;
}

void print_day(std::ostream& out, const ProgressRow& row) {
  const auto day = row.step / kStepsPerDay;
  if (day % 10 != 0) return;
  out << fmt::format("  day {:4d}  episode {:4d}  tir {:5.1f}  loss {:.4f}  eps {:.3f}\n", day, row.episode,
                     row.running_tir, row.loss, row.epsilon);
}

int cmd_generate(const ExperimentConfig& cfg, std::ostream& out) {
  Artifacts art(cfg, "generate");
  const auto avg = average_subject(cfg.cohort);
  art.write(fs::path("cohort") / "average.params", avg.to_doc().str());
  const auto general_seed = derive_seed(cfg.train.seed, SeedStream::general_scenario);
  art.write(fs::path("scenarios") / "general.scenario",
            generate_scenario(avg, cfg.train.generalized_days, general_seed).to_doc().str());
  art.seed("general_scenario", general_seed);

  const auto subjects = selected_subjects(cfg);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& p = subjects[i];
    const auto idx = static_cast<std::uint64_t>(cfg.subjects[i]);
    art.write(fs::path("cohort") / (file_tag(p.subject_id) + ".params"), p.to_doc().str());
    const auto personal_seed = derive_seed(cfg.train.seed, SeedStream::personal_scenario, idx);
    art.write(fs::path("scenarios") / (file_tag(p.subject_id) + "_personal.scenario"),
              generate_scenario(p, cfg.train.personalized_days, personal_seed).to_doc().str());
    art.write(fs::path("scenarios") / (file_tag(p.subject_id) + "_test.scenario"),
              test_scenario(cfg.train, p, cfg.subjects[i]).to_doc().str());
    art.seed(p.subject_id + ".personal_scenario", personal_seed);
    art.seed(p.subject_id + ".test_scenario", derive_seed(cfg.train.seed, SeedStream::test_scenario, idx));
    out << fmt::format("{}: BR {:.3f} U/h  ICR {:.2f} g/U  ISF {:.2f} mg/dL/U\n", p.subject_id, p.basal_rate, p.icr,
                       p.isf);
  }
  art.write_manifest();
  return kExitOk;
}

int cmd_train_general(const ExperimentConfig& cfg, std::ostream& out) {
  Artifacts art(cfg, "train-general");
  out << fmt::format("generalized {} training on the average {} subject, {} days\n", to_string(cfg.mode),
                     to_string(cfg.cohort), cfg.train.generalized_days);
  auto trainer = Trainer::generalized(cfg.train, cfg.mode, cfg.cohort);
  trainer.run([&](const ProgressRow& row) { print_day(out, row); });

  const auto ckpt = general_checkpoint_path(cfg.mode);
  fs::create_directories((cfg.output_dir / ckpt).parent_path());
  trainer.save(cfg.output_dir / ckpt);
  art.record(ckpt);
  art.write(fs::path("progress") / fmt::format("general_{}.csv", to_string(cfg.mode)),
            progress_csv(trainer.progress()));
  art.seed("network_init", derive_seed(cfg.train.seed, SeedStream::network_init));
  art.seed("general_scenario", derive_seed(cfg.train.seed, SeedStream::general_scenario));
  art.seed("general_rng", derive_seed(cfg.train.seed, SeedStream::general_rng));
  art.write_manifest(to_string(cfg.mode));
  return kExitOk;
}

int cmd_train_personal(const ExperimentConfig& cfg, const CommandArgs& a, std::ostream& out) {
  Artifacts art(cfg, "train-personal");
  const auto general_path = require_file(cfg, a.checkpoint, general_checkpoint_path(cfg.mode));
  const auto general = load_checkpoint(general_path, cfg);
  if (general.phase() != TrainPhase::generalized || general.mode() != cfg.mode) {
    throw ConfigError(fmt::format("{} is not a generalized {} checkpoint", general_path.string(), to_string(cfg.mode)));
  }
  art.input(a.checkpoint.empty() ? general_checkpoint_path(cfg.mode) : fs::path(a.checkpoint));

  const auto subjects = selected_subjects(cfg);
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& p = subjects[i];
    const int idx = cfg.subjects[i];
    out << fmt::format("personalized {} training on {}, {} days\n", to_string(cfg.mode), p.subject_id,
                       cfg.train.personalized_days);
    auto trainer = Trainer::personalized(general, p, idx);
    trainer.run([&](const ProgressRow& row) { print_day(out, row); });
    const auto ckpt = personal_checkpoint_path(cfg.mode, p.subject_id);
    fs::create_directories((cfg.output_dir / ckpt).parent_path());
    trainer.save(cfg.output_dir / ckpt);
    art.record(ckpt);
    art.write(fs::path("progress") / fmt::format("personal_{}_{}.csv", to_string(cfg.mode), file_tag(p.subject_id)),
              progress_csv(trainer.progress()));
    const auto u = static_cast<std::uint64_t>(idx);
    art.seed(p.subject_id + ".personal_scenario", derive_seed(cfg.train.seed, SeedStream::personal_scenario, u));
    art.seed(p.subject_id + ".personal_rng", derive_seed(cfg.train.seed, SeedStream::personal_rng, u));
  }
  art.write_manifest(to_string(cfg.mode));
  return kExitOk;
}

HormoneMode controller_mode(const std::string& tag) {
  return tag == "DRL-DH" ? HormoneMode::dual_hormone : HormoneMode::single_hormone;
}

int cmd_evaluate(const ExperimentConfig& cfg, std::ostream& out) {
  Artifacts art(cfg, "evaluate");
  const auto subjects = selected_subjects(cfg);

  // Resolve every input before any rollout so a missing checkpoint fails fast.
  std::map<std::pair<std::string, std::string>, fs::path> ckpts;
  for (const auto& tag : cfg.controllers) {
    if (tag == "LGS") continue;
    const auto mode = controller_mode(tag);
    for (const auto& p : subjects) {
      const auto rel = cfg.policy == "general" ? general_checkpoint_path(mode)
                                               : personal_checkpoint_path(mode, p.subject_id);
      ckpts[{tag, p.subject_id}] = require_file(cfg, {}, rel);
      art.input(rel);
    }
  }

  std::vector<LabelledReport> rows;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const auto& p = subjects[i];
    const auto scenario = test_scenario(cfg.train, p, cfg.subjects[i]);
    art.seed(p.subject_id + ".test_scenario",
             derive_seed(cfg.train.seed, SeedStream::test_scenario, static_cast<std::uint64_t>(cfg.subjects[i])));
    std::string traces = trace_csv_header();
    for (const auto& tag : cfg.controllers) {
      std::optional<Trainer> policy;
      Controller ctl = lgs_controller();
      if (tag != "LGS") {
        policy.emplace(load_checkpoint(ckpts.at({tag, p.subject_id}), cfg));
        if (policy->mode() != controller_mode(tag)) {
          throw ConfigError(fmt::format("checkpoint for {} has mode {}", tag, to_string(policy->mode())));
        }
        ctl = drl_controller(policy->theta1(), policy->mode());
      }
      auto trace = rollout(ctl, p, scenario, cfg.train.test_days, cfg.train.reward);
      trace.subject_id = p.subject_id;
      append_trace_csv(traces, trace);
      const auto report = metrics(trace);
      out << fmt::format("{:<14} {:<7} TIR {:6.2f}  Hypo {:5.2f}  Hyper {:6.2f}  Mean {:6.1f}  RI {:6.2f}\n",
                         p.subject_id, tag, report.tir_pct, report.hypo_pct, report.hyper_pct, report.mean_bg,
                         report.risk_index);
      rows.push_back({p.subject_id, tag, report});
    }
    art.write(fs::path("traces") / (file_tag(p.subject_id) + ".csv"), traces);
  }
  art.write("reports.csv", reports_csv(rows));
  art.write_manifest();
  return kExitOk;
}

int cmd_compare(const ExperimentConfig& cfg, const CommandArgs& a, std::ostream& out) {
  Artifacts art(cfg, "compare");
  const auto path = require_file(cfg, a.reports, "reports.csv");
  art.input(a.reports.empty() ? fs::path("reports.csv") : path);
  const auto rows = load_reports_csv(path);

  auto reports_of = [&](const std::string& controller) {
    std::map<std::string, GlycemicReport> m;
    for (const auto& r : rows) {
      if (r.controller == controller) m[r.subject_id] = r.report;
    }
    return m;
  };
  const auto base = reports_of(cfg.baseline);
  std::string csv = comparison_csv_header();
  for (const auto& tag : cfg.controllers) {
    if (tag == cfg.baseline) continue;
    const auto other = reports_of(tag);
    std::vector<GlycemicReport> a_list, b_list;
    for (const auto& [subject, rep] : base) {
      auto it = other.find(subject);
      if (it == other.end()) throw UnpairedInput(fmt::format("{} has no {} report", subject, tag));
      a_list.push_back(rep);
      b_list.push_back(it->second);
    }
    if (other.size() != base.size()) throw UnpairedInput(fmt::format("{} has subjects missing from the baseline", tag));
    const auto cmp = compare(a_list, b_list);
    csv += comparison_csv(cfg.baseline, tag, cmp);
    for (const auto& m : cmp) {
      out << fmt::format("{} vs {}  {:<10} median {:8.2f} vs {:8.2f}  p = {:.4f}{}\n", cfg.baseline, tag, m.metric,
                         m.median_a, m.median_b, m.test.p_value,
                         m.significant_01 ? " **" : (m.significant_05 ? " *" : ""));
    }
  }
  art.write("comparison.csv", csv);
  art.write_manifest();
  return kExitOk;
}

int cmd_plot(const ExperimentConfig& cfg, std::ostream& out) {
  Artifacts art(cfg, "plot");
  const auto subjects = selected_subjects(cfg);
  Series<std::vector<CvgaPoint>> cvga;
  for (const auto& tag : cfg.controllers) cvga.emplace_back(tag, std::vector<CvgaPoint>{});

  for (const auto& p : subjects) {
    const auto rel = fs::path("traces") / (file_tag(p.subject_id) + ".csv");
    const auto path = require_file(cfg, {}, rel);
    art.input(rel);
    const auto traces = load_traces_csv(path);
    Series<std::vector<AgpSlot>> profiles;
    for (std::size_t k = 0; k < cfg.controllers.size(); ++k) {
      const auto& tag = cfg.controllers[k];
      auto it = std::find_if(traces.begin(), traces.end(), [&](const Trace& t) { return t.controller == tag; });
      if (it == traces.end()) throw MissingInput(fmt::format("{} has no {} trace", rel.generic_string(), tag));
      profiles.emplace_back(tag, agp(cgm_series(*it)));
      const auto pts = cvga_points(glucose_series(*it));
      cvga[k].second.insert(cvga[k].second.end(), pts.begin(), pts.end());
    }
    art.write(fs::path("figures") / ("agp_" + file_tag(p.subject_id) + ".svg"),
              agp_svg(profiles, fmt::format("Ambulatory glucose profile, {}", p.subject_id)));
  }
  art.write(fs::path("figures") / "cvga.svg", cvga_svg(cvga, "Control variability grid"));

  // Training curves from whichever generalized checkpoints exist.
  Series<std::vector<ProgressRow>> curves;
  for (auto mode : {HormoneMode::single_hormone, HormoneMode::dual_hormone}) {
    const auto rel = general_checkpoint_path(mode);
    if (!fs::exists(cfg.output_dir / rel)) continue;
    art.input(rel);
    curves.emplace_back(fmt::format("DRL-{}", to_string(mode)), Trainer::load(cfg.output_dir / rel).progress());
  }
  if (!curves.empty()) {
    art.write(fs::path("figures") / "training_general.svg",
              training_curve_svg(curves, "Generalized training, daily time in range"));
  }
  out << fmt::format("wrote {} AGP figure(s), CVGA and {} training curve(s)\n", subjects.size(), curves.size());
  art.write_manifest();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Glucose control with deep reinforcement learning on a virtual T1D cohort", "glucorl"};
  app.require_subcommand(1);
  CommandArgs a;

  auto add = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", a.config_file, "experiment config file (key = value)");
    sub->add_option("-s,--set", a.overrides, "override one config key, key=value (repeatable)");
    sub->add_option("-o,--out", a.output_dir, "output directory (overrides output_dir)");
    return sub;
  };
  auto* generate = add("generate", "write cohort parameters and scenarios");
  auto* train_general = add("train-general", "generalized training on the cohort-average subject");
  auto* train_personal = add("train-personal", "personalized training of each selected subject");
  train_personal->add_option("--checkpoint", a.checkpoint, "generalized checkpoint (default: from output dir)");
  auto* evaluate = add("evaluate", "test rollouts, traces and glycemic reports");
  auto* compare_cmd = add("compare", "paired signed-rank tests against the baseline");
  compare_cmd->add_option("--reports", a.reports, "reports CSV (default: from output dir)");
  auto* plot = add("plot", "AGP, CVGA and training-curve figures");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const auto cfg = resolve_config(a);
    if (generate->parsed()) return cmd_generate(cfg, out);
    if (train_general->parsed()) return cmd_train_general(cfg, out);
    if (train_personal->parsed()) return cmd_train_personal(cfg, a, out);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out);
    if (compare_cmd->parsed()) return cmd_compare(cfg, a, out);
    if (plot->parsed()) return cmd_plot(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const MissingInput& e) {
    err << "missing input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const FormatError& e) {
    err << "unreadable input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const UnpairedInput& e) {
    err << "unpaired input: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const TraceTooShort& e) {
    err << "input too short: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const NumericalBlowup& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NonFiniteGradient& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  } catch (const fs::filesystem_error& e) {
    err << "filesystem error: " << e.what() << '\n';
    return kExitMissingInput;
  }
  return kExitConfig;
}

}  // namespace glucorl
