// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any selected criterion fails.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "glucorl/cli.hpp"
#include "glucorl/errors.hpp"
#include "glucorl/eval.hpp"
#include "glucorl/qnet.hpp"
#include "glucorl/replay.hpp"
#include "glucorl/reward.hpp"
#include "glucorl/rl_core.hpp"
#include "glucorl/training.hpp"

using namespace glucorl;
namespace fs = std::filesystem;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

struct Options {
  fs::path work = fs::temp_directory_path() / "glucorl_acceptance";
  int e2e_subjects = 3;
};

Options g_opt;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double chi_square_upper(double stat, double dof) { return boost::math::gamma_q(dof / 2.0, stat / 2.0); }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int rc = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return rc;
}

// 1 ---------------------------------------------------------------------------

Result reward_exactness() {
  const std::pair<double, double> cases[] = {
      {25, -1.0},  {30, -1.0}, {50, -0.8}, {70, 0.1},   {75, 0.1},   {90, 1.0},   {100, 1.0},
      {140, 1.0}, {150, 0.1}, {180, 0.1}, {200, -0.5}, {250, -0.75}, {300, -1.0}, {301, -1.0},
  };
  double worst = 0.0;
  std::string bad;
  for (const auto& [g, expect] : cases) {
    const double err = std::abs(compute_reward(g, RewardScheme::s4) - expect);
    if (err > 1e-9) bad += fmt::format(" G={}", g);
    worst = std::max(worst, err);
  }
  return {bad.empty(), fmt::format("14 glucose levels, max |error| {:.1e}{}", worst, bad)};
}

// 2 ---------------------------------------------------------------------------

Result gradient_check() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  const int cases = 100;
  for (int c = 0; c < cases; ++c) {
    QNetConfig cfg;
    std::uniform_int_distribution<int> depth(1, 3), hidden(2, 6), batch_size(1, 4);
    const int layers = depth(rng);
    cfg.layers.clear();
    for (int l = 0; l < layers; ++l) cfg.layers.push_back({1 << l, hidden(rng)});
    auto w = QNetWeights::random(cfg, rng());

    const int batch = batch_size(rng);
    std::uniform_real_distribution<double> g(40.0, 350.0), m(0.0, 80.0), ins(0.0, 5.0), tgt(-2.0, 2.0),
        iw(0.2, 1.0);
    std::uniform_int_distribution<int> act(0, cfg.output_dim - 1);
    std::vector<Observation> obs(batch, Observation(cfg.window));
    std::vector<const Observation*> ptrs;
    std::vector<int> a;
    std::vector<double> y, wts;
    for (auto& o : obs) {
      for (int t = 0; t < cfg.window; ++t) {
        o.at(t, 0) = g(rng);
        o.at(t, 1) = m(rng);
        o.at(t, 2) = ins(rng);
      }
      ptrs.push_back(&o);
      a.push_back(act(rng));
      y.push_back(tgt(rng));
      wts.push_back(iw(rng));
    }
    const double l2 = c % 2 ? 1e-3 : 0.0;
    const auto loss = [&] {
      const Eigen::MatrixXd q = forward_batch(w, ptrs);
      double s = 0.0;
      for (int i = 0; i < batch; ++i) {
        const double r = y[i] - q(a[i], i);
        s += wts[i] * r * r;
      }
      return s / batch + l2 * w.params().squaredNorm();
    };
    const auto lg = backward(w, ptrs, a, y, wts, l2);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < w.params().size(); ++k) {
      const double orig = w.params()[k];
      w.params()[k] = orig + h;
      const double up = loss();
      w.params()[k] = orig - h;
      const double down = loss();
      w.params()[k] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double an = lg.gradient[k];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
    }
  }
  return {worst < 1e-4, fmt::format("{} random dilated networks, max relative error {:.2e}", cases, worst)};
}

// 3 ---------------------------------------------------------------------------

Result tabular_oracle() {
  constexpr int S = 4, A = 2;
  const double gamma = 0.9;
  const double reward[S][A] = {{0.0, 1.0}, {0.5, -0.5}, {-1.0, 2.0}, {0.2, 0.0}};
  const int next[S][A] = {{1, 2}, {3, 0}, {0, 3}, {2, 1}};

  Eigen::MatrixXd star = Eigen::MatrixXd::Zero(S, A);
  for (int it = 0; it < 2000; ++it) {
    Eigen::MatrixXd nv(S, A);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) nv(s, a) = reward[s][a] + gamma * star.row(next[s][a]).maxCoeff();
    }
    star = nv;
  }

  Eigen::MatrixXd q1 = Eigen::MatrixXd::Zero(S, A), q2 = q1;
  Eigen::MatrixXi visits = Eigen::MatrixXi::Zero(S, A);
  const auto online = [&](int s) -> Eigen::VectorXd { return q1.row(s).transpose(); };
  const auto target = [&](int s) -> Eigen::VectorXd { return q2.row(s).transpose(); };
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ps(0, S - 1), pa(0, A - 1);
  const int steps = 100000;
  for (int step = 1; step <= steps; ++step) {
    const int s = ps(rng), a = pa(rng);
    const double y = td_target_1step(reward[s][a], next[s][a], false, online, target, gamma);
    q1(s, a) += 50.0 / (50.0 + ++visits(s, a)) * (y - q1(s, a));
    if (step % 100 == 0) q2 = q1;
  }
  const double err = (q1 - star).cwiseAbs().maxCoeff();
  return {err < 1e-2, fmt::format("{} updates, max |Q - Q*| {:.2e}", steps, err)};
}

// 4 ---------------------------------------------------------------------------

Transition blank_transition(int i) {
  Transition t;
  t.o = Observation(kDefaultWindow);
  t.o_next = Observation(kDefaultWindow);
  t.r = i;
  return t;
}

Result replay_distribution() {
  const std::size_t n = 64;
  const int draws = 100000, batch = 32;
  std::mt19937_64 rng(64);

  auto fill = [&](double alpha) {
    ReplayMemory mem(ReplayConfig{n, alpha, 1e-3});
    std::vector<std::size_t> idx;
    std::vector<double> err;
    std::exponential_distribution<double> ed(0.5);
    for (std::size_t i = 0; i < n; ++i) {
      mem.push(blank_transition(static_cast<int>(i)));
      idx.push_back(i);
      err.push_back(ed(rng));
    }
    mem.update_priorities(idx, err);
    return mem;
  };
  auto count = [&](const ReplayMemory& mem) {
    std::vector<double> c(n, 0.0);
    for (int k = 0; k < draws / batch; ++k) {
      for (auto i : mem.sample(batch, 0.4, rng).indices) c[i] += 1.0;
    }
    return c;
  };

  const auto mem = fill(0.3);
  const auto counts = count(mem);
  double stat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = draws * mem.probability(i);
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  const double p = chi_square_upper(stat, static_cast<double>(n - 1));

  const auto flat = fill(0.0);
  const auto flat_counts = count(flat);
  double prob_dev = 0.0, freq_dev = 0.0, flat_stat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    prob_dev = std::max(prob_dev, std::abs(flat.probability(i) * n - 1.0));
    freq_dev = std::max(freq_dev, std::abs(flat_counts[i] / draws - 1.0 / n));
    const double e = static_cast<double>(draws) / n;
    flat_stat += (flat_counts[i] - e) * (flat_counts[i] - e) / e;
  }
  const double flat_p = chi_square_upper(flat_stat, static_cast<double>(n - 1));
  const bool ok = p > 0.01 && prob_dev < 0.01 && freq_dev < 0.01 && flat_p > 0.01;
  return {ok, fmt::format("alpha=0.3: chi2 {:.1f} on {} dof, p {:.3f}; alpha=0: max rel prob dev {:.1e}, "
                          "max freq dev {:.2f} pp, p {:.3f}",
                          stat, n - 1, p, prob_dev, 100.0 * freq_dev, flat_p)};
}

// 5 ---------------------------------------------------------------------------

Result safety_invariants() {
  const auto cohort = make_cohort(Cohort::adult, 3);
  const SafetyConstraints gate;
  long steps = 0, basal_low = 0, glucagon_high = 0, glucagon_steps = 0;
  double worst_day = 0.0;
  for (std::size_t s = 0; s < cohort.size(); ++s) {
    const auto& p = cohort[s];
    EnvOptions opts;
    opts.space = ActionSpace::dual();
    GlucoseEnv env(p, generate_scenario(p, 90, 500 + s), opts);
    std::mt19937_64 rng(900 + s);
    // Glucagon requested half the time so the cap and the gate are both exercised.
    std::bernoulli_distribution want_glucagon(0.5);
    std::uniform_int_distribution<int> basal(0, 4);
    std::map<std::int64_t, double> per_day;
    for (int k = 0; k < 90 * kStepsPerDay; ++k) {
      const int a = want_glucagon(rng) ? ActionSpace::kGlucagon : basal(rng);
      const auto out = env.step(a, &gate);
      ++steps;
      if (out.cgm_before < gate.insulin_suspend_below && out.basal_u_per_h > 0.0) ++basal_low;
      if (out.cgm_before > gate.glucagon_suspend_above && out.glucagon_mg > 0.0) ++glucagon_high;
      if (out.glucagon_mg > 0.0) ++glucagon_steps;
      per_day[out.t_min / kMinutesPerDay] += out.glucagon_mg;
    }
    for (const auto& [day, mg] : per_day) worst_day = std::max(worst_day, mg);
  }
  const bool ok = basal_low == 0 && glucagon_high == 0 && worst_day <= 1.0 + 1e-12 && glucagon_steps > 0;
  return {ok, fmt::format("{} fuzzed steps over 3 subjects: {} basal below 80, {} glucagon above 160, "
                          "max daily glucagon {:.3f} mg ({} glucagon steps)",
                          steps, basal_low, glucagon_high, worst_day, glucagon_steps)};
}

// 6 ---------------------------------------------------------------------------

Result simulator_sanity() {
  const auto avg = average_subject(Cohort::adult);
  SimOptions quiet_opts;
  quiet_opts.cgm_noise = false;
  VirtualPatient fasting(avg, Scenario::quiet(1), quiet_opts);
  const double g0 = fasting.plasma_glucose();
  double drift = 0.0;
  for (int k = 0; k < kStepsPerDay; ++k) {
    fasting.step(Dose{avg.basal_rate, 0.0, 0.0});
    drift = std::max(drift, std::abs(fasting.plasma_glucose() - g0));
  }

  // Open-loop day with meals and boluses, integrated at two substep sizes.
  const auto scenario = generate_scenario(avg, 2, 77);
  auto run = [&](double substep) {
    SimOptions o;
    o.cgm_noise = false;
    o.substep_min = substep;
    VirtualPatient vp(avg, scenario, o);
    std::vector<double> g;
    for (int k = 0; k < 2 * kStepsPerDay; ++k) {
      const auto* meal = scenario.meal_starting_at(static_cast<std::int64_t>(k) * kStepMinutes);
      const double bolus = meal ? meal->announced_carbs / avg.icr : 0.0;
      vp.step(Dose{avg.basal_rate, bolus, 0.0});
      g.push_back(vp.plasma_glucose());
    }
    return g;
  };
  const auto full = run(kDefaultSubstepMin), half = run(kDefaultSubstepMin / 2);
  double sup = 0.0;
  for (std::size_t i = 0; i < full.size(); ++i) sup = std::max(sup, std::abs(full[i] - half[i]));
  return {drift < 5.0 && sup < 0.5,
          fmt::format("fasting 24 h drift {:.3f} mg/dL; substep halving sup-norm {:.2e} mg/dL over 2 days", drift,
                      sup)};
}

// 7 ---------------------------------------------------------------------------

Result end_to_end() {
  const auto dir = g_opt.work / "e2e";
  fs::remove_all(dir);
  const std::string subjects = fmt::format("subjects=0-{}", g_opt.e2e_subjects - 1);
  const std::vector<std::string> common{"--set", subjects, "--set", "generalized_days=200", "-o", dir.string()};
  auto with = [&](std::vector<std::string> head, std::vector<std::string> extra = {}) {
    head.insert(head.end(), common.begin(), common.end());
    head.insert(head.end(), extra.begin(), extra.end());
    return head;
  };
  for (const char* mode : {"SH", "DH"}) {
    const std::vector<std::string> m{"--set", fmt::format("mode={}", mode)};
    std::string err;
    if (int rc = cli(with({"train-general"}, m), &err); rc) return {false, "train-general failed: " + err};
    if (int rc = cli(with({"train-personal"}, m), &err); rc) return {false, "train-personal failed: " + err};
  }
  std::string err;
  if (int rc = cli(with({"evaluate"}), &err); rc) return {false, "evaluate failed: " + err};
  cli(with({"compare"}));

  std::map<std::string, std::vector<double>> tir, hypo;
  for (const auto& r : load_reports_csv(dir / "reports.csv")) {
    tir[r.controller].push_back(r.report.tir_pct);
    hypo[r.controller].push_back(r.report.hypo_pct);
  }
  const double lgs_tir = median(tir["LGS"]), sh_tir = median(tir["DRL-SH"]);
  const double lgs_hypo = median(hypo["LGS"]), dh_hypo = median(hypo["DRL-DH"]);
  const bool ok = sh_tir >= lgs_tir && dh_hypo <= lgs_hypo;
  return {ok, fmt::format("{} adults, 90-day tests: median TIR DRL-SH {:.2f} vs LGS {:.2f}; "
                          "median Hypo DRL-DH {:.2f} vs LGS {:.2f}",
                          g_opt.e2e_subjects, sh_tir, lgs_tir, dh_hypo, lgs_hypo)};
}

// 8 ---------------------------------------------------------------------------

Result metric_oracles() {
  std::vector<std::string> bad;
  const std::vector<double> four{60, 100, 200, 100};
  const auto m = metrics(four);
  if (m.tir_pct != 50.0 || m.hypo_pct != 25.0 || m.hyper_pct != 25.0 || m.mean_bg != 115.0) bad.push_back("metrics");

  // Day 1: flat 95 with one reading of 160 -> (95, 160), zone A.
  // Day 2: flat 100 with readings 65 and 320 -> (65, 320), zone E.
  std::vector<double> two_days(2 * kStepsPerDay, 95.0);
  two_days[100] = 160.0;
  std::fill(two_days.begin() + kStepsPerDay, two_days.end(), 100.0);
  two_days[kStepsPerDay + 10] = 65.0;
  two_days[kStepsPerDay + 20] = 320.0;
  const auto pts = cvga_points(two_days);
  if (pts.size() != 2 || pts[0].x != 95.0 || pts[0].y != 160.0 || pts[0].zone != CvgaZone::a || pts[1].x != 65.0 ||
      pts[1].y != 320.0 || pts[1].zone != CvgaZone::e) {
    bad.push_back("cvga");
  }

  // AGP: slot values v on day 1 and v + 2 on day 2.
  std::vector<double> cgm(2 * kStepsPerDay);
  for (int k = 0; k < kStepsPerDay; ++k) {
    cgm[k] = 100.0 + k * 0.25;
    cgm[kStepsPerDay + k] = cgm[k] + 2.0;
  }
  const auto slots = agp(cgm, 2);
  bool agp_ok = slots.size() == static_cast<std::size_t>(kStepsPerDay);
  for (int k = 0; agp_ok && k < kStepsPerDay; ++k) {
    agp_ok = std::abs(slots[k].mean - (cgm[k] + 1.0)) < 1e-12 && std::abs(slots[k].sd - std::sqrt(2.0)) < 1e-12;
  }
  if (!agp_ok) bad.push_back("agp");

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> g(20.0, 450.0);
  std::uniform_int_distribution<int> len(1, 2000);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(len(rng));
    for (auto& x : v) x = g(rng);
    const auto r = metrics(v);
    worst = std::max(worst, std::abs(r.tir_pct + r.hypo_pct + r.hyper_pct - 100.0));
  }
  if (worst > 1e-9) bad.push_back("partition");
  std::string which;
  for (const auto& b : bad) which += " " + b;
  return {bad.empty(), fmt::format("4-sample metrics, 2-day CVGA and AGP exact; partition max |sum - 100| {:.1e}{}",
                                   worst, bad.empty() ? "" : "; failed:" + which)};
}

// 9 ---------------------------------------------------------------------------

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return files;
}

Result determinism() {
  const std::vector<std::vector<std::string>> commands{
      {"generate"},
      {"train-general", "--set", "mode=SH"},
      {"train-general", "--set", "mode=DH"},
      {"train-personal", "--set", "mode=SH"},
      {"train-personal", "--set", "mode=DH"},
      {"evaluate"},
      {"compare"},
      {"plot"},
  };
  const std::vector<std::string> common{"--set", "subjects=0-2",        "--set", "generalized_days=8",
                                        "--set", "personalized_days=1", "--set", "test_days=7"};
  std::map<std::string, std::string> runs[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = g_opt.work / fmt::format("determinism_{}", run);
    fs::remove_all(dir);
    for (auto args : commands) {
      args.insert(args.end(), common.begin(), common.end());
      args.insert(args.end(), {"-o", dir.string()});
      std::string err;
      if (int rc = cli(args, &err); rc) return {false, fmt::format("{} exited {}: {}", args[0], rc, err)};
    }
    runs[run] = tree(dir);
  }
  std::size_t differing = 0;
  for (const auto& [name, bytes] : runs[0]) {
    auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differing;
  }
  if (runs[0].size() != runs[1].size()) ++differing;

  const auto bad_dir = g_opt.work / "determinism_bad_key";
  fs::remove_all(bad_dir);
  const int rc = cli({"generate", "--set", "no_such_key=1", "-o", bad_dir.string()});
  const bool nothing_written = !fs::exists(bad_dir);

  const bool ok = differing == 0 && !runs[0].empty() && rc == kExitConfig && nothing_written;
  return {ok, fmt::format("{} commands run twice: {} files, {} differ; unknown key -> exit {}, {}", commands.size(),
                          runs[0].size(), differing, rc, nothing_written ? "no output" : "output written")};
}

// 10 --------------------------------------------------------------------------

template <typename T>
std::string bytes_of(const T& obj) {
  std::ostringstream os;
  BinaryWriter w(os);
  obj.save(w);
  return os.str();
}

template <typename T>
T reload(const std::string& bytes) {
  std::istringstream is(bytes);
  BinaryReader r(is);
  return T::load(r);
}

Result checkpoint_fidelity() {
  TrainConfig cfg;
  cfg.generalized_days = 8;
  cfg.personalized_days = 1;
  auto general = Trainer::generalized(cfg, HormoneMode::dual_hormone, Cohort::adult);
  general.run();
  const auto subject = make_cohort(Cohort::adult, 1).front();

  const auto w1 = bytes_of(general.theta1());
  const bool weights_ok = bytes_of(reload<QNetWeights>(w1)) == w1;
  const auto m1 = bytes_of(general.memory());
  const bool memory_ok = bytes_of(reload<ReplayMemory>(m1)) == m1 && general.memory().size() > 0;

  auto straight = Trainer::personalized(general, subject, 0);
  for (int k = 0; k < 50; ++k) straight.step();
  const auto snapshot = bytes_of(straight);
  auto resumed = reload<Trainer>(snapshot);
  const bool trainer_ok = bytes_of(resumed) == snapshot;

  int matching = 0;
  for (int k = 0; k < 100; ++k) {
    straight.step();
    resumed.step();
    const auto& a = straight.last_outcome();
    const auto& b = resumed.last_outcome();
    const bool same = a.action == b.action && a.cgm == b.cgm && a.plasma_glucose == b.plasma_glucose &&
                      a.reward == b.reward && straight.theta1() == resumed.theta1() &&
                      straight.memory() == resumed.memory();
    if (!same) break;
    ++matching;
  }
  const bool final_ok = bytes_of(straight) == bytes_of(resumed);
  const bool ok = weights_ok && memory_ok && trainer_ok && matching == 100 && final_ok;
  return {ok, fmt::format("weights {}, replay memory ({} items) {}, trainer {}; resumed run matched {}/100 steps{}",
                          weights_ok ? "bit-exact" : "differ", general.memory().size(),
                          memory_ok ? "bit-exact" : "differ", trainer_ok ? "bit-exact" : "differ", matching,
                          final_ok ? ", final state identical" : ", final state differs")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Result()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "reward exactness", reward_exactness},
      {2, "gradient correctness", gradient_check},
      {3, "tabular oracle", tabular_oracle},
      {4, "replay distribution", replay_distribution},
      {5, "safety invariants", safety_invariants},
      {6, "simulator sanity", simulator_sanity},
      {7, "directional end-to-end", end_to_end},
      {8, "metric oracles", metric_oracles},
      {9, "determinism", determinism},
      {10, "checkpoint fidelity", checkpoint_fidelity},
  };

  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, skip;
  std::string work;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--skip", skip, "criteria to skip")->delimiter(',');
  app.add_option("--work", work, "scratch directory for CLI runs");
  app.add_option("--e2e-subjects", g_opt.e2e_subjects, "adult subjects in the end-to-end check")
      ->check(CLI::Range(3, 10));
  CLI11_PARSE(app, argc, argv);
  if (!work.empty()) g_opt.work = work;
  fs::create_directories(g_opt.work);

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    if (std::find(skip.begin(), skip.end(), c.id) != skip.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << fmt::format("[{}] AC{:<2} {:<24} {} ({:.1f} s)\n", r.pass ? "PASS" : "FAIL", c.id, c.name, r.detail,
                             secs)
              << std::flush;
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
