#include "glucorl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "glucorl/errors.hpp"
#include "glucorl/kvfile.hpp"
#include "glucorl/scenario.hpp"

namespace glucorl {

double risk_transform(double g) { return 1.509 * (std::pow(std::log(g), 1.084) - 5.381); }

GlycemicReport metrics(std::span<const double> glucose) {
  if (glucose.empty()) throw EmptyTrace("no glucose samples");
  GlycemicReport r;
  r.samples = glucose.size();
  std::size_t in = 0, hypo = 0, hyper = 0;
  double sum = 0.0, low = 0.0, high = 0.0;
  for (double g : glucose) {
    if (!(g > 0.0) || !std::isfinite(g)) throw NumericalBlowup(fmt::format("invalid glucose sample {}", g));
    if (g < 70.0) {
      ++hypo;
    } else if (g > 180.0) {
      ++hyper;
    } else {
      ++in;
    }
    sum += g;
    const double f = risk_transform(g);
    if (f < 0.0) {
      low += 10.0 * f * f;
    } else {
      high += 10.0 * f * f;
    }
  }
  const double n = static_cast<double>(glucose.size());
  r.tir_pct = 100.0 * static_cast<double>(in) / n;
  r.hypo_pct = 100.0 * static_cast<double>(hypo) / n;
  r.hyper_pct = 100.0 * static_cast<double>(hyper) / n;
  r.mean_bg = sum / n;
  r.lbgi = low / n;
  r.hbgi = high / n;
  r.risk_index = r.lbgi + r.hbgi;
  return r;
}

std::vector<double> glucose_series(const Trace& trace) {
  std::vector<double> g;
  g.reserve(trace.records.size());
  for (const auto& r : trace.records) g.push_back(r.glucose);
  return g;
}

std::vector<double> cgm_series(const Trace& trace) {
  std::vector<double> g;
  g.reserve(trace.records.size());
  for (const auto& r : trace.records) g.push_back(r.cgm);
  return g;
}

GlycemicReport metrics(const Trace& trace) { return metrics(glucose_series(trace)); }

const char* to_string(CvgaZone z) {
  switch (z) {
    case CvgaZone::a:
      return "A";
    case CvgaZone::upper_b:
      return "Upper B";
    case CvgaZone::upper_c:
      return "Upper C";
    case CvgaZone::lower_b:
      return "Lower B";
    case CvgaZone::b:
      return "B";
    case CvgaZone::upper_d:
      return "Upper D";
    case CvgaZone::lower_c:
      return "Lower C";
    case CvgaZone::lower_d:
      return "Lower D";
    case CvgaZone::e:
      return "E";
  }
  return "?";
}

char zone_letter(CvgaZone z) {
  const char* s = to_string(z);
  return s[std::string_view(s).size() - 1];
}

CvgaZone cvga_zone(double day_min, double day_max) {
  static constexpr CvgaZone table[3][3] = {
      {CvgaZone::a, CvgaZone::upper_b, CvgaZone::upper_c},
      {CvgaZone::lower_b, CvgaZone::b, CvgaZone::upper_d},
      {CvgaZone::lower_c, CvgaZone::lower_d, CvgaZone::e},
  };
  const int row = day_min >= 90.0 ? 0 : (day_min >= 70.0 ? 1 : 2);
  const int col = day_max <= 180.0 ? 0 : (day_max <= 300.0 ? 1 : 2);
  return table[row][col];
}

std::vector<CvgaPoint> cvga_points(std::span<const double> glucose) {
  const std::size_t days = glucose.size() / kStepsPerDay;
  if (days == 0) throw TraceTooShort("CVGA needs at least one complete day");
  std::vector<CvgaPoint> pts;
  for (std::size_t d = 0; d < days; ++d) {
    const auto day = glucose.subspan(d * kStepsPerDay, kStepsPerDay);
    const auto [lo, hi] = std::minmax_element(day.begin(), day.end());
    CvgaPoint p;
    p.day = static_cast<int>(d);
    p.min_bg = *lo;
    p.max_bg = *hi;
    p.x = std::clamp(*lo, 50.0, 110.0);
    p.y = std::clamp(*hi, 110.0, 400.0);
    p.zone = cvga_zone(p.x, p.y);
    pts.push_back(p);
  }
  return pts;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EmptyTrace("quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<AgpSlot> agp(std::span<const double> cgm, int min_days) {
  const std::size_t days = cgm.size() / kStepsPerDay;
  if (days < static_cast<std::size_t>(std::max(min_days, 1))) {
    throw TraceTooShort(fmt::format("AGP needs {} complete days, trace has {}", std::max(min_days, 1), days));
  }
  std::vector<AgpSlot> slots(kStepsPerDay);
  std::vector<double> v(days);
  for (int s = 0; s < kStepsPerDay; ++s) {
    for (std::size_t d = 0; d < days; ++d) v[d] = cgm[d * kStepsPerDay + static_cast<std::size_t>(s)];
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(days);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    auto& slot = slots[static_cast<std::size_t>(s)];
    slot.mean = mean;
    slot.sd = days > 1 ? std::sqrt(ss / static_cast<double>(days - 1)) : 0.0;
    std::sort(v.begin(), v.end());
    slot.p025 = quantile_sorted(v, 0.025);
    slot.p975 = quantile_sorted(v, 0.975);
  }
  return slots;
}

SignedRankResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw UnpairedInput("paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  }
  SignedRankResult res;
  res.n_used = static_cast<int>(d.size());
  if (d.empty()) return res;

  // Average ranks of |d|, kept doubled so tied ranks stay integral.
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return std::abs(d[i]) < std::abs(d[j]); });
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long r2 = static_cast<long>(i + 1 + j + 1);  // twice the average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long w_plus2 = 0, total2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total2 += rank2[i];
    if (d[i] > 0) w_plus2 += rank2[i];
  }
  res.statistic = static_cast<double>(2 * w_plus2 - total2) / 2.0;

  if (n <= 20) {
    // Count sign assignments by doubled positive-rank sum.
    std::vector<double> ways(static_cast<std::size_t>(total2) + 1, 0.0);
    ways[0] = 1.0;
    long reach = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + rank2[i])] += ways[static_cast<std::size_t>(s)];
      reach += rank2[i];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double lower = 0.0, upper = 0.0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w_plus2) lower += ways[static_cast<std::size_t>(s)];
      if (s >= w_plus2) upper += ways[static_cast<std::size_t>(s)];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
    return res;
  }

  res.exact = false;
  const double nn = static_cast<double>(n);
  const double mu = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double w_plus = static_cast<double>(w_plus2) / 2.0;
  const double z = std::max(0.0, std::abs(w_plus - mu) - 0.5) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

namespace {

double metric_value(const GlycemicReport& r, std::string_view m) {
  if (m == "tir_pct") return r.tir_pct;
  if (m == "hypo_pct") return r.hypo_pct;
  if (m == "hyper_pct") return r.hyper_pct;
  if (m == "mean_bg") return r.mean_bg;
  return r.risk_index;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

}  // namespace

std::vector<MetricComparison> compare(const std::vector<GlycemicReport>& a, const std::vector<GlycemicReport>& b) {
  if (a.size() != b.size()) throw UnpairedInput(fmt::format("{} reports paired with {}", a.size(), b.size()));
  if (a.size() < 3) throw UnpairedInput("comparison needs at least 3 paired subjects");
  std::vector<MetricComparison> out;
  for (const char* m : kComparedMetrics) {
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
      va.push_back(metric_value(a[i], m));
      vb.push_back(metric_value(b[i], m));
    }
    MetricComparison c;
    c.metric = m;
    c.median_a = median(va);
    c.median_b = median(vb);
    c.test = wilcoxon_signed_rank(va, vb);
    c.significant_05 = c.test.p_value <= 0.05;
    c.significant_01 = c.test.p_value <= 0.01;
    out.push_back(c);
  }
  return out;
}

std::string reports_csv(const std::vector<LabelledReport>& rows) {
  std::string out = "subject_id,controller,samples,tir_pct,hypo_pct,hyper_pct,mean_bg,lbgi,hbgi,risk_index\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", row.subject_id, row.controller, r.samples, r.tir_pct,
                       r.hypo_pct, r.hyper_pct, r.mean_bg, r.lbgi, r.hbgi, r.risk_index);
  }
  return out;
}

std::vector<LabelledReport> load_reports_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw MissingInput("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line) || line + "\n" != reports_csv({})) {
    throw FormatError(path.string() + ": not a report CSV");
  }
  std::vector<LabelledReport> rows;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != 10) throw FormatError(path.string() + ": expected 10 columns");
    LabelledReport row{c[0], c[1], {}};
    row.report.samples = static_cast<std::size_t>(parse_uint(c[2]));
    row.report.tir_pct = parse_double(c[3]);
    row.report.hypo_pct = parse_double(c[4]);
    row.report.hyper_pct = parse_double(c[5]);
    row.report.mean_bg = parse_double(c[6]);
    row.report.lbgi = parse_double(c[7]);
    row.report.hbgi = parse_double(c[8]);
    row.report.risk_index = parse_double(c[9]);
    rows.push_back(row);
  }
  return rows;
}

std::string comparison_csv_header() {
  return "controller_a,controller_b,metric,n,median_a,median_b,statistic,p_value,exact,significant_05,"
         "significant_01\n";
}

std::string comparison_csv(const std::string& controller_a, const std::string& controller_b,
                           const std::vector<MetricComparison>& rows) {
  std::string out;
  for (const auto& c : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", controller_a, controller_b, c.metric, c.test.n_used,
                       c.median_a, c.median_b, c.test.statistic, c.test.p_value, c.test.exact ? 1 : 0,
                       c.significant_05 ? 1 : 0, c.significant_01 ? 1 : 0);
  }
  return out;
}

}  // namespace glucorl
