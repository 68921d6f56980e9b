#pragma once

// Glycemic outcome metrics, CVGA zoning, ambulatory glucose profiles and a
// paired signed-rank comparison between controllers.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "glucorl/trace.hpp"

namespace glucorl {

struct GlycemicReport {
  std::size_t samples = 0;
  double tir_pct = 0.0;    // 70 <= G <= 180
  double hypo_pct = 0.0;   // G < 70
  double hyper_pct = 0.0;  // G > 180
  double mean_bg = 0.0;
  double lbgi = 0.0;
  double hbgi = 0.0;
  double risk_index = 0.0;  // lbgi + hbgi
};

// Kovatchev symmetrising transform f(G) = 1.509 ((ln G)^1.084 - 5.381).
double risk_transform(double g);

// Throws EmptyTrace for an empty series.
GlycemicReport metrics(std::span<const double> glucose);
// Uses the plasma glucose column.
GlycemicReport metrics(const Trace& trace);

std::vector<double> glucose_series(const Trace& trace);
std::vector<double> cgm_series(const Trace& trace);

// CVGA zones. Rows split the daily minimum at 90 and 70 mg/dL, columns split
// the daily maximum at 180 and 300 mg/dL:
//
//                 max <= 180   180 < max <= 300   max > 300
//   min >= 90     A            upper B            upper C
//   70 <= min<90  lower B      B                  upper D
//   min < 70      lower C      lower D            E
enum class CvgaZone { a, upper_b, upper_c, lower_b, b, upper_d, lower_c, lower_d, e };

const char* to_string(CvgaZone z);
// Zone letter only: A, B, C, D or E.
char zone_letter(CvgaZone z);
CvgaZone cvga_zone(double day_min, double day_max);

struct CvgaPoint {
  int day = 0;
  double min_bg = 0.0;
  double max_bg = 0.0;
  double x = 0.0;  // min clamped to [50, 110]
  double y = 0.0;  // max clamped to [110, 400]
  CvgaZone zone = CvgaZone::a;
};

// One point per complete day of 5-minute samples. Throws TraceTooShort with
// less than one day.
std::vector<CvgaPoint> cvga_points(std::span<const double> glucose);

struct AgpSlot {
  double mean = 0.0;
  double sd = 0.0;     // sample standard deviation across days
  double p025 = 0.0;   // 2.5th percentile
  double p975 = 0.0;   // 97.5th percentile
};

// 288 time-of-day slots over the complete days of a CGM series. Throws
// TraceTooShort with fewer than `min_days` complete days.
std::vector<AgpSlot> agp(std::span<const double> cgm, int min_days = 7);

// Linear-interpolation quantile of sorted data, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

struct SignedRankResult {
  double statistic = 0.0;  // W+ - W-
  double p_value = 1.0;    // two-sided
  int n_used = 0;          // pairs with non-zero difference
  bool exact = true;
};

// Wilcoxon signed-rank test on differences a_i - b_i. Zero differences are
// dropped; ties share average ranks. Exact for up to 20 non-zero pairs,
// normal approximation with tie and continuity correction above.
SignedRankResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct MetricComparison {
  std::string metric;
  double median_a = 0.0;
  double median_b = 0.0;
  SignedRankResult test;
  bool significant_05 = false;
  bool significant_01 = false;
};

// Compares TIR, Hypo, Hyper, Mean and RI pairwise by subject. Throws
// UnpairedInput if the lists differ in length or hold fewer than 3 pairs.
std::vector<MetricComparison> compare(const std::vector<GlycemicReport>& a, const std::vector<GlycemicReport>& b);

inline constexpr std::array<const char*, 5> kComparedMetrics{"tir_pct", "hypo_pct", "hyper_pct", "mean_bg",
                                                             "risk_index"};

// CSV ------------------------------------------------------------------------

struct LabelledReport {
  std::string subject_id;
  std::string controller;
  GlycemicReport report;
};

// Columns: subject_id,controller,samples,tir_pct,hypo_pct,hyper_pct,mean_bg,
// lbgi,hbgi,risk_index
std::string reports_csv(const std::vector<LabelledReport>& rows);
std::vector<LabelledReport> load_reports_csv(const std::filesystem::path& path);

// Columns: controller_a,controller_b,metric,n,median_a,median_b,statistic,
// p_value,exact,significant_05,significant_01. Rows only; the header is
// separate so several pairings can share one file.
std::string comparison_csv_header();
std::string comparison_csv(const std::string& controller_a, const std::string& controller_b,
                           const std::vector<MetricComparison>& rows);

}  // namespace glucorl
