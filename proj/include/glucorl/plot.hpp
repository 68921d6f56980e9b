#pragma once

// Static SVG figures. Series are coloured in order blue, orange, green, which
// by convention is LGS, DRL-SH, DRL-DH.

#include <string>
#include <utility>
#include <vector>

#include "glucorl/eval.hpp"
#include "glucorl/training.hpp"

namespace glucorl {

template <typename T>
using Series = std::vector<std::pair<std::string, T>>;

const char* series_color(std::size_t index);

// One stacked panel per series: mean line, SD band, 2.5-97.5 percentile band
// and the 70 / 180 mg/dL thresholds.
std::string agp_svg(const Series<std::vector<AgpSlot>>& series, const std::string& title);

// Zone grid with one dot per day and series.
std::string cvga_svg(const Series<std::vector<CvgaPoint>>& series, const std::string& title);

// Daily running TIR over training.
std::string training_curve_svg(const Series<std::vector<ProgressRow>>& series, const std::string& title);

}  // namespace glucorl
