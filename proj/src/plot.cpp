#include "glucorl/plot.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace glucorl {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string header(double w, double h, const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
      w, h, w, h, w / 2.0, escape(title));
}

// Maps data coordinates into a pixel rectangle.
struct Frame {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

std::string axes(const Frame& f, const std::vector<double>& xticks, const std::vector<double>& yticks,
                 const std::string& xlabel, const std::string& ylabel) {
  std::string s = fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                              "stroke=\"black\"/>\n",
                              f.left, f.top, f.width, f.height);
  for (double t : xticks) {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"black\"/>"
                     "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4}</text>\n",
                     f.px(t), f.top + f.height, f.top + f.height + 5, f.top + f.height + 18, t);
  }
  for (double t : yticks) {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"black\"/>"
                     "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5}</text>\n",
                     f.left - 5, f.py(t), f.left, f.left - 8, f.py(t) + 4, t);
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", f.left + f.width / 2,
                   f.top + f.height + 34, escape(xlabel));
  s += fmt::format("<text x=\"{0:.2f}\" y=\"{1:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 {0:.2f} {1:.2f})\">"
                   "{2}</text>\n",
                   f.left - 42, f.top + f.height / 2, escape(ylabel));
  return s;
}

std::string polyline(const std::vector<std::pair<double, double>>& pts, const char* color, double width,
                     const char* dash = nullptr) {
  std::string s = "<polyline fill=\"none\" stroke=\"";
  s += color;
  s += fmt::format("\" stroke-width=\"{}\"", width);
  if (dash) s += fmt::format(" stroke-dasharray=\"{}\"", dash);
  s += " points=\"";
  for (const auto& [x, y] : pts) s += fmt::format("{:.2f},{:.2f} ", x, y);
  s += "\"/>\n";
  return s;
}

std::string band(const std::vector<std::pair<double, double>>& upper, const std::vector<std::pair<double, double>>& lower,
                 const char* color, double opacity) {
  std::string s = fmt::format("<polygon fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\" points=\"", color, opacity);
  for (const auto& [x, y] : upper) s += fmt::format("{:.2f},{:.2f} ", x, y);
  for (auto it = lower.rbegin(); it != lower.rend(); ++it) s += fmt::format("{:.2f},{:.2f} ", it->first, it->second);
  s += "\"/>\n";
  return s;
}

}  // namespace

const char* series_color(std::size_t index) { return kPalette[index % std::size(kPalette)]; }

std::string agp_svg(const Series<std::vector<AgpSlot>>& series, const std::string& title) {
  const double panel_h = 200, gap = 60, width = 760;
  const double height = 40 + static_cast<double>(series.size()) * (panel_h + gap);
  std::string s = header(width, height, title);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& [name, slots] = series[k];
    Frame f{70, 40 + static_cast<double>(k) * (panel_h + gap), 660, panel_h, 0, 24, 0, 400};
    s += axes(f, {0, 4, 8, 12, 16, 20, 24}, {0, 70, 180, 300, 400}, "time of day (h)", "glucose (mg/dL)");
    std::vector<std::pair<double, double>> mean, sd_hi, sd_lo, p_hi, p_lo;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const double x = f.px(static_cast<double>(i) * 24.0 / static_cast<double>(slots.size()));
      const auto clip = [](double v) { return std::clamp(v, 0.0, 400.0); };
      mean.emplace_back(x, f.py(clip(slots[i].mean)));
      sd_hi.emplace_back(x, f.py(clip(slots[i].mean + slots[i].sd)));
      sd_lo.emplace_back(x, f.py(clip(slots[i].mean - slots[i].sd)));
      p_hi.emplace_back(x, f.py(clip(slots[i].p975)));
      p_lo.emplace_back(x, f.py(clip(slots[i].p025)));
    }
    s += band(p_hi, p_lo, "#1f77b4", 0.2);
    s += band(sd_hi, sd_lo, "#9467bd", 0.35);
    s += polyline({{f.px(0), f.py(70)}, {f.px(24), f.py(70)}}, "green", 1.2, "4 3");
    s += polyline({{f.px(0), f.py(180)}, {f.px(24), f.py(180)}}, "red", 1.2, "4 3");
    s += polyline(mean, series_color(k), 2.0);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-weight=\"bold\" fill=\"{}\">{}</text>\n", f.left + 8,
                     f.top + 16, series_color(k), escape(name));
  }
  s += "</svg>\n";
  return s;
}

std::string cvga_svg(const Series<std::vector<CvgaPoint>>& series, const std::string& title) {
  const double width = 560, height = 560;
  std::string s = header(width, height, title);
  // Reversed x axis: 110 mg/dL on the left, 50 on the right.
  Frame f{80, 50, 420, 420, 110, 50, 110, 400};
  struct Cell {
    double x_lo, x_hi, y_lo, y_hi;
    const char* fill;
    const char* label;
  };
  const Cell cells[] = {
      {110, 90, 110, 180, "#2ca02c", "A"},      {110, 90, 180, 300, "#98df8a", "Upper B"},
      {110, 90, 300, 400, "#ffdd71", "Upper C"}, {90, 70, 110, 180, "#98df8a", "Lower B"},
      {90, 70, 180, 300, "#98df8a", "B"},        {90, 70, 300, 400, "#ff9896", "Upper D"},
      {70, 50, 110, 180, "#ffdd71", "Lower C"},  {70, 50, 180, 300, "#ff9896", "Lower D"},
      {70, 50, 300, 400, "#d62728", "E"},
  };
  for (const auto& c : cells) {
    const double x = f.px(c.x_lo), y = f.py(c.y_hi);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
                     "fill-opacity=\"0.35\" stroke=\"#666\"/>\n",
                     x, y, f.px(c.x_hi) - x, f.py(c.y_lo) - y, c.fill);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" fill=\"#444\">{}</text>\n",
                     (f.px(c.x_lo) + f.px(c.x_hi)) / 2, f.py(c.y_hi) + 16, c.label);
  }
  s += axes(f, {110, 90, 70, 50}, {110, 180, 300, 400}, "daily minimum glucose (mg/dL)",
            "daily maximum glucose (mg/dL)");
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (const auto& p : series[k].second) {
      s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.8\"/>\n", f.px(p.x),
                       f.py(p.y), series_color(k));
    }
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"5\" fill=\"{}\"/><text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n",
                     f.left + 10 + 130.0 * static_cast<double>(k), height - 30, series_color(k),
                     f.left + 20 + 130.0 * static_cast<double>(k), height - 26, escape(series[k].first));
  }
  s += "</svg>\n";
  return s;
}

std::string training_curve_svg(const Series<std::vector<ProgressRow>>& series, const std::string& title) {
  const double width = 760, height = 420;
  double max_day = 1;
  for (const auto& [_, rows] : series) {
    if (!rows.empty()) max_day = std::max(max_day, static_cast<double>(rows.back().step) / kStepsPerDay);
  }
  std::string s = header(width, height, title);
  Frame f{70, 40, 660, 300, 0, max_day, 0, 100};
  std::vector<double> xt;
  const double step = std::max(1.0, std::ceil(max_day / 10.0));
  for (double d = 0; d <= max_day + 1e-9; d += step) xt.push_back(d);
  s += axes(f, xt, {0, 20, 40, 60, 80, 100}, "training day", "TIR (%)");
  for (std::size_t k = 0; k < series.size(); ++k) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : series[k].second) {
      pts.emplace_back(f.px(static_cast<double>(r.step) / kStepsPerDay), f.py(r.running_tir));
    }
    s += polyline(pts, series_color(k), 1.8);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" fill=\"{}\">{}</text>\n", f.left + 10 + 150.0 * static_cast<double>(k),
                     height - 20, series_color(k), escape(series[k].first));
  }
  s += "</svg>\n";
  return s;
}

}  // namespace glucorl
