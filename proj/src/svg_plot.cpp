#include "botda/svg_plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "botda/errors.hpp"

namespace botda {

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 80, kRight = 170, kTop = 40, kBottom = 60;
constexpr std::array<const char*, 8> kColors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                             "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-300) {
      const double pad = std::max(std::abs(lo) * 0.05, 1e-12);
      lo -= pad;
      hi += pad;
    }
  }
};

/// About five round tick values covering the range.
std::vector<double> ticks(const Range& r) {
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + step * 1e-9; v += step)
    out.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  return out;
}

std::string frame(const std::string& title, const std::string& x_label, const std::string& y_label,
                  const Range& xr, const Range& yr) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n"
      "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
      kWidth, kHeight, kLeft + pw / 2, escape(title), kLeft, kTop, pw, ph);
  for (double t : ticks(xr)) {
    const double px = kLeft + (t - xr.lo) / (xr.hi - xr.lo) * pw;
    s += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1}\" x2=\"{0:.1f}\" y2=\"{2}\" stroke=\"black\"/>"
                     "<text x=\"{0:.1f}\" y=\"{3}\" text-anchor=\"middle\">{4:g}</text>\n",
                     px, kTop + ph, kTop + ph + 5, kTop + ph + 18, t);
  }
  for (double t : ticks(yr)) {
    const double py = kTop + ph - (t - yr.lo) / (yr.hi - yr.lo) * ph;
    s += fmt::format("<line x1=\"{0}\" y1=\"{1:.1f}\" x2=\"{2}\" y2=\"{1:.1f}\" stroke=\"black\"/>"
                     "<text x=\"{3}\" y=\"{4:.1f}\" text-anchor=\"end\">{5:g}</text>\n",
                     kLeft - 5, py, kLeft, kLeft - 8, py + 4, t);
  }
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                   kHeight - 15, escape(x_label));
  s += fmt::format("<text x=\"18\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {0})\">"
                   "{1}</text>\n",
                   kTop + ph / 2, escape(y_label));
  return s;
}

}  // namespace

std::string render_svg(const LinePlot& plot) {
  Range xr, yr;
  for (const Series& s : plot.series) {
    if (s.x.size() != s.y.size()) throw ContractError("series '" + s.label + "' has mismatched x/y");
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  const double pad = 0.04 * (yr.hi - yr.lo);
  yr.lo -= pad;
  yr.hi += pad;
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::string svg = frame(plot.title, plot.x_label, plot.y_label, xr, yr);
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const Series& s = plot.series[i];
    const char* color = kColors[i % kColors.size()];
    if (s.markers) {
      for (std::size_t k = 0; k < s.x.size(); ++k)
        if (std::isfinite(s.y[k]))
          svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"{}\"/>\n",
                             px(s.x[k]), py(s.y[k]), color);
    } else {
      std::string pts;
      for (std::size_t k = 0; k < s.x.size(); ++k)
        if (std::isfinite(s.y[k])) pts += fmt::format("{:.2f},{:.2f} ", px(s.x[k]), py(s.y[k]));
      svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.4\" points=\"{}\"/>\n",
                         color, pts);
    }
    const double ly = kTop + 12 + 18 * static_cast<double>(i);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"4\" fill=\"{}\"/>"
                       "<text x=\"{}\" y=\"{}\">{}</text>\n",
                       kWidth - kRight + 12, ly - 4, color, kWidth - kRight + 32, ly,
                       escape(s.label));
  }
  return svg + "</svg>\n";
}

std::string render_svg(const HeatMap& map) {
  if (map.values.size() != map.y.size()) throw ContractError("heat map rows do not match y axis");
  Range xr, yr, vr;
  for (double v : map.x) xr.add(v);
  for (double v : map.y) yr.add(v);
  for (const auto& row : map.values) {
    if (row.size() != map.x.size()) throw ContractError("heat map row does not match x axis");
    for (double v : row) vr.add(v);
  }
  xr.finish();
  yr.finish();
  vr.finish();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string svg = frame(map.title, map.x_label, map.y_label, xr, yr);
  const double cw = pw / static_cast<double>(std::max<std::size_t>(map.x.size(), 1));
  const double ch = ph / static_cast<double>(std::max<std::size_t>(map.y.size(), 1));
  auto color = [&](double v) {
    const double t = std::clamp((v - vr.lo) / (vr.hi - vr.lo), 0.0, 1.0);
    const int r = static_cast<int>(255 * std::clamp(1.5 * t - 0.25, 0.0, 1.0));
    const int g = static_cast<int>(255 * std::clamp(1.5 - std::abs(2.0 * t - 1.0) * 1.5, 0.0, 1.0));
    const int b = static_cast<int>(255 * std::clamp(1.25 - 1.5 * t, 0.0, 1.0));
    return fmt::format("#{:02x}{:02x}{:02x}", r, g, b);
  };
  for (std::size_t r = 0; r < map.y.size(); ++r)
    for (std::size_t c = 0; c < map.x.size(); ++c)
      svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                         "fill=\"{}\"/>\n",
                         kLeft + cw * static_cast<double>(c),
                         kTop + ph - ch * static_cast<double>(r + 1), cw + 0.3, ch + 0.3,
                         color(map.values[r][c]));
  for (int i = 0; i <= 4; ++i) {
    const double v = vr.lo + (vr.hi - vr.lo) * i / 4.0;
    const double y = kTop + ph - ph * i / 4.0;
    svg += fmt::format("<rect x=\"{}\" y=\"{:.1f}\" width=\"16\" height=\"{:.1f}\" fill=\"{}\"/>"
                       "<text x=\"{}\" y=\"{:.1f}\">{:.3g}</text>\n",
                       kWidth - kRight + 14, y - ph / 8, ph / 8, color(v), kWidth - kRight + 36,
                       y - ph / 16 + 4, v);
  }
  return svg + "</svg>\n";
}

}  // namespace botda
