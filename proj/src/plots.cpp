#include "ilap/plots.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ilap/errors.hpp"

namespace ilap {

namespace {

constexpr double kPanelW = 480, kPanelH = 340;
constexpr double kLeft = 60, kRight = 20, kTop = 36, kBottom = 48;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

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
  void settle() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

std::vector<double> ticks(const Range& r) {
  const double span = r.hi - r.lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(r.lo / step) * step; v <= r.hi + 1e-9 * step; v += step) {
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

void panel(std::string& svg, const Chart& c, double ox) {
  Range xr, yr;
  for (const auto& s : c.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  for (const auto& [label, y] : c.hlines) yr.add(y);
  if (c.y_range) {
    yr.lo = c.y_range->first;
    yr.hi = c.y_range->second;
  }
  xr.settle();
  yr.settle();

  const double w = kPanelW - kLeft - kRight, h = kPanelH - kTop - kBottom;
  auto px = [&](double x) { return ox + kLeft + (x - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double y) { return kTop + h - (y - yr.lo) / (yr.hi - yr.lo) * h; };

  svg += fmt::format(R"(<text x="{:.1f}" y="20" text-anchor="middle" font-size="14">{}</text>)"
                     "\n", ox + kLeft + w / 2, escape(c.title));
  svg += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="none" stroke="#333"/>)"
                     "\n", ox + kLeft, kTop, w, h);
  for (double t : ticks(xr)) {
    svg += fmt::format(R"(<line x1="{0:.1f}" y1="{1:.1f}" x2="{0:.1f}" y2="{2:.1f}" stroke="#333"/>)"
                       R"(<text x="{0:.1f}" y="{3:.1f}" text-anchor="middle" font-size="11">{4:g}</text>)"
                       "\n", px(t), kTop + h, kTop + h + 4, kTop + h + 16, t);
  }
  for (double t : ticks(yr)) {
    svg += fmt::format(R"(<line x1="{0:.1f}" y1="{1:.1f}" x2="{2:.1f}" y2="{1:.1f}" stroke="#ddd"/>)"
                       R"(<text x="{3:.1f}" y="{4:.1f}" text-anchor="end" font-size="11">{5:g}</text>)"
                       "\n", ox + kLeft, py(t), ox + kLeft + w, ox + kLeft - 4, py(t) + 4, t);
  }
  svg += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle" font-size="12">{}</text>)"
                     "\n", ox + kLeft + w / 2, kPanelH - 10, escape(c.xlabel));
  svg += fmt::format(R"svg(<text transform="translate({:.1f},{:.1f}) rotate(-90)" text-anchor="middle" font-size="12">{}</text>)svg"
                     "\n", ox + 16, kTop + h / 2, escape(c.ylabel));

  for (const auto& [label, y] : c.hlines) {
    svg += fmt::format(R"(<line x1="{:.1f}" y1="{:.1f}" x2="{:.1f}" y2="{:.1f}" stroke="#555" stroke-dasharray="5,4"/>)"
                       R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end" font-size="10" fill="#555">{}</text>)"
                       "\n", ox + kLeft, py(y), ox + kLeft + w, py(y), ox + kLeft + w - 4, py(y) - 4,
                       escape(label));
  }

  for (std::size_t i = 0; i < c.series.size(); ++i) {
    const auto& s = c.series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (!s.markers_only && n > 1) {
      std::string pts;
      for (std::size_t k = 0; k < n; ++k) pts += fmt::format("{:.1f},{:.1f} ", px(s.x[k]), py(s.y[k]));
      svg += fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"/>)" "\n",
                         pts, colour);
    }
    if (s.markers_only || n == 1) {
      for (std::size_t k = 0; k < n; ++k) {
        svg += fmt::format(R"(<circle cx="{:.1f}" cy="{:.1f}" r="3" fill="{}"/>)" "\n",
                           px(s.x[k]), py(s.y[k]), colour);
      }
    }
    if (c.series.size() > 1 || !s.name.empty()) {
      const double ly = kTop + 14 + 15 * static_cast<double>(i);
      svg += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="12" height="3" fill="{}"/>)"
                         R"(<text x="{:.1f}" y="{:.1f}" font-size="11">{}</text>)" "\n",
                         ox + kLeft + 8, ly - 4, colour, ox + kLeft + 24, ly, escape(s.name));
    }
  }
}

}  // namespace

std::string render_svg(const std::vector<Chart>& panels) {
  if (panels.empty()) throw InvariantError("nothing to plot");
  for (const auto& c : panels) {
    bool any = false;
    for (const auto& s : c.series) any = any || !s.x.empty();
    if (!any) throw InvariantError("chart '" + c.title + "' has no data");
  }
  const double width = kPanelW * static_cast<double>(panels.size());
  std::string svg = fmt::format(
      R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0:.0f}" height="{1:.0f}" viewBox="0 0 {0:.0f} {1:.0f}" font-family="sans-serif">)"
      "\n" R"(<rect width="100%" height="100%" fill="white"/>)" "\n",
      width, kPanelH);
  for (std::size_t i = 0; i < panels.size(); ++i) panel(svg, panels[i], kPanelW * static_cast<double>(i));
  svg += "</svg>\n";
  return svg;
}

void write_svg(const std::filesystem::path& path, const std::vector<Chart>& panels) {
  const auto svg = render_svg(panels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << svg;
}

}  // namespace ilap
