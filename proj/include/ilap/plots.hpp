#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ilap {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers_only = false;
};

struct Chart {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<Series> series;
  /// Horizontal reference lines (label, y).
  std::vector<std::pair<std::string, double>> hlines;
  std::optional<std::pair<double, double>> y_range;
};

/// Renders charts side by side as one SVG document.
std::string render_svg(const std::vector<Chart>& panels);
void write_svg(const std::filesystem::path& path, const std::vector<Chart>& panels);

}  // namespace ilap
