#pragma once

// Minimal SVG plotter for the experiment outputs: line charts and heat maps.

#include <string>
#include <vector>

namespace botda {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  /// Draw markers instead of a polyline.
  bool markers = false;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

struct HeatMap {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;  // columns
  std::vector<double> y;  // rows
  /// values[row][column]
  std::vector<std::vector<double>> values;
};

std::string render_svg(const LinePlot& plot);
std::string render_svg(const HeatMap& map);

}  // namespace botda
