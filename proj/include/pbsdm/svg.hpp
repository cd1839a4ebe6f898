#pragma once

// Minimal SVG line and grouped-bar charts for the experiment reports.

#include <string>
#include <vector>

namespace pbsdm::svg {

struct Series {
  std::string label;  // empty: not shown in the legend
  std::vector<double> x, y;
  std::string color = "#333333";
  double width = 1.5;
  double opacity = 1.0;
  bool dashed = false;
};

struct LinePlot {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  // Fixed y range; when lo >= hi the range is taken from the finite data.
  double y_lo = 0.0, y_hi = 0.0;
};

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per bar label; NaN leaves a gap
};

struct BarChart {
  std::string title, y_label;
  std::vector<std::string> bar_labels;
  std::vector<std::string> colors;
  std::vector<BarGroup> groups;
};

std::string render(const LinePlot& plot, int width = 640, int height = 420);
std::string render(const BarChart& chart, int width = 900, int height = 420);

// Distinct colors, cycled.
const std::string& palette(std::size_t i);

}  // namespace pbsdm::svg
