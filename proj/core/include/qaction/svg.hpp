#pragma once

#include <string>
#include <vector>

namespace qaction {

enum class SeriesStyle { Markers, Line };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  SeriesStyle style = SeriesStyle::Line;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 480;
  double marker_radius = 0.8;
};

/// Self-contained SVG document with axes, ticks, labels and a legend.
/// Output is a pure function of the inputs.
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace qaction
