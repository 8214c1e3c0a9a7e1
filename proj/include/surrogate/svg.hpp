#pragma once

#include <string>
#include <vector>

namespace surrogate {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> lo;  // optional band, same length as x
  std::vector<double> hi;
  bool points = false;     // markers instead of a polyline
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool diagonal = false;  // y = x reference line
  bool zero_lines = false;
};

// Fixed-size SVG with two-decimal coordinates, so equal inputs give equal
// bytes. Non-finite points are skipped.
std::string render_svg(const PlotSpec& spec);

}  // namespace surrogate
