#pragma once

/// Minimal static SVG line charts: axes with ticks, optional translucent
/// uncertainty bands, and a legend. No external dependencies; output is a
/// self-contained SVG document string.

#include <string>
#include <vector>

namespace bracket::svg {

struct Series {
  std::string name;
  std::vector<double> xs;  ///< ascending
  std::vector<double> ys;  ///< same length as xs
  std::vector<double> band_lo;  ///< empty, or same length as xs
  std::vector<double> band_hi;
  std::string color = "#1f77b4";
  bool step = false;  ///< draw as a right-continuous step function (CDFs)
};

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<Series>& series);

void write_file(const std::string& content, const std::string& path);

}  // namespace bracket::svg
