#pragma once

#include <string>
#include <vector>

namespace homtom {

// Minimal self-contained SVG bar charts: measured values as bars, standard
// errors as whiskers, an optional theory curve as a dashed overlay.  No
// external fonts, scripts, or stylesheets, so files render anywhere and
// diff cleanly.
struct BarChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> categories;  // one tick label per bar
  std::vector<double> values;
  std::vector<double> errors;   // empty means no whiskers
  std::vector<double> overlay;  // empty means no theory curve
  int width = 560;
  int height = 360;
};

std::string render_bar_chart(const BarChartSpec& spec);

// Several charts tiled into one SVG document, `columns` panels per row.
std::string render_panel_grid(const std::vector<BarChartSpec>& panels,
                              int columns = 2);

}  // namespace homtom
