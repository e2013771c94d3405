#pragma once

#include <string>
#include <vector>

namespace cbpl {

struct SvgSeries {
  std::string label;
  std::string color;       // e.g. "#1f77b4"
  std::vector<double> ys;  // one point per x
  bool dashed = false;
};

// Minimal deterministic line chart (fixed layout, no timestamps): axes, tick
// labels, legend, one polyline per series. Series shorter than xs are drawn
// over their own prefix of the x grid.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<double>& xs,
                              const std::vector<SvgSeries>& series);

void save_line_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& xs, const std::vector<SvgSeries>& series);

}  // namespace cbpl
