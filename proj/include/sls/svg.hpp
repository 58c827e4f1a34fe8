#pragma once

#include <string>
#include <vector>

namespace sls {

struct ChartSeries {
  std::string name;
  std::vector<double> y;
};

// Standalone SVG line chart: one x grid, one or more series, axes with tick
// labels and a legend.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& x, const std::vector<ChartSeries>& series);

}  // namespace sls
