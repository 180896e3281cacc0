#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace bmt {

struct SvgSeries {
  std::string name;
  std::vector<double> values;  // aligned with the shared x axis
};

// Minimal self-contained line chart (fixed y range [0,1]) for trajectory
// scores; one polyline per series plus a legend.
void write_line_chart_svg(const std::filesystem::path& path,
                          const std::vector<double>& x,
                          const std::vector<SvgSeries>& series,
                          const std::string& x_label, const std::string& y_label);

}  // namespace bmt
