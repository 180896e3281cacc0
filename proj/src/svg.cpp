#include "bmt/svg.hpp"

#include <algorithm>
#include <sstream>

#include "bmt/common.hpp"
#include "bmt/io_util.hpp"

namespace bmt {

void write_line_chart_svg(const std::filesystem::path& path,
                          const std::vector<double>& x,
                          const std::vector<SvgSeries>& series,
                          const std::string& x_label, const std::string& y_label) {
  require(!x.empty() && !series.empty(), "empty chart data");
  for (const auto& s : series)
    require(s.values.size() == x.size(), "series length does not match x axis");

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const int width = 960, height = 420;
  const int ml = 60, mr = 160, mt = 20, mb = 50;
  const double plot_w = width - ml - mr, plot_h = height - mt - mb;
  const double x_min = x.front(), x_max = std::max(x.back(), x.front() + 1e-9);

  auto px = [&](double v) { return ml + plot_w * (v - x_min) / (x_max - x_min); };
  auto py = [&](double v) { return mt + plot_h * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = mt + plot_h * i / 4.0;
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << ml + plot_w
       << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
       << "\" font-size=\"12\" text-anchor=\"end\">" << 1.0 - i / 4.0 << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
       << "\" font-size=\"12\" text-anchor=\"middle\">" << static_cast<int>(xv)
       << "</text>\n";
  }
  os << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
     << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + plot_h / 2
     << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << mt + plot_h / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i)
      os << px(x[i]) << ',' << py(series[s].values[i]) << ' ';
    os << "\"/>\n";
    const double ly = mt + 16 + 18.0 * static_cast<double>(s);
    os << "<line x1=\"" << ml + plot_w + 12 << "\" y1=\"" << ly << "\" x2=\""
       << ml + plot_w + 36 << "\" y2=\"" << ly << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << ml + plot_w + 42 << "\" y=\"" << ly + 4
       << "\" font-size=\"12\">" << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
  atomic_write_text(path, os.str());
}

}  // namespace bmt
