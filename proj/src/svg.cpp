#include "sls/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sls/errors.hpp"

namespace sls {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 72;
constexpr int kMarginRight = 160;
constexpr int kMarginTop = 48;
constexpr int kMarginBottom = 56;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& x, const std::vector<ChartSeries>& series) {
  if (x.empty() || series.empty())
    throw UsageError("write_line_chart_svg: need at least one point and one series");
  for (const auto& s : series)
    if (s.y.size() != x.size())
      throw UsageError("write_line_chart_svg: series '" + s.name + "' has " +
                       std::to_string(s.y.size()) + " points, x grid has " +
                       std::to_string(x.size()));

  double xmin = x.front(), xmax = x.front();
  for (double v : x) {
    xmin = std::min(xmin, v);
    xmax = std::max(xmax, v);
  }
  double ymin = std::numeric_limits<double>::infinity();
  double ymax = -std::numeric_limits<double>::infinity();
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  auto px = [&](double v) { return kMarginLeft + (v - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double v) { return kMarginTop + (ymax - v) / (ymax - ymin) * plot_h; };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open SVG for writing: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" << xml_escape(title) << "</text>\n";

  // axes and ticks
  out << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
      << kMarginLeft + plot_w << "\" y2=\"" << kMarginTop + plot_h << "\"/>\n";
  out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
      << "\" y2=\"" << kMarginTop + plot_h << "\"/>\n";
  out << "</g>\n";
  constexpr int kTicks = 5;
  out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= kTicks; ++i) {
    const double xv = xmin + (xmax - xmin) * i / kTicks;
    const double yv = ymin + (ymax - ymin) * i / kTicks;
    out << "<line x1=\"" << num(px(xv)) << "\" y1=\"" << kMarginTop + plot_h << "\" x2=\""
        << num(px(xv)) << "\" y2=\"" << kMarginTop + plot_h + 5 << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << num(px(xv)) << "\" y=\"" << kMarginTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
    out << "<line x1=\"" << kMarginLeft - 5 << "\" y1=\"" << num(py(yv)) << "\" x2=\""
        << kMarginLeft << "\" y2=\"" << num(py(yv)) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << kMarginLeft - 8 << "\" y=\"" << num(py(yv) + 4)
        << "\" text-anchor=\"end\">" << num(yv) << "</text>\n";
  }
  out << "<text x=\"" << kMarginLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << kMarginTop + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << kMarginTop + plot_h / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  out << "</g>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i) out << " ";
      out << num(px(x[i])) << "," << num(py(series[si].y[i]));
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < x.size(); ++i)
      out << "<circle cx=\"" << num(px(x[i])) << "\" cy=\"" << num(py(series[si].y[i]))
          << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    const double ly = kMarginTop + 16.0 * static_cast<double>(si);
    out << "<rect x=\"" << kMarginLeft + plot_w + 12 << "\" y=\"" << num(ly) << "\" width=\"12\" "
        << "height=\"12\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << kMarginLeft + plot_w + 28 << "\" y=\"" << num(ly + 10)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(series[si].name)
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("failed writing SVG: " + path);
}

}  // namespace sls
