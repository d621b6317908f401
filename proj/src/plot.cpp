// SPDX-License-Identifier: Apache-2.0

#include "xlmimo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace xlm {

namespace {

constexpr double kW = 640.0, kH = 440.0;
constexpr double kLeft = 70.0, kRight = 480.0;   // plot area x range
constexpr double kTop = 40.0, kBottom = 390.0;   // plot area y range
// NMSE values at or below this render at the dB floor instead of -inf.
constexpr double kNmseFloor = 1e-12;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

struct Pt {
  double x, y;
};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string plot_svg(const std::vector<SweepRow>& rows, PlotMetric metric) {
  // Collect per-method points in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<Pt>> curves;
  for (const auto& r : rows) {
    double v = metric == PlotMetric::mpe ? r.mpe_m : r.nmse;
    if (!std::isfinite(v)) continue;
    if (metric == PlotMetric::nmse) v = 10.0 * std::log10(std::max(v, kNmseFloor));
    if (!curves.count(r.method)) order.push_back(r.method);
    curves[r.method].push_back({r.snr_db, v});
  }
  if (order.empty()) throw EvalError("plot: no finite data for this metric");

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0;
  double y0 = x0, y1 = -x0;
  for (const auto& [name, pts] : curves)
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
  if (x1 == x0) { x0 -= 1.0; x1 += 1.0; }
  if (metric == PlotMetric::mpe) y0 = std::min(y0, 0.0);
  if (y1 == y0) { y0 -= 1.0; y1 += 1.0; }
  const double ypad = 0.05 * (y1 - y0);
  y0 -= ypad;
  y1 += ypad;

  const auto sx = [&](double x) {
    return kLeft + (x - x0) / (x1 - x0) * (kRight - kLeft);
  };
  const auto sy = [&](double y) {
    return kBottom - (y - y0) / (y1 - y0) * (kBottom - kTop);
  };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
      << "\">\n"
      << "<rect width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n";

  // Grid, ticks, tick labels.
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    svg << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << kTop << "\" x2=\""
        << num(sx(fx)) << "\" y2=\"" << kBottom
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << num(sy(fy)) << "\" x2=\""
        << kRight << "\" y2=\"" << num(sy(fy))
        << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << num(sx(fx)) << "\" y=\"" << kBottom + 20.0
        << "\" font-size=\"12\" text-anchor=\"middle\">" << num(fx)
        << "</text>\n";
    svg << "<text x=\"" << kLeft - 8.0 << "\" y=\"" << num(sy(fy) + 4.0)
        << "\" font-size=\"12\" text-anchor=\"end\">" << num(fy)
        << "</text>\n";
  }
  // Axes.
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\""
      << kRight - kLeft << "\" height=\"" << kBottom - kTop
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  const char* ylabel = metric == PlotMetric::mpe ? "MPE (m)" : "NMSE (dB)";
  svg << "<text x=\"" << (kLeft + kRight) / 2.0 << "\" y=\"" << kBottom + 42.0
      << "\" font-size=\"14\" text-anchor=\"middle\">SNR (dB)</text>\n";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2.0
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2.0 << ")\">" << ylabel << "</text>\n";

  // Curves and legend.
  int ci = 0;
  for (const auto& name : order) {
    auto pts = curves[name];
    std::sort(pts.begin(), pts.end(),
              [](const Pt& a, const Pt& b) { return a.x < b.x; });
    const char* color = kPalette[ci % 6];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) svg << num(sx(p.x)) << "," << num(sy(p.y)) << " ";
    svg << "\"/>\n";
    for (const auto& p : pts)
      svg << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 10.0 + 22.0 * ci;
    svg << "<line x1=\"" << kRight + 12.0 << "\" y1=\"" << ly << "\" x2=\""
        << kRight + 40.0 << "\" y2=\"" << ly << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kRight + 46.0 << "\" y=\"" << ly + 4.0
        << "\" font-size=\"12\">" << xml_escape(name) << "</text>\n";
    ++ci;
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_plot_svg(const std::string& path,
                    const std::vector<SweepRow>& rows, PlotMetric metric) {
  const std::string body = plot_svg(rows, metric);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw EvalError("plot: cannot open " + path);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  f.flush();
  if (!f) throw EvalError("plot: failed writing " + path);
}

}  // namespace xlm
