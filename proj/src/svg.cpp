#include "cbpl/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cbpl {
namespace {

constexpr double kW = 720, kH = 420;
constexpr double kLeft = 72, kRight = 24, kTop = 44, kBottom = 48;

std::string num(double v, const char* spec = "%.6g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '&') o += "&amp;";
    else if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else o += c;
  }
  return o;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<double>& xs,
                              const std::vector<SvgSeries>& series) {
  if (xs.empty()) throw std::invalid_argument("render_line_chart: empty x grid");
  double x_min = *std::min_element(xs.begin(), xs.end());
  double x_max = *std::max_element(xs.begin(), xs.end());
  double y_min = HUGE_VAL, y_max = -HUGE_VAL;
  for (const auto& s : series) {
    if (s.ys.size() > xs.size())
      throw std::invalid_argument("render_line_chart: series " + s.label + " longer than x grid");
    for (double v : s.ys) {
      if (!std::isfinite(v)) continue;
      y_min = std::min(y_min, v);
      y_max = std::max(y_max, v);
    }
  }
  if (y_min > y_max) { y_min = 0; y_max = 1; }
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) { y_min -= 0.5; y_max += 0.5; }
  double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;

  auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom); };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kW) + "\" height=\"" + num(kH) +
       "\" viewBox=\"0 0 " + num(kW) + " " + num(kH) + "\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kW / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">" + esc(title) + "</text>\n";

  // frame + ticks
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(kW - kLeft - kRight) +
       "\" height=\"" + num(kH - kTop - kBottom) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    double fx = x_min + (x_max - x_min) * i / 4.0;
    double fy = y_min + (y_max - y_min) * i / 4.0;
    o += "<line x1=\"" + num(px(fx)) + "\" y1=\"" + num(kH - kBottom) + "\" x2=\"" + num(px(fx)) +
         "\" y2=\"" + num(kH - kBottom + 5) + "\" stroke=\"#333\"/>\n";
    o += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kH - kBottom + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
         num(fx, "%.4g") + "</text>\n";
    o += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(fy)) + "\" x2=\"" + num(kLeft) +
         "\" y2=\"" + num(py(fy)) + "\" stroke=\"#333\"/>\n";
    o += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(fy) + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + num(fy, "%.4g") +
         "</text>\n";
  }
  o += "<text x=\"" + num(kLeft + (kW - kLeft - kRight) / 2) + "\" y=\"" + num(kH - 12) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + esc(x_label) +
       "</text>\n";
  o += "<text x=\"16\" y=\"" + num(kTop + (kH - kTop - kBottom) / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 16 " +
       num(kTop + (kH - kTop - kBottom) / 2) + ")\">" + esc(y_label) + "</text>\n";

  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.ys.size(); ++i) {
      if (!std::isfinite(s.ys[i])) continue;
      pts += num(px(xs[i]), "%.2f") + "," + num(py(s.ys[i]), "%.2f") + " ";
    }
    o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.8\"";
    if (s.dashed) o += " stroke-dasharray=\"6,4\"";
    o += " points=\"" + pts + "\"/>\n";
  }

  double ly = kTop + 14;
  for (const auto& s : series) {
    double lx = kW - kRight - 150;
    o += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 22) +
         "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
         (s.dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    o += "<text x=\"" + num(lx + 28) + "\" y=\"" + num(ly) +
         "\" font-family=\"sans-serif\" font-size=\"12\">" + esc(s.label) + "</text>\n";
    ly += 17;
  }
  o += "</svg>\n";
  return o;
}

void save_line_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& xs, const std::vector<SvgSeries>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_line_chart: cannot open " + path);
  out << render_line_chart(title, x_label, y_label, xs, series);
}

}  // namespace cbpl
