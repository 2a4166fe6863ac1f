#pragma once

// Minimal self-contained SVG line chart: axes, ticks, one polyline per
// series with optional error bars, and a legend. Output depends only on the
// input values, so identical data renders to identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace edgemon::svg {

struct Point {
  double x;
  double y;
  double err = 0.0;  // half-width of the error bar
};

struct Series {
  std::string name;
  std::vector<Point> points;
};

struct ChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 720;
  int height = 480;
};

namespace detail {

inline std::string num(double v, int prec = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1-2-5 tick spacing covering [lo, hi] with roughly `target` intervals.
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) {
    hi = lo + 1.0;
    lo -= 1.0;
  }
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step - 1e-9) * step; t <= hi + step * 1e-9; t += step) {
    ticks.push_back(std::abs(t) < step * 1e-9 ? 0.0 : t);
  }
  return ticks;
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

}  // namespace detail

inline std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y - p.err);
      ymax = std::max(ymax, p.y + p.err);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  const double ypad = std::max((ymax - ymin) * 0.08, 1e-3);
  ymin -= ypad;
  ymax += ypad;

  const double left = 80, right = 170, top = 50, bottom = 60;
  const double pw = spec.width - left - right;
  const double ph = spec.height - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };
  using detail::num;

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
       std::to_string(spec.height) + "\" viewBox=\"0 0 " + std::to_string(spec.width) + " " +
       std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">" +
       detail::escape(spec.title) + "</text>\n";

  // grid and ticks
  for (double t : detail::nice_ticks(ymin, ymax)) {
    if (t < ymin || t > ymax) continue;
    o += "<line x1=\"" + num(left) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(sy(t)) +
         "\" stroke=\"#e0e0e0\"/>\n";
    o += "<text x=\"" + num(left - 8) + "\" y=\"" + num(sy(t) + 4) + "\" text-anchor=\"end\">" + num(t, 4) + "</text>\n";
  }
  for (double t : detail::nice_ticks(xmin, xmax)) {
    if (t < xmin || t > xmax) continue;
    o += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(sx(t)) + "\" y2=\"" +
         num(top + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(top + ph + 20) + "\" text-anchor=\"middle\">" + num(t, 4) +
         "</text>\n";
  }
  o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";
  o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(spec.height - 15.0) + "\" text-anchor=\"middle\">" +
       detail::escape(spec.x_label) + "</text>\n";
  o += "<text transform=\"translate(20," + num(top + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       detail::escape(spec.y_label) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = detail::palette(i);
    std::string pts;
    for (const auto& p : s.points) pts += (pts.empty() ? "" : " ") + num(sx(p.x)) + "," + num(sy(p.y));
    o += "<g stroke=\"" + std::string(color) + "\" fill=\"" + color + "\">\n";
    o += "<polyline fill=\"none\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (const auto& p : s.points) {
      if (p.err > 0) {
        o += "<line x1=\"" + num(sx(p.x)) + "\" y1=\"" + num(sy(p.y - p.err)) + "\" x2=\"" + num(sx(p.x)) +
             "\" y2=\"" + num(sy(p.y + p.err)) + "\"/>\n";
      }
      o += "<circle cx=\"" + num(sx(p.x)) + "\" cy=\"" + num(sy(p.y)) + "\" r=\"3.5\"/>\n";
    }
    o += "</g>\n";
    const double ly = top + 10 + 22.0 * static_cast<double>(i);
    o += "<line x1=\"" + num(left + pw + 15) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + pw + 40) + "\" y2=\"" +
         num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + num(left + pw + 46) + "\" y=\"" + num(ly + 4) + "\">" + detail::escape(s.name) + "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

}  // namespace edgemon::svg
