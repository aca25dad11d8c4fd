#ifndef RYDCTL_PLOT_HPP
#define RYDCTL_PLOT_HPP

// Minimal standalone SVG line plots. Output depends only on the inputs;
// all numbers go through fixed printf formats.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rydctl/errors.hpp"

namespace rydctl::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct Axes {
  std::string x_label;
  std::string y_label;
  std::string title;
  bool log_x = false;
  bool log_y = false;
};

namespace detail {

inline std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string escape(const std::string &s) {
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

inline const char *palette(std::size_t i) {
  static const char *colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors[i % 6];
}

struct Range {
  double lo, hi;
};

inline Range padded(double lo, double hi) {
  if (lo == hi) {
    const double d = lo == 0.0 ? 1.0 : 0.05 * std::abs(lo);
    return {lo - d, hi + d};
  }
  return {lo, hi};
}

} // namespace detail

/// Renders series as polylines with axis frame, tick labels and a legend.
/// Points that cannot be shown on a log axis (non-positive) are dropped.
inline std::string render_svg(const std::vector<Series> &series, const Axes &axes) {
  if (series.empty()) throw InputError("no series to plot");
  const double W = 720, H = 480, ml = 80, mr = 20, mt = 40, mb = 60;
  auto tx = [&](double v) { return axes.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return axes.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!axes.log_x || x > 0) && (!axes.log_y || y > 0);
  };

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto &s : series) {
    if (s.x.size() != s.y.size() || s.x.size() < 2) throw InputError("series '" + s.label + "' needs >= 2 points");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  }
  if (!std::isfinite(xmin) || !std::isfinite(ymin)) throw InputError("no plottable points");
  const auto xr = detail::padded(xmin, xmax);
  const auto yr = detail::padded(ymin, ymax);
  auto px = [&](double v) { return ml + (tx(v) - xr.lo) / (xr.hi - xr.lo) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - yr.lo) / (yr.hi - yr.lo) * (H - mt - mb); };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" viewBox=\"0 0 720 480\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"white\"/>\n";
  out += "<rect x=\"" + detail::fmt("%.2f", ml) + "\" y=\"" + detail::fmt("%.2f", mt) + "\" width=\"" +
         detail::fmt("%.2f", W - ml - mr) + "\" height=\"" + detail::fmt("%.2f", H - mt - mb) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  if (!axes.title.empty())
    out += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" + detail::escape(axes.title) +
           "</text>\n";

  // five ticks per axis, labelled in data units
  for (int k = 0; k <= 4; ++k) {
    const double fx = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * k / 4.0;
    const double xpos = ml + (W - ml - mr) * k / 4.0;
    const double ypos = H - mb - (H - mt - mb) * k / 4.0;
    const double xv = axes.log_x ? std::pow(10.0, fx) : fx;
    const double yv = axes.log_y ? std::pow(10.0, fy) : fy;
    out += "<text x=\"" + detail::fmt("%.2f", xpos) + "\" y=\"" + detail::fmt("%.2f", H - mb + 18) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + detail::fmt("%.4g", xv) + "</text>\n";
    out += "<text x=\"" + detail::fmt("%.2f", ml - 6) + "\" y=\"" + detail::fmt("%.2f", ypos + 4) +
           "\" text-anchor=\"end\" font-size=\"11\">" + detail::fmt("%.4g", yv) + "</text>\n";
  }
  out += "<text x=\"" + detail::fmt("%.2f", ml + (W - ml - mr) / 2) + "\" y=\"" + detail::fmt("%.2f", H - 16) +
         "\" text-anchor=\"middle\" font-size=\"13\">" + detail::escape(axes.x_label) + "</text>\n";
  out += "<text x=\"18\" y=\"" + detail::fmt("%.2f", mt + (H - mt - mb) / 2) +
         "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 " +
         detail::fmt("%.2f", mt + (H - mt - mb) / 2) + ")\">" + detail::escape(axes.y_label) + "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto &s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += detail::fmt("%.2f", px(s.x[i])) + "," + detail::fmt("%.2f", py(s.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(detail::palette(k)) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  }

  // legend, top right
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = mt + 16 + 16.0 * static_cast<double>(k);
    out += "<line x1=\"" + detail::fmt("%.2f", W - mr - 150) + "\" y1=\"" + detail::fmt("%.2f", y) + "\" x2=\"" +
           detail::fmt("%.2f", W - mr - 130) + "\" y2=\"" + detail::fmt("%.2f", y) + "\" stroke=\"" +
           detail::palette(k) + "\" stroke-width=\"2\"/>\n";
    out += "<text class=\"legend\" x=\"" + detail::fmt("%.2f", W - mr - 125) + "\" y=\"" +
           detail::fmt("%.2f", y + 4) + "\" font-size=\"11\">" + detail::escape(series[k].label) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

} // namespace rydctl::plot

#endif // RYDCTL_PLOT_HPP
