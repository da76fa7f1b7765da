#pragma once

// Two-panel SVG of per-epoch discounted return and cost return, with an optional
// horizontal limit line on the cost panel.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rbsl/csv.hpp"

namespace rbsl {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

struct PanelFrame {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * width; }
  double py(double y) const { return top + height - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * height; }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline void draw_panel(std::ostringstream& os, const PanelFrame& f, const Series& s, const std::string& title,
                       const std::string& color, std::optional<double> limit) {
  os << "<rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" fill=\"none\" stroke=\"#444\"/>\n";
  os << "<text x=\"" << f.left + f.width / 2 << "\" y=\"" << f.top - 10 << "\" text-anchor=\"middle\">" << title
     << "</text>\n";
  os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.top + 4 << "\" text-anchor=\"end\">" << fmt(f.y1) << "</text>\n";
  os << "<text x=\"" << f.left - 6 << "\" y=\"" << f.top + f.height << "\" text-anchor=\"end\">" << fmt(f.y0)
     << "</text>\n";
  os << "<text x=\"" << f.left << "\" y=\"" << f.top + f.height + 18 << "\" text-anchor=\"middle\">" << fmt(f.x0)
     << "</text>\n";
  os << "<text x=\"" << f.left + f.width << "\" y=\"" << f.top + f.height + 18 << "\" text-anchor=\"middle\">"
     << fmt(f.x1) << "</text>\n";
  os << "<text x=\"" << f.left + f.width / 2 << "\" y=\"" << f.top + f.height + 34
     << "\" text-anchor=\"middle\">epoch</text>\n";
  if (limit) {
    const double y = f.py(*limit);
    os << "<line class=\"limit\" x1=\"" << f.left << "\" y1=\"" << y << "\" x2=\"" << f.left + f.width
       << "\" y2=\"" << y << "\" stroke=\"black\" stroke-dasharray=\"4 4\"/>\n";
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < s.x.size(); ++i)
    if (std::isfinite(s.y[i])) pts.emplace_back(f.px(s.x[i]), f.py(s.y[i]));
  if (pts.size() == 1) {
    os << "<circle cx=\"" << pts[0].first << "\" cy=\"" << pts[0].second << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  } else if (!pts.empty()) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) os << (i ? " " : "") << pts[i].first << ',' << pts[i].second;
    os << "\"/>\n";
  }
}

inline PanelFrame frame_for(double left, const Series& s, std::optional<double> limit) {
  PanelFrame f{left, 40, 320, 220, 0, 1, 0, 1};
  f.x0 = *std::min_element(s.x.begin(), s.x.end());
  f.x1 = *std::max_element(s.x.begin(), s.x.end());
  double lo = INFINITY, hi = -INFINITY;
  for (double y : s.y)
    if (std::isfinite(y)) lo = std::min(lo, y), hi = std::max(hi, y);
  if (limit) lo = std::min(lo, *limit), hi = std::max(hi, *limit);
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  lo = std::min(lo, 0.0);
  if (hi <= lo) hi = lo + 1.0;
  f.y0 = lo;
  f.y1 = hi + 0.05 * (hi - lo);
  return f;
}

}  // namespace detail

/// Renders the two curves. Throws when there are no points.
inline std::string render_metrics_svg(const Series& discounted_return, const Series& cost_return,
                                      std::optional<double> limit) {
  if (discounted_return.x.empty() || cost_return.x.empty()) throw ConfigError("plot: no metric rows");
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"320\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n";
  os << "<rect width=\"800\" height=\"320\" fill=\"white\"/>\n";
  detail::draw_panel(os, detail::frame_for(60, discounted_return, std::nullopt), discounted_return,
                     "discounted return", "#1f77b4", std::nullopt);
  detail::draw_panel(os, detail::frame_for(460, cost_return, limit), cost_return, "cost return", "#d62728", limit);
  os << "</svg>\n";
  return os.str();
}

/// Reads epoch, discounted_return and cost_return columns from a metrics CSV.
inline std::string render_metrics_svg(std::istream& csv, std::optional<double> limit) {
  const CsvTable t = read_csv(csv);
  if (t.rows.empty()) throw ConfigError("plot: metrics file has no rows");
  const auto epoch = t.numbers("epoch");
  return render_metrics_svg({epoch, t.numbers("discounted_return")}, {epoch, t.numbers("cost_return")}, limit);
}

}  // namespace rbsl
