#include "qaction/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace qaction {

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string fmt(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

// Tick step from the 1-2-5 sequence giving about five intervals.
double tick_step(const Range& r) {
  const double raw = (r.hi - r.lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series) {
  const double left = 70.0;
  const double right = 20.0;
  const double top = 40.0;
  const double bottom = 55.0;
  const double w = spec.width;
  const double h = spec.height;
  const double pw = w - left - right;
  const double ph = h - top - bottom;

  Range xr;
  Range yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.settle();
  yr.settle();
  const double xpad = 0.04 * (xr.hi - xr.lo);
  const double ypad = 0.06 * (yr.hi - yr.lo);
  xr.lo -= xpad;
  xr.hi += xpad;
  yr.lo -= ypad;
  yr.hi += ypad;

  const auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto py = [&](double y) { return top + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(w / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(spec.title)
     << "</text>\n";

  // Ticks and grid.
  const double xs = tick_step(xr);
  for (double t = std::ceil(xr.lo / xs) * xs; t <= xr.hi + 1e-9 * xs; t += xs) {
    const double v = std::abs(t) < 1e-9 * xs ? 0.0 : t;
    os << "<line x1=\"" << fmt(px(v), 6) << "\" y1=\"" << fmt(top, 6) << "\" x2=\"" << fmt(px(v), 6) << "\" y2=\""
       << fmt(top + ph, 6) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << fmt(px(v), 6) << "\" y=\"" << fmt(top + ph + 16, 6) << "\" text-anchor=\"middle\">" << fmt(v)
       << "</text>\n";
  }
  const double ys = tick_step(yr);
  for (double t = std::ceil(yr.lo / ys) * ys; t <= yr.hi + 1e-9 * ys; t += ys) {
    const double v = std::abs(t) < 1e-9 * ys ? 0.0 : t;
    os << "<line x1=\"" << fmt(left, 6) << "\" y1=\"" << fmt(py(v), 6) << "\" x2=\"" << fmt(left + pw, 6) << "\" y2=\""
       << fmt(py(v), 6) << "\" stroke=\"#e5e5e5\"/>\n";
    os << "<text x=\"" << fmt(left - 6, 6) << "\" y=\"" << fmt(py(v) + 4, 6) << "\" text-anchor=\"end\">" << fmt(v)
       << "</text>\n";
  }
  os << "<rect x=\"" << fmt(left, 6) << "\" y=\"" << fmt(top, 6) << "\" width=\"" << fmt(pw, 6) << "\" height=\""
     << fmt(ph, 6) << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << fmt(left + pw / 2, 6) << "\" y=\"" << fmt(h - 14, 6) << "\" text-anchor=\"middle\">"
     << escape(spec.x_label) << "</text>\n";
  os << "<text transform=\"translate(18 " << fmt(top + ph / 2, 6) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(spec.y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kPalette[i % kPalette.size()];
    const std::size_t n = std::min(s.x.size(), s.y.size());
    if (s.style == SeriesStyle::Line) {
      os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        os << fmt(px(s.x[k]), 6) << ',' << fmt(py(s.y[k]), 6) << ' ';
      }
      os << "\"/>\n";
    } else {
      os << "<g fill=\"" << color << "\">\n";
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
        os << "<circle cx=\"" << fmt(px(s.x[k]), 6) << "\" cy=\"" << fmt(py(s.y[k]), 6) << "\" r=\""
           << fmt(spec.marker_radius) << "\"/>\n";
      }
      os << "</g>\n";
    }
    if (!s.label.empty()) {
      const double ly = top + 14.0 + 16.0 * static_cast<double>(i);
      os << "<rect x=\"" << fmt(left + pw - 120, 6) << "\" y=\"" << fmt(ly - 9, 6) << "\" width=\"10\" height=\"10\" fill=\""
         << color << "\"/>\n";
      os << "<text x=\"" << fmt(left + pw - 105, 6) << "\" y=\"" << fmt(ly, 6) << "\">" << escape(s.label) << "</text>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace qaction
