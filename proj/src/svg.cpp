#include "pbsdm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pbsdm::svg {

namespace {

struct Frame {
  double left = 64, right = 150, top = 36, bottom = 48;
  int width, height;
  double x_lo, x_hi, y_lo, y_hi;
  double px(double x) const { return left + (x - x_lo) / (x_hi - x_lo) * (width - left - right); }
  double py(double y) const { return top + (y_hi - y) / (y_hi - y_lo) * (height - top - bottom); }
};

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

// 1-2-5 tick spacing giving roughly `target` ticks.
std::vector<double> ticks(double lo, double hi, int target = 6) {
  const double span = hi - lo;
  if (!(span > 0)) return {lo};
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step)
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

void header(std::ostringstream& o, int width, int height, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
    << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xl, const std::string& yl, bool x_ticks) {
  const double x0 = f.left, x1 = f.width - f.right, y0 = f.top, y1 = f.height - f.bottom;
  o << "<rect x=\"" << x0 << "\" y=\"" << y0 << "\" width=\"" << x1 - x0 << "\" height=\"" << y1 - y0
    << "\" fill=\"none\" stroke=\"#000\"/>\n";
  for (double t : ticks(f.y_lo, f.y_hi)) {
    const double y = f.py(t);
    o << "<line x1=\"" << x0 - 4 << "\" y1=\"" << y << "\" x2=\"" << x0 << "\" y2=\"" << y << "\" stroke=\"#000\"/>"
      << "<text x=\"" << x0 - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
  }
  if (x_ticks)
    for (double t : ticks(f.x_lo, f.x_hi)) {
      const double x = f.px(t);
      o << "<line x1=\"" << x << "\" y1=\"" << y1 << "\" x2=\"" << x << "\" y2=\"" << y1 + 4
        << "\" stroke=\"#000\"/><text x=\"" << x << "\" y=\"" << y1 + 18 << "\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
    }
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << f.height - 10 << "\" text-anchor=\"middle\">" << escape(xl)
    << "</text>\n<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << escape(yl) << "</text>\n";
}

}  // namespace

const std::string& palette(std::size_t i) {
  static const std::vector<std::string> colors = {"#d62728", "#e6a700", "#1f77b4", "#7f7f7f", "#9467bd",
                                                  "#2ca02c", "#8c564b", "#e377c2", "#17becf", "#bcbd22"};
  return colors[i % colors.size()];
}

std::string render(const LinePlot& plot, int width, int height) {
  Frame f{};
  f.width = width;
  f.height = height;
  f.x_lo = f.y_lo = std::numeric_limits<double>::infinity();
  f.x_hi = f.y_hi = -std::numeric_limits<double>::infinity();
  for (const Series& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      f.x_lo = std::min(f.x_lo, s.x[i]);
      f.x_hi = std::max(f.x_hi, s.x[i]);
      f.y_lo = std::min(f.y_lo, s.y[i]);
      f.y_hi = std::max(f.y_hi, s.y[i]);
    }
  if (plot.y_lo < plot.y_hi) {
    f.y_lo = plot.y_lo;
    f.y_hi = plot.y_hi;
  }
  if (!std::isfinite(f.x_lo)) f.x_lo = 0, f.x_hi = 1;
  if (!std::isfinite(f.y_lo)) f.y_lo = 0, f.y_hi = 1;
  if (f.x_hi <= f.x_lo) f.x_hi = f.x_lo + 1;
  if (f.y_hi <= f.y_lo) f.y_hi = f.y_lo + 1;

  std::ostringstream o;
  header(o, width, height, plot.title);
  o << "<clipPath id=\"plot\"><rect x=\"" << f.left << "\" y=\"" << f.top << "\" width=\""
    << width - f.left - f.right << "\" height=\"" << height - f.top - f.bottom << "\"/></clipPath>\n";
  o << "<g clip-path=\"url(#plot)\">\n";
  for (const Series& s : plot.series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width << "\" stroke-opacity=\""
      << s.opacity << '"' << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      const double y = std::clamp(s.y[i], f.y_lo - 10 * (f.y_hi - f.y_lo), f.y_hi + 10 * (f.y_hi - f.y_lo));
      o << num(f.px(s.x[i])) << ',' << num(f.py(y)) << ' ';
    }
    o << "\"/>\n";
  }
  o << "</g>\n";
  axes(o, f, plot.x_label, plot.y_label, true);
  double ly = f.top + 8;
  for (const Series& s : plot.series) {
    if (s.label.empty()) continue;
    const double lx = width - f.right + 10;
    o << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 22 << "\" y2=\"" << ly << "\" stroke=\""
      << s.color << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/><text x=\""
      << lx + 28 << "\" y=\"" << ly + 4 << "\">" << escape(s.label) << "</text>\n";
    ly += 18;
  }
  o << "</svg>\n";
  return o.str();
}

std::string render(const BarChart& chart, int width, int height) {
  Frame f{};
  f.width = width;
  f.height = height;
  f.x_lo = 0;
  f.x_hi = static_cast<double>(std::max<std::size_t>(chart.groups.size(), 1));
  f.y_lo = 0;
  f.y_hi = 0;
  for (const BarGroup& g : chart.groups)
    for (double v : g.values)
      if (std::isfinite(v)) f.y_hi = std::max(f.y_hi, v);
  if (!(f.y_hi > 0)) f.y_hi = 1;
  f.y_hi *= 1.05;

  std::ostringstream o;
  header(o, width, height, chart.title);
  const std::size_t nb = std::max<std::size_t>(chart.bar_labels.size(), 1);
  for (std::size_t g = 0; g < chart.groups.size(); ++g) {
    const double gx0 = f.px(static_cast<double>(g) + 0.1), gx1 = f.px(static_cast<double>(g) + 0.9);
    const double bw = (gx1 - gx0) / static_cast<double>(nb);
    for (std::size_t b = 0; b < chart.groups[g].values.size() && b < nb; ++b) {
      const double v = chart.groups[g].values[b];
      if (!std::isfinite(v)) continue;
      const double y = f.py(std::min(v, f.y_hi));
      const std::string& color = b < chart.colors.size() ? chart.colors[b] : palette(b);
      o << "<rect x=\"" << num(gx0 + bw * static_cast<double>(b)) << "\" y=\"" << num(y) << "\" width=\""
        << num(bw * 0.9) << "\" height=\"" << num(f.py(0) - y) << "\" fill=\"" << color << "\"/>\n";
    }
    o << "<text x=\"" << num((gx0 + gx1) / 2) << "\" y=\"" << height - f.bottom + 16
      << "\" text-anchor=\"middle\">" << escape(chart.groups[g].label) << "</text>\n";
  }
  axes(o, f, "", chart.y_label, false);
  double ly = f.top + 8;
  for (std::size_t b = 0; b < chart.bar_labels.size(); ++b) {
    const double lx = width - f.right + 10;
    const std::string& color = b < chart.colors.size() ? chart.colors[b] : palette(b);
    o << "<rect x=\"" << lx << "\" y=\"" << ly - 6 << "\" width=\"14\" height=\"12\" fill=\"" << color
      << "\"/><text x=\"" << lx + 20 << "\" y=\"" << ly + 4 << "\">" << escape(chart.bar_labels[b]) << "</text>\n";
    ly += 18;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace pbsdm::svg
