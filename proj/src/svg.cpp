#include "evireg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace evireg {

namespace {

constexpr double kMarginLeft = 64.0;
constexpr double kMarginRight = 16.0;
constexpr double kMarginTop = 32.0;
constexpr double kMarginBottom = 48.0;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
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
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void finish() {
    if (!(lo <= hi)) {
      lo = 0.0;
      hi = 1.0;
    }
    if (lo == hi) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

struct Frame {
  Range xr, yr;
  double w, h;
  [[nodiscard]] double px(double x) const { return kMarginLeft + (x - xr.lo) / (xr.hi - xr.lo) * w; }
  [[nodiscard]] double py(double y) const {
    const double c = std::clamp(y, yr.lo, yr.hi);
    return kMarginTop + (yr.hi - c) / (yr.hi - yr.lo) * h;
  }
};

std::string polyline_points(const Frame& f, const std::vector<double>& x, const std::vector<double>& y) {
  std::string pts;
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      continue;
    }
    if (!pts.empty()) {
      pts += ' ';
    }
    pts += fmt(f.px(x[i])) + "," + fmt(f.py(y[i]));
  }
  return pts;
}

}  // namespace

std::string render_svg(const Plot& plot) {
  Frame f;
  for (const auto& b : plot.bands) {
    for (double v : b.x) f.xr.add(v);
    for (double v : b.lo) f.yr.add(v);
    for (double v : b.hi) f.yr.add(v);
  }
  for (const auto& l : plot.lines) {
    for (double v : l.x) f.xr.add(v);
    for (double v : l.y) f.yr.add(v);
  }
  for (const auto& s : plot.scatters) {
    for (double v : s.x) f.xr.add(v);
    for (double v : s.y) f.yr.add(v);
  }
  if (plot.y_lo < plot.y_hi) {
    f.yr.lo = plot.y_lo;
    f.yr.hi = plot.y_hi;
  }
  f.xr.finish();
  f.yr.finish();
  f.w = plot.width - kMarginLeft - kMarginRight;
  f.h = plot.height - kMarginTop - kMarginBottom;

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(plot.width) + "\" height=\"" +
         std::to_string(plot.height) + "\" viewBox=\"0 0 " + std::to_string(plot.width) + " " +
         std::to_string(plot.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<rect x=\"" + fmt(kMarginLeft) + "\" y=\"" + fmt(kMarginTop) + "\" width=\"" + fmt(f.w) + "\" height=\"" +
         fmt(f.h) + "\" fill=\"none\" stroke=\"#888\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double xv = f.xr.lo + (f.xr.hi - f.xr.lo) * i / 4.0;
    const double yv = f.yr.lo + (f.yr.hi - f.yr.lo) * i / 4.0;
    out += "<text x=\"" + fmt(f.px(xv)) + "\" y=\"" + fmt(kMarginTop + f.h + 14) + "\" text-anchor=\"middle\">" +
           fmt_tick(xv) + "</text>\n";
    out += "<text x=\"" + fmt(kMarginLeft - 4) + "\" y=\"" + fmt(f.py(yv) + 4) + "\" text-anchor=\"end\">" +
           fmt_tick(yv) + "</text>\n";
  }
  if (!plot.title.empty()) {
    out += "<text x=\"" + fmt(plot.width / 2.0) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(plot.title) + "</text>\n";
  }
  if (!plot.x_label.empty()) {
    out += "<text x=\"" + fmt(kMarginLeft + f.w / 2) + "\" y=\"" + fmt(plot.height - 10.0) +
           "\" text-anchor=\"middle\">" + escape(plot.x_label) + "</text>\n";
  }
  if (!plot.y_label.empty()) {
    out += "<text x=\"14\" y=\"" + fmt(kMarginTop + f.h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
           fmt(kMarginTop + f.h / 2) + ")\">" + escape(plot.y_label) + "</text>\n";
  }

  for (const auto& b : plot.bands) {
    const std::size_t n = std::min({b.x.size(), b.lo.size(), b.hi.size()});
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(b.x[i]);
      ys.push_back(b.hi[i]);
    }
    for (std::size_t i = n; i-- > 0;) {
      xs.push_back(b.x[i]);
      ys.push_back(b.lo[i]);
    }
    out += "<polygon points=\"" + polyline_points(f, xs, ys) + "\" fill=\"" + b.color + "\" fill-opacity=\"" +
           fmt(b.opacity) + "\" stroke=\"none\"/>\n";
  }
  for (const auto& l : plot.lines) {
    out += "<polyline points=\"" + polyline_points(f, l.x, l.y) + "\" fill=\"none\" stroke=\"" + l.color +
           "\" stroke-width=\"1.5\"" + (l.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
  }
  for (const auto& s : plot.scatters) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
        continue;
      }
      out += "<circle cx=\"" + fmt(f.px(s.x[i])) + "\" cy=\"" + fmt(f.py(s.y[i])) + "\" r=\"" + fmt(s.radius) +
             "\" fill=\"" + s.color + "\"/>\n";
    }
  }

  // Legend, one row per labelled series.
  double ly = kMarginTop + 12;
  auto legend = [&](const std::string& label, const std::string& color) {
    if (label.empty()) {
      return;
    }
    out += "<rect x=\"" + fmt(kMarginLeft + 8) + "\" y=\"" + fmt(ly - 8) + "\" width=\"12\" height=\"8\" fill=\"" +
           color + "\"/>\n";
    out += "<text x=\"" + fmt(kMarginLeft + 24) + "\" y=\"" + fmt(ly) + "\">" + escape(label) + "</text>\n";
    ly += 14;
  };
  for (const auto& b : plot.bands) legend(b.label, b.color);
  for (const auto& l : plot.lines) legend(l.label, l.color);
  for (const auto& s : plot.scatters) legend(s.label, s.color);

  out += "</svg>\n";
  return out;
}

void write_svg(const Plot& plot, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << render_svg(plot);
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

}  // namespace evireg
