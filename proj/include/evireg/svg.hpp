#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace evireg {

struct LineSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  std::string label;
  bool dashed = false;
};

struct ScatterSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#444444";
  std::string label;
  double radius = 2.0;
};

/// Filled region between lo(x) and hi(x).
struct BandSeries {
  std::vector<double> x;
  std::vector<double> lo;
  std::vector<double> hi;
  std::string color = "#9ecae1";
  std::string label;
  double opacity = 0.5;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 420;
  /// Optional fixed y-range; when lo >= hi the range is taken from the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
  std::vector<BandSeries> bands;
  std::vector<LineSeries> lines;
  std::vector<ScatterSeries> scatters;
};

/// Renders to a standalone SVG document. Output depends only on the plot
/// contents; non-finite points are skipped.
[[nodiscard]] std::string render_svg(const Plot& plot);

void write_svg(const Plot& plot, const std::filesystem::path& path);

}  // namespace evireg
