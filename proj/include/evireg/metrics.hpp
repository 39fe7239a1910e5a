#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "evireg/model.hpp"
#include "evireg/nig.hpp"

namespace evireg {

struct CutoffCurve {
  std::vector<double> retained_fractions;
  std::vector<double> rmse_at_fraction;
};

struct CalibrationCurve {
  std::vector<double> expected_levels;
  std::vector<double> observed_frequencies;
  double calibration_error = 0.0;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1 entries
  std::vector<std::size_t> counts;
  std::vector<double> density;  // counts normalized to integrate to 1
};

struct HuaReport {
  double fraction_in_hua = 0.0;
  double mean_alpha = 0.0;
  double min_alpha = 0.0;
};

/// Multivariate analogue: membership is nu - (n + 1) < epsilon.
struct HuaReportMulti {
  double fraction_in_hua = 0.0;
  double mean_nu = 0.0;
  double min_nu = 0.0;
};

/// 0.05, 0.10, ..., 0.95
[[nodiscard]] std::vector<double> default_calibration_levels();
/// 0.1, 0.2, ..., 1.0
[[nodiscard]] std::vector<double> default_cutoff_fractions();

[[nodiscard]] double rmse(std::span<const double> preds, std::span<const double> targets);

/// Mean Student-t NLL. `target_std` converts a standardized-space NLL into
/// original units by adding log(target_std) per sample.
[[nodiscard]] double predictive_nll(std::span<const NIGParams> params, std::span<const double> targets,
                                    double target_std = 1.0);

/// Samples sorted by epistemic uncertainty (ascending, stable); RMSE of the
/// first ceil(f N) for each fraction f.
[[nodiscard]] CutoffCurve cutoff_curve(std::span<const NIGParams> params, std::span<const double> targets,
                                       std::span<const double> fractions);

/// Coverage of the central p-intervals of each sample's predictive
/// Student-t. A target lies in the central p-interval iff |F(y) - 1/2| <= p/2,
/// so one CDF evaluation per sample serves every level. Error is the mean of
/// (p - observed)^2.
[[nodiscard]] CalibrationCurve calibration(std::span<const NIGParams> params, std::span<const double> targets,
                                           std::span<const double> levels);

/// Gaussian differential entropy 1/2 log(2 pi e sigma^2).
[[nodiscard]] double entropy(double variance);

/// Fixed-edge histogram over [lo, hi]; values outside, including infinities,
/// are counted in the end bins. Throws on NaN.
[[nodiscard]] Histogram entropy_histogram(std::span<const double> values, double lo, double hi, int bins);

[[nodiscard]] HuaReport hua_escape_report(const Model& model, const Eigen::MatrixXd& inputs,
                                          double epsilon = kDefaultHuaEpsilon);
[[nodiscard]] HuaReportMulti hua_escape_report_multi(const Model& model, const Eigen::MatrixXd& inputs,
                                                     double epsilon = kDefaultHuaEpsilon);

}  // namespace evireg
