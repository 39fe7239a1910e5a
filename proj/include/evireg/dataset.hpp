#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace evireg {

/// Per-column affine standardization: z = (x - mean) / std.
struct ColumnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  [[nodiscard]] bool empty() const noexcept { return mean.size() == 0; }
};

struct Dataset {
  std::string name;
  std::uint64_t seed = 0;
  Eigen::MatrixXd inputs;   // N x d
  Eigen::MatrixXd targets;  // N x k
  /// Noise-free targets when the generator knows them.
  std::optional<Eigen::MatrixXd> clean_targets;
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;
  /// Statistics of the training rows used to standardize this split; empty
  /// when the data is in original units.
  ColumnStats input_stats;
  ColumnStats target_stats;

  [[nodiscard]] Eigen::Index size() const noexcept { return inputs.rows(); }
};

struct CubicOptions {
  double noise_std = 3.0;
  double train_lo = -4.0;
  double train_hi = 4.0;
  double test_outer = 6.0;
  int test_points_per_side = 200;
};

struct CubicSplit {
  Dataset train;
  /// Out-of-distribution grid over [-6, -4) U (4, 6].
  Dataset test;
};

/// y = x^3 + eps, eps ~ N(0, noise_std^2), x uniform on [-4, 4].
[[nodiscard]] CubicSplit gen_cubic(int n_train, std::uint64_t seed, const CubicOptions& options = {});

/// Evenly spaced x over [lo, hi] with noisy targets drawn from `seed` and the
/// noiseless x^3 kept in clean_targets.
[[nodiscard]] Dataset gen_cubic_grid(int count, double lo, double hi, std::uint64_t seed, double noise_std = 3.0);

enum class CircleAngleSampling {
  /// t drawn from the normalized valley density on [0, 2pi] by inverse CDF.
  ValleyDensity,
  /// t = |1 - zeta / pi| with zeta uniform on [0, 2pi].
  LiteralTransform,
};

struct CircleOptions {
  double noise_std = 0.1;
  CircleAngleSampling sampling = CircleAngleSampling::ValleyDensity;
};

/// Input t, target ((1 + eps) cos t, (1 + eps) sin t).
[[nodiscard]] Dataset gen_circle(int n, std::uint64_t seed, const CircleOptions& options = {});

/// Noise-free circle on an even grid of t over [0, 2pi].
[[nodiscard]] Dataset gen_circle_grid(int count);

/// Inverse CDF of the valley density p(t) proportional to |1 - t/pi| on [0, 2pi].
[[nodiscard]] double circle_valley_inverse_cdf(double u);

struct SplitOptions {
  double train_frac = 0.9;
  int repeats = 1;
  std::uint64_t seed = 0;
};

struct TabularSplits {
  std::vector<std::pair<Dataset, Dataset>> splits;
  std::vector<std::string> warnings;
};

/// Numeric CSV with a header row. Per repeat: seeded permutation, train/test
/// split, z-scoring of inputs and targets with training-row statistics.
/// Constant feature columns are dropped with a warning. Throws
/// std::runtime_error for unreadable files, non-numeric cells (row and column
/// named), unknown target columns and constant targets.
[[nodiscard]] TabularSplits load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_cols,
                                     const SplitOptions& split = {});

/// Writes inputs and targets as CSV plus `<path>.meta.json` with the seed and
/// standardization statistics.
void export_dataset(const Dataset& data, const std::filesystem::path& path);

[[nodiscard]] ColumnStats column_stats(const Eigen::MatrixXd& m);

}  // namespace evireg
