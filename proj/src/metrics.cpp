#include "evireg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "evireg/losses.hpp"

namespace evireg {

namespace {

void require_pairs(std::size_t a, std::size_t b, const char* fn) {
  if (a == 0 || b == 0) {
    throw std::invalid_argument(std::string(fn) + ": empty input");
  }
  if (a != b) {
    throw std::invalid_argument(std::string(fn) + ": length mismatch");
  }
}

double epistemic_or_inf(const NIGParams& p) {
  if (!(p.alpha > 1.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return predict(p).epistemic;
}

}  // namespace

std::vector<double> default_calibration_levels() {
  std::vector<double> levels;
  for (int i = 1; i <= 19; ++i) {
    levels.push_back(0.05 * i);
  }
  return levels;
}

std::vector<double> default_cutoff_fractions() {
  std::vector<double> fractions;
  for (int i = 1; i <= 10; ++i) {
    fractions.push_back(0.1 * i);
  }
  fractions.back() = 1.0;
  return fractions;
}

double rmse(std::span<const double> preds, std::span<const double> targets) {
  require_pairs(preds.size(), targets.size(), "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(preds.size()));
}

double predictive_nll(std::span<const NIGParams> params, std::span<const double> targets, double target_std) {
  require_pairs(params.size(), targets.size(), "predictive_nll");
  if (!(target_std > 0.0)) {
    throw std::invalid_argument("predictive_nll: target_std must be > 0");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    sum += nll_loss(params[i], targets[i]);
  }
  return sum / static_cast<double>(params.size()) + std::log(target_std);
}

CutoffCurve cutoff_curve(std::span<const NIGParams> params, std::span<const double> targets,
                         std::span<const double> fractions) {
  require_pairs(params.size(), targets.size(), "cutoff_curve");
  if (fractions.empty()) {
    throw std::invalid_argument("cutoff_curve: no fractions given");
  }
  const std::size_t n = params.size();
  std::vector<double> epistemic(n);
  for (std::size_t i = 0; i < n; ++i) {
    epistemic[i] = epistemic_or_inf(params[i]);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return epistemic[a] < epistemic[b]; });

  CutoffCurve curve;
  double prev = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0) || f <= prev) {
      throw std::invalid_argument("cutoff_curve: fractions must be strictly increasing within (0, 1]");
    }
    prev = f;
    // Guard against f * n landing a hair above an integer.
    auto keep = static_cast<std::size_t>(std::ceil(f * static_cast<double>(n) - 1e-9));
    keep = std::clamp<std::size_t>(keep, 1, n);
    double sum = 0.0;
    for (std::size_t k = 0; k < keep; ++k) {
      const std::size_t i = order[k];
      const double d = params[i].gamma - targets[i];
      sum += d * d;
    }
    curve.retained_fractions.push_back(f);
    curve.rmse_at_fraction.push_back(std::sqrt(sum / static_cast<double>(keep)));
  }
  return curve;
}

CalibrationCurve calibration(std::span<const NIGParams> params, std::span<const double> targets,
                             std::span<const double> levels) {
  require_pairs(params.size(), targets.size(), "calibration");
  if (levels.empty()) {
    throw std::invalid_argument("calibration: no levels given");
  }
  for (double p : levels) {
    if (!(p > 0.0 && p < 1.0)) {
      throw std::invalid_argument("calibration: levels must lie in (0, 1)");
    }
  }
  const std::size_t n = params.size();
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) {
    centered[i] = std::fabs(student_t_cdf(targets[i], marginal_params(params[i])) - 0.5);
  }
  CalibrationCurve curve;
  double sq = 0.0;
  for (double p : levels) {
    const auto inside = std::count_if(centered.begin(), centered.end(), [p](double c) { return c <= 0.5 * p; });
    const double observed = static_cast<double>(inside) / static_cast<double>(n);
    curve.expected_levels.push_back(p);
    curve.observed_frequencies.push_back(observed);
    sq += (p - observed) * (p - observed);
  }
  curve.calibration_error = sq / static_cast<double>(levels.size());
  return curve;
}

double entropy(double variance) {
  if (!(variance > 0.0)) {
    throw std::domain_error("entropy: variance must be > 0");
  }
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

Histogram entropy_histogram(std::span<const double> values, double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) {
    throw std::invalid_argument("entropy_histogram: need bins >= 1 and hi > lo");
  }
  Histogram h;
  const double width = (hi - lo) / bins;
  for (int i = 0; i <= bins; ++i) {
    h.edges.push_back(i == bins ? hi : lo + width * i);
  }
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    if (std::isnan(v)) {
      throw std::invalid_argument("entropy_histogram: NaN value");
    }
    long bin = bins - 1;
    if (v < hi) {
      bin = v <= lo ? 0 : std::min<long>(static_cast<long>((v - lo) / width), bins - 1);
    }
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  const double total = static_cast<double>(values.size());
  for (auto c : h.counts) {
    h.density.push_back(total > 0 ? static_cast<double>(c) / (total * width) : 0.0);
  }
  return h;
}

HuaReport hua_escape_report(const Model& model, const Eigen::MatrixXd& inputs, double epsilon) {
  const std::vector<NIGParams> params = model.predict_nig(inputs);
  if (params.empty()) {
    throw std::invalid_argument("hua_escape_report: empty dataset");
  }
  HuaReport r;
  r.min_alpha = std::numeric_limits<double>::infinity();
  std::size_t inside = 0;
  double sum = 0.0;
  for (const auto& p : params) {
    inside += hua_membership(p, epsilon) ? 1 : 0;
    sum += p.alpha;
    r.min_alpha = std::min(r.min_alpha, p.alpha);
  }
  r.fraction_in_hua = static_cast<double>(inside) / static_cast<double>(params.size());
  r.mean_alpha = sum / static_cast<double>(params.size());
  return r;
}

HuaReportMulti hua_escape_report_multi(const Model& model, const Eigen::MatrixXd& inputs, double epsilon) {
  const std::vector<NIWParams> params = model.predict_niw(inputs);
  if (params.empty()) {
    throw std::invalid_argument("hua_escape_report_multi: empty dataset");
  }
  HuaReportMulti r;
  r.min_nu = std::numeric_limits<double>::infinity();
  std::size_t inside = 0;
  double sum = 0.0;
  const double bound = nu_lower_bound(model.head.n);
  for (const auto& p : params) {
    inside += (p.nu - bound < epsilon) ? 1 : 0;
    sum += p.nu;
    r.min_nu = std::min(r.min_nu, p.nu);
  }
  r.fraction_in_hua = static_cast<double>(inside) / static_cast<double>(params.size());
  r.mean_nu = sum / static_cast<double>(params.size());
  return r;
}

}  // namespace evireg
