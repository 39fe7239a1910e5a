#pragma once

#include <Eigen/Dense>
#include <optional>

namespace evireg {

/// Number of raw outputs a multivariate head needs for target dimension n:
/// n(n+3)/2 + 1.
[[nodiscard]] constexpr int multi_head_size(int n) noexcept {
  return n * (n + 3) / 2 + 1;
}

/// Raw outputs of a multivariate evidential head. Layout of `p`:
///   [0, n)                 mean mu0
///   [n, 2n)                log of the diagonal of L
///   [2n, 2n + n(n-1)/2)    strict lower triangle of L, row-major
///   last                   p_nu
struct RawHeadM {
  int n = 2;
  Eigen::VectorXd p;

  [[nodiscard]] static RawHeadM zeros(int n);
  [[nodiscard]] double p_nu() const { return p(p.size() - 1); }
  [[nodiscard]] int nu_index() const noexcept { return multi_head_size(n) - 1; }
  [[nodiscard]] int log_diag_index(int j) const noexcept { return n + j; }
  /// Index of L(j, k) for j > k.
  [[nodiscard]] int lower_index(int j, int k) const noexcept { return 2 * n + j * (j - 1) / 2 + k; }
};

/// Normal-Inverse-Wishart head parameters.
struct NIWParams {
  Eigen::VectorXd mu0;
  Eigen::MatrixXd L;  // lower triangular, positive diagonal
  double nu = 0.0;

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(mu0.size()); }
};

struct MultiPrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd aleatoric;
  Eigen::MatrixXd epistemic;
  /// L L^T / (nu - 3); only populated for n == 2.
  std::optional<Eigen::MatrixXd> experiment_uncertainty;
};

/// Lower and upper bounds of the nu image: (n + 1, n^2 + 4n + 1).
[[nodiscard]] double nu_lower_bound(int n) noexcept;
[[nodiscard]] double nu_upper_bound(int n) noexcept;

[[nodiscard]] NIWParams transform_multi(const RawHeadM& raw);

/// Multivariate evidential NLL with the additive constant dropped. r > 0.
[[nodiscard]] double mern_nll(const NIWParams& params, const Eigen::VectorXd& y, double r = 1.0);

[[nodiscard]] MultiPrediction predict_multi(const NIWParams& params);

/// Stable form -||y - mu0|| * p_nu of the multivariate uncertainty regularizer.
[[nodiscard]] double unc_reg_multi(const RawHeadM& raw, const NIWParams& params, const Eigen::VectorXd& y);

/// The regularizer evaluated literally from nu; reference only.
[[nodiscard]] double unc_reg_multi_naive(const NIWParams& params, const Eigen::VectorXd& y);

/// mern_nll + lambda1 * unc_reg_multi from raw outputs.
[[nodiscard]] double mern_total(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1, double r = 1.0);

/// Gradient of mern_total with respect to every raw channel. The p_nu
/// channel follows the chain dnu/dp_nu = n(n+3)/2 * sech^2(p_nu); the mean
/// and L channels use d log|M| = tr(M^-1 dM).
[[nodiscard]] Eigen::VectorXd grad_multi(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1,
                                         double r = 1.0, bool detach_error_in_U = true);

/// Contribution of lambda1 * L^U alone to the raw gradient.
[[nodiscard]] Eigen::VectorXd grad_unc_reg_multi(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1,
                                                 bool detach_error_in_U = true);

}  // namespace evireg
