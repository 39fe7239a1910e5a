#include "evireg/multivariate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "evireg/special.hpp"

namespace evireg {

namespace {

void require_shape(const RawHeadM& raw) {
  if (raw.n < 1 || raw.p.size() != multi_head_size(raw.n)) {
    throw std::invalid_argument("multivariate head: expected " + std::to_string(multi_head_size(raw.n)) +
                                " raw outputs for n = " + std::to_string(raw.n) + ", got " +
                                std::to_string(raw.p.size()));
  }
  if (!raw.p.allFinite()) {
    throw std::invalid_argument("multivariate head: raw outputs must be finite");
  }
}

void require_target(const NIWParams& params, const Eigen::VectorXd& y) {
  if (y.size() != params.mu0.size()) {
    throw std::invalid_argument("multivariate target has dimension " + std::to_string(y.size()) + ", expected " +
                                std::to_string(params.mu0.size()));
  }
}

// sech^2(x) without the cancellation of 1 - tanh^2(x).
double sech_squared(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

// With M = L L^T + e e^T / w, everything the loss and its gradient need
// comes from z = L^-1 e. The determinant lemma gives
// log|M| = 2 sum log L_jj + log(1 + q), q = |z|^2 / w, so M is never formed
// or refactorized.
struct NllPieces {
  double value;
  Eigen::VectorXd z;
  double q;
};

NllPieces mern_nll_pieces(const NIWParams& params, const Eigen::VectorXd& y, double r) {
  if (!(r > 0.0)) {
    throw std::invalid_argument("mern_nll: r must be > 0");
  }
  require_target(params, y);
  const int n = params.dim();
  const double nu = params.nu;
  const double w = r + nu;
  const Eigen::VectorXd z = params.L.triangularView<Eigen::Lower>().solve(y - params.mu0);
  const double q = z.squaredNorm() / w;
  const double sum_log_diag = params.L.diagonal().array().log().sum();
  // -nu/2 log|LL^T| + (nu+1)/2 log|M| = sum_log_diag + (nu+1)/2 log(1+q)
  const double value = lgamma(0.5 * (nu - n + 1.0)) - lgamma(0.5 * (nu + 1.0)) + 0.5 * n * std::log(w) +
                       sum_log_diag + 0.5 * (nu + 1.0) * std::log1p(q);
  if (!std::isfinite(value)) {
    throw std::runtime_error("mern_nll: non-finite value");
  }
  return {value, z, q};
}

}  // namespace

RawHeadM RawHeadM::zeros(int n) {
  return {n, Eigen::VectorXd::Zero(multi_head_size(n))};
}

double nu_lower_bound(int n) noexcept {
  return n + 1.0;
}

double nu_upper_bound(int n) noexcept {
  return static_cast<double>(n) * n + 4.0 * n + 1.0;
}

NIWParams transform_multi(const RawHeadM& raw) {
  require_shape(raw);
  const int n = raw.n;
  NIWParams out;
  out.mu0 = raw.p.head(n);
  out.L = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    out.L(j, j) = std::exp(raw.p(raw.log_diag_index(j)));
    for (int k = 0; k < j; ++k) {
      out.L(j, k) = raw.p(raw.lower_index(j, k));
    }
  }
  const double half_span = 0.5 * n * (n + 3);
  out.nu = 0.5 * n * (n + 5) + 1.0 + std::tanh(raw.p_nu()) * half_span;
  return out;
}

double mern_nll(const NIWParams& params, const Eigen::VectorXd& y, double r) {
  return mern_nll_pieces(params, y, r).value;
}

MultiPrediction predict_multi(const NIWParams& params) {
  const int n = params.dim();
  if (!(params.nu > nu_lower_bound(n))) {
    throw std::domain_error("predict_multi: nu must exceed n + 1 (nu = " + std::to_string(params.nu) + ")");
  }
  const Eigen::MatrixXd scale = params.L * params.L.transpose();
  MultiPrediction out;
  out.mean = params.mu0;
  // aleatoric is formed from epistemic so that epistemic * nu == aleatoric exactly.
  out.epistemic = scale / (params.nu - n - 1.0);
  out.aleatoric = out.epistemic * params.nu;
  if (n == 2) {
    out.experiment_uncertainty = scale / (params.nu - 3.0);
  }
  return out;
}

double unc_reg_multi(const RawHeadM& raw, const NIWParams& params, const Eigen::VectorXd& y) {
  require_target(params, y);
  // (n^2+3n)/(n^2+4n+1-nu) - 1 == e^{2 p_nu}, and the leading 1/2 cancels the 2.
  return -(y - params.mu0).norm() * raw.p_nu();
}

double unc_reg_multi_naive(const NIWParams& params, const Eigen::VectorXd& y) {
  require_target(params, y);
  const double n = params.dim();
  const double ratio = (n * n + 3.0 * n) / (n * n + 4.0 * n + 1.0 - params.nu) - 1.0;
  return -0.5 * (y - params.mu0).norm() * std::log(ratio);
}

double mern_total(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1, double r) {
  const NIWParams params = transform_multi(raw);
  double total = mern_nll(params, y, r);
  if (lambda1 != 0.0) {
    total += lambda1 * unc_reg_multi(raw, params, y);
  }
  return total;
}

Eigen::VectorXd grad_unc_reg_multi(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1,
                                   bool detach_error_in_U) {
  require_shape(raw);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(raw.p.size());
  if (lambda1 == 0.0) {
    return grad;
  }
  const Eigen::VectorXd err = y - raw.p.head(raw.n);
  const double norm = err.norm();
  grad(raw.nu_index()) = -lambda1 * norm;
  if (!detach_error_in_U && norm > 0.0) {
    grad.head(raw.n) = lambda1 * raw.p_nu() * err / norm;
  }
  return grad;
}

Eigen::VectorXd grad_multi(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1, double r,
                           bool detach_error_in_U) {
  const NIWParams params = transform_multi(raw);
  const NllPieces pieces = mern_nll_pieces(params, y, r);
  const int n = raw.n;
  const double nu = params.nu;
  const double w = r + nu;

  // M^-1 = (L L^T)^-1 - u u^T / (w (1 + q)) with u = L^-T z
  const auto lt = params.L.transpose().triangularView<Eigen::Upper>();
  const Eigen::VectorXd u = lt.solve(pieces.z);
  const double q1 = 1.0 + pieces.q;
  const Eigen::VectorXd m_inv_err = u / q1;
  // M^-1 L = L^-T (I - z z^T / (w (1 + q)))
  const Eigen::MatrixXd m_inv_l =
      lt.solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) - pieces.z * pieces.z.transpose() / (w * q1)));
  const double half_nu1 = 0.5 * (nu + 1.0);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(raw.p.size());

  // d log|M| / d mu0 = -2 M^-1 e / w
  grad.head(n) = -half_nu1 * 2.0 * m_inv_err / w;

  // d log|M| / dL = 2 M^-1 L
  for (int j = 0; j < n; ++j) {
    const double l_jj = params.L(j, j);
    grad(raw.log_diag_index(j)) = -nu + half_nu1 * 2.0 * m_inv_l(j, j) * l_jj;
    for (int k = 0; k < j; ++k) {
      grad(raw.lower_index(j, k)) = half_nu1 * 2.0 * m_inv_l(j, k);
    }
  }

  // d log|M| / d nu = -(e^T M^-1 e) / w^2, and e^T M^-1 e = w q / (1 + q)
  const double dnll_dnu = 0.5 * digamma(0.5 * (nu - n + 1.0)) - 0.5 * digamma(0.5 * (nu + 1.0)) + 0.5 * n / w +
                          0.5 * std::log1p(pieces.q) - half_nu1 * pieces.q / (q1 * w);
  const double dnu_dp = 0.5 * n * (n + 3) * sech_squared(raw.p_nu());
  grad(raw.nu_index()) = dnll_dnu * dnu_dp;

  grad += grad_unc_reg_multi(raw, y, lambda1, detach_error_in_U);
  return grad;
}

}  // namespace evireg
