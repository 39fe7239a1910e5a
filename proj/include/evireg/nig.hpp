#pragma once

#include <string_view>
#include <utility>

#include "evireg/rng.hpp"

namespace evireg {

/// Unconstrained network outputs for a univariate evidential head.
/// All gradient results in this library are expressed in these coordinates.
struct RawHead {
  double o_gamma = 0.0;
  double o_v = 0.0;
  double o_alpha = 0.0;
  double o_beta = 0.0;
};

/// Activation applied to o_alpha before the +1 offset. v and beta always
/// use SoftPlus and gamma is always linear.
enum class ActivationKind { SoftPlus, ReLU, Exp };

[[nodiscard]] std::string_view to_string(ActivationKind kind) noexcept;
/// Accepts "softplus", "relu", "exp" (case-insensitive). Throws on anything else.
[[nodiscard]] ActivationKind parse_activation(std::string_view name);

/// Normal-Inverse-Gamma parameters (gamma, v, alpha, beta).
struct NIGParams {
  double gamma = 0.0;
  double v = 1.0;
  double alpha = 2.0;
  double beta = 1.0;

  /// v > 0, alpha >= 1, beta > 0, all finite. alpha == 1 is admitted because
  /// the ReLU head reaches it exactly; predict() rejects it.
  [[nodiscard]] bool valid() const noexcept;
};

struct PredictionSummary {
  double prediction = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
};

/// Student-t with location, squared scale and degrees of freedom.
struct StudentTParams {
  double loc = 0.0;
  double scale_sq = 1.0;
  double dof = 1.0;
};

inline constexpr double kDefaultActivationFloor = 1e-12;
inline constexpr double kDefaultHuaEpsilon = 1e-3;

/// alpha activation without the +1 offset.
[[nodiscard]] double alpha_activation(double o_alpha, ActivationKind kind) noexcept;
/// Derivative of alpha_activation with respect to o_alpha. The ReLU branch
/// uses step(o > 0), so the kink itself has derivative 0.
[[nodiscard]] double alpha_activation_derivative(double o_alpha, ActivationKind kind) noexcept;

[[nodiscard]] NIGParams activate_head(const RawHead& raw, ActivationKind kind,
                                      double floor = kDefaultActivationFloor);

/// prediction = gamma, aleatoric = beta/(alpha-1), epistemic = beta/(v(alpha-1)).
/// Throws std::domain_error when alpha <= 1.
[[nodiscard]] PredictionSummary predict(const NIGParams& params);

[[nodiscard]] StudentTParams marginal_params(const NIGParams& params);

[[nodiscard]] double student_t_logpdf(double y, const StudentTParams& st);

/// CDF by adaptive quadrature of the density (tolerance ~1e-12 absolute).
/// Integrates in the angle variable t = sqrt(dof) tan(theta), which maps
/// the infinite tail onto a bounded interval with a smooth integrand.
[[nodiscard]] double student_t_cdf(double y, const StudentTParams& st);

/// Inverse of student_t_cdf by bisection; p in (0, 1).
[[nodiscard]] double student_t_quantile(double p, const StudentTParams& st);

/// Central interval holding probability `level` in (0, 1).
[[nodiscard]] std::pair<double, double> student_t_central_interval(double level, const StudentTParams& st);

/// log N(mu; gamma, sigma_sq / v) + log InvGamma(sigma_sq; alpha, beta).
[[nodiscard]] double nig_logpdf(double mu, double sigma_sq, const NIGParams& params);

struct NIGDraw {
  double mu = 0.0;
  double sigma_sq = 0.0;
};

[[nodiscard]] NIGDraw sample_nig(const NIGParams& params, Rng& rng);
/// Draws (mu, sigma^2) from the prior and then y ~ N(mu, sigma^2).
[[nodiscard]] double sample_observation(const NIGParams& params, Rng& rng);

/// True iff alpha - 1 < epsilon.
[[nodiscard]] bool hua_membership(const NIGParams& params, double epsilon = kDefaultHuaEpsilon);

}  // namespace evireg
