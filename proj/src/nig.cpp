#include "evireg/nig.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "evireg/quadrature.hpp"
#include "evireg/special.hpp"

namespace evireg {

namespace {

void require_student_t(const StudentTParams& st) {
  if (!(st.scale_sq > 0.0) || !(st.dof > 0.0) || !std::isfinite(st.loc) || !std::isfinite(st.scale_sq) ||
      !std::isfinite(st.dof)) {
    throw std::domain_error("StudentTParams: require finite loc, scale_sq > 0, dof > 0");
  }
}

// P(0 <= T <= z) for the standard Student-t, z >= 0.
double standard_t_half_mass(double z, double dof) {
  if (z <= 0.0) {
    return 0.0;
  }
  const double theta_max = std::atan(z / std::sqrt(dof));
  const double log_norm = lgamma(0.5 * (dof + 1.0)) - lgamma(0.5 * dof) - 0.5 * std::log(std::numbers::pi);
  const double norm = std::exp(log_norm);
  const double exponent = dof - 1.0;
  auto integrand = [exponent](double theta) { return std::pow(std::cos(theta), exponent); };
  return norm * integrate_adaptive(integrand, 0.0, theta_max, 1e-12, 40);
}

}  // namespace

std::string_view to_string(ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::SoftPlus:
      return "softplus";
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::Exp:
      return "exp";
  }
  return "softplus";
}

ActivationKind parse_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "softplus") {
    return ActivationKind::SoftPlus;
  }
  if (lower == "relu") {
    return ActivationKind::ReLU;
  }
  if (lower == "exp") {
    return ActivationKind::Exp;
  }
  throw std::invalid_argument("unknown activation '" + std::string(name) + "' (expected softplus, relu or exp)");
}

bool NIGParams::valid() const noexcept {
  return std::isfinite(gamma) && std::isfinite(v) && std::isfinite(alpha) && std::isfinite(beta) && v > 0.0 &&
         alpha >= 1.0 && beta > 0.0;
}

double alpha_activation(double o_alpha, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::SoftPlus:
      return softplus(o_alpha);
    case ActivationKind::ReLU:
      return std::max(0.0, o_alpha);
    case ActivationKind::Exp:
      return std::exp(o_alpha);
  }
  return softplus(o_alpha);
}

double alpha_activation_derivative(double o_alpha, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::SoftPlus:
      return sigmoid(o_alpha);
    case ActivationKind::ReLU:
      return o_alpha > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Exp:
      return std::exp(o_alpha);
  }
  return sigmoid(o_alpha);
}

NIGParams activate_head(const RawHead& raw, ActivationKind kind, double floor) {
  NIGParams p;
  p.gamma = raw.o_gamma;
  p.v = std::max(softplus(raw.o_v), floor);
  p.alpha = alpha_activation(raw.o_alpha, kind) + 1.0;
  p.beta = std::max(softplus(raw.o_beta), floor);
  return p;
}

PredictionSummary predict(const NIGParams& params) {
  if (!(params.alpha > 1.0)) {
    throw std::domain_error("predict: alpha must be > 1 (alpha = " + std::to_string(params.alpha) +
                            " lies in the high-uncertainty limit)");
  }
  if (!params.valid()) {
    throw std::domain_error("predict: invalid NIG parameters");
  }
  PredictionSummary s;
  s.prediction = params.gamma;
  // epistemic * v == aleatoric holds bit-exactly because aleatoric is formed from it.
  s.epistemic = params.beta / (params.v * (params.alpha - 1.0));
  s.aleatoric = s.epistemic * params.v;
  return s;
}

StudentTParams marginal_params(const NIGParams& params) {
  if (!params.valid()) {
    throw std::domain_error("marginal_params: invalid NIG parameters");
  }
  return {params.gamma, params.beta * (1.0 + params.v) / (params.v * params.alpha), 2.0 * params.alpha};
}

double student_t_logpdf(double y, const StudentTParams& st) {
  require_student_t(st);
  const double d = st.dof;
  const double r = y - st.loc;
  return lgamma(0.5 * (d + 1.0)) - lgamma(0.5 * d) - 0.5 * std::log(d * std::numbers::pi * st.scale_sq) -
         0.5 * (d + 1.0) * std::log1p(r * r / (d * st.scale_sq));
}

double student_t_cdf(double y, const StudentTParams& st) {
  require_student_t(st);
  const double z = (y - st.loc) / std::sqrt(st.scale_sq);
  if (std::isinf(z)) {
    return z > 0 ? 1.0 : 0.0;
  }
  const double half = standard_t_half_mass(std::fabs(z), st.dof);
  return z >= 0.0 ? 0.5 + half : 0.5 - half;
}

double student_t_quantile(double p, const StudentTParams& st) {
  require_student_t(st);
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("student_t_quantile: p must lie in (0, 1)");
  }
  if (p == 0.5) {
    return st.loc;
  }
  // Work on the standardized upper half: find z >= 0 with half_mass(z) = |p - 1/2|,
  // bisecting in theta = atan(z / sqrt(dof)) which lives in [0, pi/2).
  const double target = std::fabs(p - 0.5);
  double lo = 0.0;
  double hi = 0.5 * std::numbers::pi;
  const double root_dof = std::sqrt(st.dof);
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double z = root_dof * std::tan(mid);
    if (standard_t_half_mass(z, st.dof) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double z = root_dof * std::tan(0.5 * (lo + hi));
  const double offset = z * std::sqrt(st.scale_sq);
  return p > 0.5 ? st.loc + offset : st.loc - offset;
}

std::pair<double, double> student_t_central_interval(double level, const StudentTParams& st) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::domain_error("student_t_central_interval: level must lie in (0, 1)");
  }
  const double upper = student_t_quantile(0.5 + 0.5 * level, st);
  return {2.0 * st.loc - upper, upper};
}

double nig_logpdf(double mu, double sigma_sq, const NIGParams& params) {
  if (!(sigma_sq > 0.0)) {
    throw std::domain_error("nig_logpdf: sigma_sq must be > 0");
  }
  const double diff = mu - params.gamma;
  const double log_normal = 0.5 * std::log(params.v / (2.0 * std::numbers::pi * sigma_sq)) -
                            params.v * diff * diff / (2.0 * sigma_sq);
  const double log_inv_gamma = params.alpha * std::log(params.beta) - lgamma(params.alpha) -
                               (params.alpha + 1.0) * std::log(sigma_sq) - params.beta / sigma_sq;
  return log_normal + log_inv_gamma;
}

NIGDraw sample_nig(const NIGParams& params, Rng& rng) {
  // sigma^2 ~ InvGamma(alpha, beta)  <=>  1/sigma^2 ~ Gamma(alpha, scale = 1/beta)
  const double precision = rng.gamma(params.alpha) / params.beta;
  NIGDraw d;
  d.sigma_sq = 1.0 / precision;
  d.mu = rng.normal(params.gamma, std::sqrt(d.sigma_sq / params.v));
  return d;
}

double sample_observation(const NIGParams& params, Rng& rng) {
  const NIGDraw d = sample_nig(params, rng);
  return rng.normal(d.mu, std::sqrt(d.sigma_sq));
}

bool hua_membership(const NIGParams& params, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::domain_error("hua_membership: epsilon must be > 0");
  }
  return params.alpha - 1.0 < epsilon;
}

}  // namespace evireg
