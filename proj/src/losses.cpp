#include "evireg/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "evireg/special.hpp"

namespace evireg {

namespace {

// sign(0) = 0: a zero-error sample does not move gamma.
double sign(double x) noexcept {
  return static_cast<double>((x > 0.0) - (x < 0.0));
}

void require_params(const NIGParams& params, const char* fn) {
  if (!params.valid()) {
    throw std::domain_error(std::string(fn) + ": invalid NIG parameters");
  }
}

// d softplus(o)/do, zero where the activation floor is active.
double floored_softplus_derivative(double o, double floor) noexcept {
  return softplus(o) < floor ? 0.0 : sigmoid(o);
}

}  // namespace

HeadGradient& HeadGradient::operator+=(const HeadGradient& other) noexcept {
  d_o_gamma += other.d_o_gamma;
  d_o_v += other.d_o_v;
  d_o_alpha += other.d_o_alpha;
  d_o_beta += other.d_o_beta;
  return *this;
}

HeadGradient HeadGradient::scaled(double factor) const noexcept {
  return {d_o_gamma * factor, d_o_v * factor, d_o_alpha * factor, d_o_beta * factor};
}

double nll_loss(const NIGParams& params, double y) {
  require_params(params, "nll_loss");
  const auto& [gamma, v, alpha, beta] = params;
  const double omega = 2.0 * beta * (1.0 + v);
  const double err = y - gamma;
  return 0.5 * std::log(std::numbers::pi / v) - alpha * std::log(omega) +
         (alpha + 0.5) * std::log(err * err * v + omega) + lgamma(alpha) - lgamma(alpha + 0.5);
}

double evidence_reg(const NIGParams& params, double y) {
  require_params(params, "evidence_reg");
  return std::fabs(y - params.gamma) * (2.0 * params.v + params.alpha);
}

double unc_reg(const RawHead& raw, const NIGParams& params, double y, ActivationKind kind) {
  const double abs_err = std::fabs(y - params.gamma);
  switch (kind) {
    case ActivationKind::SoftPlus:
      // exp(softplus(o)) - 1 == e^o
      return -abs_err * raw.o_alpha;
    case ActivationKind::Exp:
      return -abs_err * log_expm1(std::exp(raw.o_alpha));
    case ActivationKind::ReLU:
      break;
  }
  throw IncompatibleHeadError("L^U incompatible with ReLU alpha-head: alpha reaches 1 exactly and "
                              "log(exp(alpha - 1) - 1) is undefined");
}

double unc_reg_naive(const NIGParams& params, double y) {
  return -std::fabs(y - params.gamma) * std::log(std::exp(params.alpha - 1.0) - 1.0);
}

LossBreakdown total_loss(const RawHead& raw, double y, const LossWeights& w, ActivationKind kind, double floor) {
  const NIGParams params = activate_head(raw, kind, floor);
  LossBreakdown out;
  out.nll = nll_loss(params, y);
  out.evidence_reg = evidence_reg(params, y);
  out.unc_reg = w.lambda1 != 0.0 ? unc_reg(raw, params, y, kind) : 0.0;
  out.total = out.nll + w.lambda * out.evidence_reg + w.lambda1 * out.unc_reg;
  return out;
}

GradientTerms grad_terms(const RawHead& raw, double y, ActivationKind kind, bool detach_error_in_U,
                         bool with_unc_reg, double floor) {
  const NIGParams params = activate_head(raw, kind, floor);
  const auto& [gamma, v, alpha, beta] = params;
  const double err = y - gamma;
  const double abs_err = std::fabs(err);
  const double omega = 2.0 * beta * (1.0 + v);
  const double denom = err * err * v + omega;

  const double dv_do = floored_softplus_derivative(raw.o_v, floor);
  const double dbeta_do = floored_softplus_derivative(raw.o_beta, floor);
  const double dalpha_do = alpha_activation_derivative(raw.o_alpha, kind);

  GradientTerms t;

  t.nll.d_o_gamma = 2.0 * v * (gamma - y) * (alpha + 0.5) / denom;
  const double dnll_dalpha = std::log1p(v * err * err / omega) + digamma(alpha) - digamma(alpha + 0.5);
  t.nll.d_o_alpha = dnll_dalpha * dalpha_do;
  const double dnll_dv = -0.5 / v - 2.0 * alpha * beta / omega + (alpha + 0.5) * (err * err + 2.0 * beta) / denom;
  t.nll.d_o_v = dnll_dv * dv_do;
  const double dnll_dbeta = -alpha / beta + (alpha + 0.5) * 2.0 * (1.0 + v) / denom;
  t.nll.d_o_beta = dnll_dbeta * dbeta_do;

  t.evidence_reg.d_o_gamma = -sign(err) * (2.0 * v + alpha);
  t.evidence_reg.d_o_v = 2.0 * abs_err * dv_do;
  t.evidence_reg.d_o_alpha = abs_err * dalpha_do;

  if (with_unc_reg) {
    switch (kind) {
      case ActivationKind::SoftPlus:
        t.unc_reg.d_o_alpha = -abs_err;
        if (!detach_error_in_U) {
          t.unc_reg.d_o_gamma = sign(err) * raw.o_alpha;
        }
        break;
      case ActivationKind::Exp: {
        // d/do [-|e| log(expm1(u))], u = e^o:  -|e| * u e^u / expm1(u) = -|e| * u / (1 - e^-u)
        const double u = std::exp(raw.o_alpha);
        t.unc_reg.d_o_alpha = -abs_err * (u / -std::expm1(-u));
        if (!detach_error_in_U) {
          t.unc_reg.d_o_gamma = sign(err) * log_expm1(u);
        }
        break;
      }
      case ActivationKind::ReLU:
        throw IncompatibleHeadError("L^U incompatible with ReLU alpha-head: alpha reaches 1 exactly and "
                                    "log(exp(alpha - 1) - 1) is undefined");
    }
  }
  return t;
}

HeadGradient grad_head(const RawHead& raw, double y, const LossWeights& w, ActivationKind kind, double floor) {
  const GradientTerms t = grad_terms(raw, y, kind, w.detach_error_in_U, w.lambda1 != 0.0, floor);
  HeadGradient g = t.nll;
  g += t.evidence_reg.scaled(w.lambda);
  g += t.unc_reg.scaled(w.lambda1);
  return g;
}

HeadGradient grad_check(const HeadLossFn& f, const RawHead& raw, double y, double h) {
  if (!(h > 0.0)) {
    throw std::invalid_argument("grad_check: step must be > 0");
  }
  auto central = [&](double RawHead::*field, const char* name) {
    RawHead plus = raw;
    RawHead minus = raw;
    plus.*field += h;
    minus.*field -= h;
    const double fp = f(plus, y);
    const double fm = f(minus, y);
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error(std::string("grad_check: non-finite loss while probing ") + name);
    }
    return (fp - fm) / (2.0 * h);
  };
  HeadGradient g;
  g.d_o_gamma = central(&RawHead::o_gamma, "o_gamma");
  g.d_o_v = central(&RawHead::o_v, "o_v");
  g.d_o_alpha = central(&RawHead::o_alpha, "o_alpha");
  g.d_o_beta = central(&RawHead::o_beta, "o_beta");
  return g;
}

}  // namespace evireg
