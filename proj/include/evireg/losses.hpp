#pragma once

#include <functional>
#include <stdexcept>

#include "evireg/nig.hpp"

namespace evireg {

/// total = nll + lambda * evidence_reg + lambda1 * unc_reg
struct LossWeights {
  double lambda = 0.0;
  double lambda1 = 0.0;
  /// Treat |y - gamma| inside the uncertainty regularizer as a constant with
  /// respect to gamma. The literal (non-detached) mode pushes gamma away from
  /// y whenever o_alpha > 0.
  bool detach_error_in_U = true;
};

struct LossBreakdown {
  double nll = 0.0;
  double evidence_reg = 0.0;
  double unc_reg = 0.0;
  double total = 0.0;
};

/// d(loss)/d(raw output) for each head channel.
struct HeadGradient {
  double d_o_gamma = 0.0;
  double d_o_v = 0.0;
  double d_o_alpha = 0.0;
  double d_o_beta = 0.0;

  HeadGradient& operator+=(const HeadGradient& other) noexcept;
  [[nodiscard]] HeadGradient scaled(double factor) const noexcept;
};

/// Per-term gradients before weighting; grad_head combines them.
struct GradientTerms {
  HeadGradient nll;
  HeadGradient evidence_reg;
  HeadGradient unc_reg;
};

/// Thrown when the uncertainty regularizer is requested on a ReLU alpha head,
/// where alpha == 1 makes log(exp(alpha - 1) - 1) undefined.
class IncompatibleHeadError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Negative log marginal likelihood of y under the Student-t implied by the NIG.
[[nodiscard]] double nll_loss(const NIGParams& params, double y);

/// |y - gamma| * (2v + alpha)
[[nodiscard]] double evidence_reg(const NIGParams& params, double y);

/// -|y - gamma| * log(exp(alpha - 1) - 1), evaluated in the stable form for
/// the given head: -|y - gamma| * o_alpha for SoftPlus and
/// -|y - gamma| * log(expm1(e^o_alpha)) for Exp. Throws IncompatibleHeadError for ReLU.
[[nodiscard]] double unc_reg(const RawHead& raw, const NIGParams& params, double y, ActivationKind kind);

/// The regularizer evaluated literally from alpha. Reference only: it loses
/// all precision once alpha - 1 drops below ~1e-15.
[[nodiscard]] double unc_reg_naive(const NIGParams& params, double y);

[[nodiscard]] LossBreakdown total_loss(const RawHead& raw, double y, const LossWeights& w, ActivationKind kind,
                                       double floor = kDefaultActivationFloor);

[[nodiscard]] GradientTerms grad_terms(const RawHead& raw, double y, ActivationKind kind, bool detach_error_in_U,
                                       bool with_unc_reg, double floor = kDefaultActivationFloor);

/// Closed-form gradient of total_loss with respect to the raw head outputs.
[[nodiscard]] HeadGradient grad_head(const RawHead& raw, double y, const LossWeights& w, ActivationKind kind,
                                     double floor = kDefaultActivationFloor);

using HeadLossFn = std::function<double(const RawHead&, double)>;

/// Central finite differences of f(raw, y) in each raw coordinate.
/// Throws std::runtime_error naming the coordinate if a probe is non-finite.
[[nodiscard]] HeadGradient grad_check(const HeadLossFn& f, const RawHead& raw, double y, double h = 1e-5);

}  // namespace evireg
