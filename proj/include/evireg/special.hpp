#pragma once

// Scalar special functions used by the evidential losses. Everything here is
// implemented in-repo so loss values do not depend on the platform libm's
// lgamma/digamma.

namespace evireg {

/// log(1 + e^x) without overflow for large x or underflow for very negative x.
[[nodiscard]] double softplus(double x) noexcept;

/// 1 / (1 + e^-x), evaluated on the branch that never overflows.
[[nodiscard]] double sigmoid(double x) noexcept;

/// log(e^u - 1) for u > 0.
[[nodiscard]] double log_expm1(double u);

/// log Gamma(x) for x > 0. Shifts x upward to at least 10 with the recurrence
/// and then evaluates the Stirling series.
[[nodiscard]] double lgamma(double x);

/// psi(x) = d/dx log Gamma(x) for x > 0, same shift-then-asymptotic scheme.
[[nodiscard]] double digamma(double x);

}  // namespace evireg
