#include "evireg/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace evireg {

namespace {

constexpr double kShiftThreshold = 10.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error(std::string(fn) + ": argument must be finite and > 0, got " + std::to_string(x));
  }
}

// Stirling series for log Gamma(x), x >= 10. Bernoulli terms up to B_14.
double lgamma_asymptotic(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 1.0 / 156.0;
  series = series * inv2 - 691.0 / 360360.0;
  series = series * inv2 + 1.0 / 1188.0;
  series = series * inv2 - 1.0 / 1680.0;
  series = series * inv2 + 1.0 / 1260.0;
  series = series * inv2 - 1.0 / 360.0;
  series = series * inv2 + 1.0 / 12.0;
  series *= inv;
  constexpr double half_log_two_pi = 0.91893853320467274178032973640562;
  return (x - 0.5) * std::log(x) - x + half_log_two_pi + series;
}

double digamma_asymptotic(double x) {
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = -1.0 / 12.0;
  series = series * inv2 + 691.0 / 32760.0;
  series = series * inv2 - 1.0 / 132.0;
  series = series * inv2 + 1.0 / 240.0;
  series = series * inv2 - 1.0 / 252.0;
  series = series * inv2 + 1.0 / 120.0;
  series = series * inv2 - 1.0 / 12.0;
  series *= inv2;
  return std::log(x) - 0.5 * inv + series;
}

}  // namespace

double softplus(double x) noexcept {
  if (x > 30.0) {
    return x + std::exp(-x);
  }
  if (x < -30.0) {
    return std::exp(x);
  }
  return std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_expm1(double u) {
  require_positive(u, "log_expm1");
  // e^u - 1 = e^u (1 - e^-u)
  if (u > 30.0) {
    return u + std::log1p(-std::exp(-u));
  }
  return std::log(std::expm1(u));
}

double lgamma(double x) {
  require_positive(x, "lgamma");
  if (x >= kShiftThreshold) {
    return lgamma_asymptotic(x);
  }
  // log Gamma(x) = log Gamma(x + k) - log(x (x+1) ... (x+k-1))
  double product = 1.0;
  double shifted = x;
  while (shifted < kShiftThreshold) {
    product *= shifted;
    shifted += 1.0;
  }
  return lgamma_asymptotic(shifted) - std::log(product);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShiftThreshold) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  return acc + digamma_asymptotic(x);
}

}  // namespace evireg
