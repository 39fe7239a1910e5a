#pragma once

// Independent numerical oracles shared by the unit and acceptance tests.
// Nothing here calls into the library's own densities or quadrature.

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace oracle {

inline double gaussian_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double inv_gamma_pdf(double s, double alpha, double beta) {
  return std::exp(alpha * std::log(beta) - boost::math::lgamma(alpha) - (alpha + 1.0) * std::log(s) - beta / s);
}

/// Integral over sigma^2 in (0, inf) of g(sigma^2), done in s = log sigma^2
/// so the inverse-gamma peak and its tail are both well resolved.
template <class F>
double integrate_log_variance(F g) {
  auto h = [&](double s) {
    const double v = std::exp(s);
    return g(v) * v;
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(h, -60.0, 25.0, 12, 1e-11);
}

/// Integral over mu in (-inf, inf) of f(mu), centered on `center` with width `scale`.
template <class F>
double integrate_real_line(F f, double center, double scale) {
  // f is Gaussian-like with width ~scale, nothing survives past 40 widths
  auto h = [&](double t) { return f(center + scale * t) * scale; };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(h, -40.0, 40.0, 10, 1e-11);
}

/// p(y) = int int N(y; mu, s) N(mu; gamma, s/v) InvGamma(s; alpha, beta) dmu ds by 2-D quadrature.
inline double nig_marginal_density(double y, double gamma, double v, double alpha, double beta) {
  return integrate_log_variance([&](double s) {
    const double inner = integrate_real_line(
        [&](double mu) { return gaussian_pdf(y, mu, s) * gaussian_pdf(mu, gamma, s / v); }, 0.5 * (y + gamma),
        std::sqrt(s));
    return inner * inv_gamma_pdf(s, alpha, beta);
  });
}

/// Location-scale Student-t CDF from boost.
inline double student_t_cdf(double y, double loc, double scale_sq, double dof) {
  boost::math::students_t_distribution<double> t(dof);
  return boost::math::cdf(t, (y - loc) / std::sqrt(scale_sq));
}

}  // namespace oracle
