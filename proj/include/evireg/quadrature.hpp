#pragma once

#include <cmath>
#include <functional>

namespace evireg {

/// Adaptive Simpson quadrature on a finite interval. `tol` is an absolute
/// error target for the whole interval.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol = 1e-10,
                          int max_depth = 48);

}  // namespace evireg
