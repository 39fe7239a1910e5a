#include "evireg/quadrature.hpp"

namespace evireg {

namespace {

struct Panel {
  double a;
  double b;
  double fa;
  double fm;
  double fb;
  double whole;
};

double simpson_recurse(const std::function<double(double)>& f, const Panel& p, double tol, int depth) {
  const double m = 0.5 * (p.a + p.b);
  const double lm = 0.5 * (p.a + m);
  const double rm = 0.5 * (m + p.b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
  const double right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
  const double delta = left + right - p.whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, {p.a, m, p.fa, flm, p.fm, left}, 0.5 * tol, depth - 1) +
         simpson_recurse(f, {m, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_adaptive(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  if (a == b) {
    return 0.0;
  }
  // Start from four panels so a narrow feature in the middle is not missed
  // by the very first Simpson estimate.
  constexpr int kInitialPanels = 4;
  const double width = (b - a) / kInitialPanels;
  double total = 0.0;
  for (int i = 0; i < kInitialPanels; ++i) {
    const double lo = a + width * i;
    const double hi = (i + 1 == kInitialPanels) ? b : lo + width;
    const double flo = f(lo);
    const double fhi = f(hi);
    const double fmid = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_recurse(f, {lo, hi, flo, fmid, fhi, whole}, tol / kInitialPanels, max_depth);
  }
  return total;
}

}  // namespace evireg
