#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "doctest.h"
#include "evireg/multivariate.hpp"
#include "evireg/rng.hpp"

using namespace evireg;

namespace {

RawHeadM random_raw(Rng& rng, int n, double lo = -2, double hi = 2) {
  RawHeadM raw = RawHeadM::zeros(n);
  for (Eigen::Index i = 0; i < raw.p.size(); ++i) {
    raw.p(i) = rng.uniform(lo, hi);
  }
  return raw;
}

Eigen::VectorXd random_vec(Rng& rng, int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = rng.uniform(lo, hi);
  }
  return v;
}

// Direct determinant form of the loss; independent of the Cholesky path.
double nll_by_determinants(const NIWParams& p, const Eigen::VectorXd& y, double r) {
  const int n = p.dim();
  const Eigen::VectorXd e = y - p.mu0;
  const Eigen::MatrixXd s = p.L * p.L.transpose();
  const double w = r + p.nu;
  return boost::math::lgamma(0.5 * (p.nu - n + 1)) - boost::math::lgamma(0.5 * (p.nu + 1)) + 0.5 * n * std::log(w) -
         0.5 * p.nu * std::log(s.determinant()) +
         0.5 * (p.nu + 1) * std::log((s + e * e.transpose() / w).determinant());
}

Eigen::VectorXd fd_gradient(const RawHeadM& raw, const Eigen::VectorXd& y, double lambda1, double h = 1e-5) {
  Eigen::VectorXd g(raw.p.size());
  for (Eigen::Index i = 0; i < raw.p.size(); ++i) {
    RawHeadM up = raw;
    RawHeadM dn = raw;
    up.p(i) += h;
    dn.p(i) -= h;
    g(i) = (mern_total(up, y, lambda1) - mern_total(dn, y, lambda1)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("head size and layout") {
  CHECK(multi_head_size(2) == 6);
  CHECK(multi_head_size(3) == 10);
  const RawHeadM raw = RawHeadM::zeros(3);
  CHECK(raw.nu_index() == 9);
  CHECK(raw.lower_index(1, 0) == 6);
  CHECK(raw.lower_index(2, 1) == 8);
}

TEST_CASE("transform reference values") {
  RawHeadM raw = RawHeadM::zeros(2);
  const NIWParams p = transform_multi(raw);
  CHECK(p.nu == 8.0);
  CHECK(p.L.isIdentity(0.0));
  raw.p(5) = -12;
  CHECK(transform_multi(raw).nu - 3.0 < 1e-8);
  raw.p(5) = 0.3;
  CHECK(transform_multi(raw).nu == doctest::Approx(8 + 5 * std::tanh(0.3)).epsilon(1e-15));
  CHECK_THROWS((void)transform_multi({2, Eigen::VectorXd::Zero(5)}));
}

TEST_CASE("transform image stays inside the bounds and yields SPD scale") {
  Rng rng(4);
  for (int n : {2, 3, 4}) {
    for (int i = 0; i < 300; ++i) {
      const RawHeadM raw = random_raw(rng, n, -8, 8);
      const NIWParams p = transform_multi(raw);
      CHECK(p.nu > nu_lower_bound(n));
      CHECK(p.nu < nu_upper_bound(n));
      CHECK((p.L.diagonal().array() > 0.0).all());
      // L L^T is refactorized only where its conditioning allows it
      const NIWParams moderate = transform_multi(random_raw(rng, n, -3, 3));
      Eigen::LLT<Eigen::MatrixXd> llt(moderate.L * moderate.L.transpose());
      CHECK(llt.info() == Eigen::Success);
      // the loss never refactorizes, so it stays finite across the whole box
      const Eigen::VectorXd y = random_vec(rng, n, -3, 3);
      CHECK(std::isfinite(mern_total(raw, y, 0.1)));
      CHECK(grad_multi(raw, y, 0.1).allFinite());
    }
  }
}

TEST_CASE("nll reference value and determinant oracle") {
  NIWParams p{Eigen::Vector2d(0.5, -0.5), Eigen::Matrix2d::Identity(), 8.0};
  const double expected = boost::math::lgamma(3.5) - boost::math::lgamma(4.5) + std::log(9.0);
  CHECK(mern_nll(p, p.mu0, 1.0) == doctest::Approx(expected).epsilon(1e-14));

  Rng rng(6);
  for (int n : {2, 3}) {
    for (int i = 0; i < 200; ++i) {
      const NIWParams q = transform_multi(random_raw(rng, n));
      const Eigen::VectorXd y = random_vec(rng, n, -3, 3);
      const double r = rng.uniform(0.1, 3);
      CHECK(mern_nll(q, y, r) == doctest::Approx(nll_by_determinants(q, y, r)).epsilon(1e-10));
    }
  }
  CHECK_THROWS((void)mern_nll(p, p.mu0, 0.0));
}

TEST_CASE("nll is translation and permutation invariant") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const NIWParams p = transform_multi(random_raw(rng, 2));
    const Eigen::VectorXd y = random_vec(rng, 2, -3, 3);
    const Eigen::VectorXd c = random_vec(rng, 2, -10, 10);
    NIWParams shifted = p;
    shifted.mu0 += c;
    CHECK(mern_nll(shifted, y + c) == doctest::Approx(mern_nll(p, y)).epsilon(1e-11));

    // swap coordinates: permute y, mu0 and L L^T symmetrically
    Eigen::Matrix2d perm;
    perm << 0, 1, 1, 0;
    const Eigen::Matrix2d s = perm * p.L * p.L.transpose() * perm.transpose();
    NIWParams swapped{perm * p.mu0, Eigen::MatrixXd(s.llt().matrixL()), p.nu};
    CHECK(mern_nll(swapped, perm * y) == doctest::Approx(mern_nll(p, y)).epsilon(1e-11));
  }
}

TEST_CASE("predictions") {
  const NIWParams p{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 8.0};
  const auto pred = predict_multi(p);
  CHECK(pred.aleatoric.isApprox(Eigen::Matrix2d::Identity() * 8.0 / 5.0, 1e-15));
  CHECK(pred.epistemic.isApprox(pred.aleatoric / 8.0, 1e-15));
  REQUIRE(pred.experiment_uncertainty.has_value());
  CHECK(pred.experiment_uncertainty->isApprox(Eigen::Matrix2d::Identity() / 5.0, 1e-15));
  CHECK((pred.epistemic * p.nu - pred.aleatoric).norm() == 0.0);

  double prev = 0.0;
  for (double p_nu = 0.0; p_nu >= -8.0; p_nu -= 0.5) {
    RawHeadM raw = RawHeadM::zeros(2);
    raw.p(5) = p_nu;
    const double trace = predict_multi(transform_multi(raw)).aleatoric.trace();
    CHECK(trace > prev);
    prev = trace;
  }
  CHECK_THROWS((void)predict_multi({Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity(), 3.0}));
}

TEST_CASE("uncertainty regularizer values") {
  RawHeadM raw = RawHeadM::zeros(2);
  raw.p(5) = -3.0;
  const Eigen::Vector2d y(0.6, 0.8);
  const NIWParams p = transform_multi(raw);
  CHECK(unc_reg_multi(raw, p, y) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::fabs(unc_reg_multi_naive(p, y) - 3.0) < 1e-9 * 3.0);

  raw.p(5) = 0.0;
  CHECK(unc_reg_multi(raw, transform_multi(raw), y) == 0.0);
  raw.p(5) = -5.0;
  CHECK(unc_reg_multi(raw, transform_multi(raw), Eigen::Vector2d::Zero()) == 0.0);
}

TEST_CASE("stable and naive regularizer agree on [-8, 8]") {
  Rng rng(8);
  for (double p_nu = -8.0; p_nu <= 8.0; p_nu += 0.25) {
    RawHeadM raw = random_raw(rng, 2);
    raw.p(5) = p_nu;
    const Eigen::VectorXd y = random_vec(rng, 2, -3, 3);
    const NIWParams p = transform_multi(raw);
    const double stable = unc_reg_multi(raw, p, y);
    CHECK(std::fabs(stable - unc_reg_multi_naive(p, y)) <= 1e-9 * std::max(1.0, std::fabs(stable)));
  }
}

TEST_CASE("gradient matches finite differences") {
  Rng rng(9);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const RawHeadM raw = random_raw(rng, 2);
    const Eigen::VectorXd y = random_vec(rng, 2, -3, 3);
    // with the literal error factor so the mean channels see the regularizer too
    const Eigen::VectorXd g = grad_multi(raw, y, 0.1, 1.0, false);
    const Eigen::VectorXd fd = fd_gradient(raw, y, 0.1);
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      worst = std::max(worst, std::fabs(g(k) - fd(k)) / std::max({1.0, std::fabs(g(k)), std::fabs(fd(k))}));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gradient on p_nu vanishes deep in the high-uncertainty area") {
  Rng rng(10);
  for (int i = 0; i < 500; ++i) {
    RawHeadM raw = random_raw(rng, 2);
    raw.p(5) = rng.uniform(-60, -12);
    const Eigen::VectorXd y = random_vec(rng, 2, -3, 3);
    CHECK(std::fabs(grad_multi(raw, y, 0.0)(5)) <= 1e-8);
  }
  RawHeadM raw = RawHeadM::zeros(2);
  raw.p(5) = -20;
  CHECK(std::fabs(grad_multi(raw, Eigen::Vector2d(1, 1), 0.0)(5)) <= 1e-8);
}

TEST_CASE("regularizer gradient on p_nu is minus the error norm") {
  RawHeadM raw = RawHeadM::zeros(2);
  raw.p(5) = -20;
  CHECK(grad_unc_reg_multi(raw, Eigen::Vector2d(1.2, 1.6), 1.0)(5) == -2.0);
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    RawHeadM r = random_raw(rng, 2);
    r.p(5) = rng.uniform(-1e3, 1e3);
    const Eigen::VectorXd y = random_vec(rng, 2, -3, 3);
    CHECK(grad_unc_reg_multi(r, y, 1.0)(5) == -(y - r.p.head(2)).norm());
  }
}
