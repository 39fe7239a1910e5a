#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "evireg/metrics.hpp"
#include "evireg/rng.hpp"

using namespace evireg;

namespace {

std::vector<NIGParams> random_params(Rng& rng, int n) {
  std::vector<NIGParams> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({rng.uniform(-3, 3), rng.uniform(0.2, 5), rng.uniform(1.2, 5), rng.uniform(0.2, 5)});
  }
  return out;
}

}  // namespace

TEST_CASE("rmse") {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> b{2, 3, 4};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == 1.0);
  CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(3.5355339059).epsilon(1e-10));
  CHECK_THROWS((void)rmse(std::vector<double>{}, std::vector<double>{}));
  CHECK_THROWS((void)rmse(a, std::vector<double>{1, 2}));
}

TEST_CASE("predictive nll") {
  Rng rng(1);
  const auto params = random_params(rng, 50);
  std::vector<double> y;
  double manual = 0.0;
  for (const auto& p : params) {
    y.push_back(p.gamma + rng.normal());
    manual -= student_t_logpdf(y.back(), marginal_params(p));
  }
  manual /= 50;
  CHECK(predictive_nll(params, y) == doctest::Approx(manual).epsilon(1e-12));
  CHECK(predictive_nll(params, y, 2.0) == doctest::Approx(manual + std::log(2.0)).epsilon(1e-12));

  auto shifted = params;
  auto ys = y;
  for (std::size_t i = 0; i < shifted.size(); ++i) {
    shifted[i].gamma += 4.5;
    ys[i] += 4.5;
  }
  CHECK(predictive_nll(shifted, ys) == doctest::Approx(manual).epsilon(1e-10));
}

TEST_CASE("cutoff curve") {
  Rng rng(2);
  const auto fractions = default_cutoff_fractions();
  REQUIRE(fractions.size() == 10);

  // equal uncertainty: flat at the global rmse
  std::vector<NIGParams> flat(40, NIGParams{0, 1, 2, 1});
  std::vector<double> y, preds;
  for (auto& p : flat) {
    p.gamma = rng.normal();
    y.push_back(p.gamma + rng.normal());
    preds.push_back(p.gamma);
  }
  const auto c = cutoff_curve(flat, y, fractions);
  CHECK(c.rmse_at_fraction.back() == rmse(preds, y));
  CHECK(c.rmse_at_fraction.front() == rmse(std::span(preds).first(4), std::span(y).first(4)));

  // uncertainty equal to the absolute error: nondecreasing
  std::vector<NIGParams> ranked;
  std::vector<double> targets;
  for (int i = 0; i < 100; ++i) {
    const double err = rng.uniform(0, 3);
    ranked.push_back({0.0, 1.0, 2.0, err + 1e-3});
    targets.push_back(i % 2 ? err : -err);
  }
  const auto r = cutoff_curve(ranked, targets, fractions);
  for (std::size_t i = 1; i < r.rmse_at_fraction.size(); ++i) {
    CHECK(r.rmse_at_fraction[i] >= r.rmse_at_fraction[i - 1]);
  }
  CHECK_THROWS((void)cutoff_curve(ranked, targets, std::vector<double>{0.5, 0.4}));
  CHECK_THROWS((void)cutoff_curve(std::vector<NIGParams>{}, std::vector<double>{}, fractions));
}

TEST_CASE("calibration is self-consistent on the model's own predictive") {
  Rng rng(3);
  const auto params = random_params(rng, 10000);
  std::vector<double> y;
  for (const auto& p : params) {
    y.push_back(sample_observation(p, rng));
  }
  const auto curve = calibration(params, y, default_calibration_levels());
  REQUIRE(curve.expected_levels.size() == 19);
  CHECK(curve.calibration_error < 0.002);
  for (std::size_t i = 1; i < curve.observed_frequencies.size(); ++i) {
    CHECK(curve.observed_frequencies[i] >= curve.observed_frequencies[i - 1]);
  }
}

TEST_CASE("calibration with every target at the mean") {
  Rng rng(4);
  const auto params = random_params(rng, 30);
  std::vector<double> y;
  for (const auto& p : params) {
    y.push_back(p.gamma);
  }
  const auto levels = default_calibration_levels();
  const auto curve = calibration(params, y, levels);
  double expected = 0.0;
  for (double p : levels) {
    expected += (1 - p) * (1 - p);
  }
  expected /= static_cast<double>(levels.size());
  for (double o : curve.observed_frequencies) {
    CHECK(o == 1.0);
  }
  CHECK(curve.calibration_error == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("central interval shrinks with beta") {
  double prev = std::numeric_limits<double>::infinity();
  for (double beta : {10.0, 1.0, 0.1, 0.001}) {
    const auto [lo, hi] = student_t_central_interval(0.95, marginal_params({2.0, 10.0, 50.0, beta}));
    CHECK(lo < 2.0);
    CHECK(hi > 2.0);
    CHECK(hi - lo < prev);
    prev = hi - lo;
  }
}

TEST_CASE("entropy") {
  CHECK(std::fabs(entropy(1.0 / (2 * std::numbers::pi * std::numbers::e))) < 1e-15);
  CHECK(entropy(1.0) == doctest::Approx(1.41894).epsilon(1e-5));
  CHECK(entropy(2.0) - entropy(1.0) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(entropy(1.0001) > entropy(1.0));
  CHECK_THROWS((void)entropy(0.0));
}

TEST_CASE("entropy histogram") {
  const std::vector<double> v{-10, 0.1, 0.5, 0.9, 1.0, 3.0, std::numeric_limits<double>::infinity()};
  const Histogram h = entropy_histogram(v, 0.0, 1.0, 2);
  REQUIRE(h.edges.size() == 3);
  CHECK(h.counts[0] == 2);
  CHECK(h.counts[1] == 5);
  double integral = 0.0;
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    integral += h.density[i] * (h.edges[i + 1] - h.edges[i]);
  }
  CHECK(integral == doctest::Approx(1.0));
  CHECK_THROWS((void)entropy_histogram(std::vector<double>{std::nan("")}, 0, 1, 2));
  CHECK_THROWS((void)entropy_histogram(v, 1, 0, 2));
}

TEST_CASE("hua escape report") {
  MLPConfig c;
  c.hidden_widths = {10};
  Model m = Model::create(c, HeadSpec{});
  for (auto& layer : m.weights.layers) {
    layer.w.setZero();
  }
  Eigen::MatrixXd x = Eigen::VectorXd::LinSpaced(20, -4, 4);
  m.weights.layers.back().b(2) = -20.0;
  auto in = hua_escape_report(m, x);
  CHECK(in.fraction_in_hua == 1.0);
  CHECK(in.min_alpha > 1.0);
  m.weights.layers.back().b(2) = 5.0;
  auto out = hua_escape_report(m, x);
  CHECK(out.fraction_in_hua == 0.0);
  CHECK(out.mean_alpha == doctest::Approx(1.0 + std::log1p(std::exp(5.0))));
  CHECK_THROWS((void)hua_escape_report(m, Eigen::MatrixXd(0, 1)));
}
