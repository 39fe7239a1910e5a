#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "doctest.h"
#include "evireg/dataset.hpp"

using namespace evireg;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "evireg_dataset_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

std::string linear_csv(int rows) {
  std::string text = "a,b,const,y\n";
  for (int i = 0; i < rows; ++i) {
    text += std::to_string(i) + "," + std::to_string((i * 7) % 13) + ",5," + std::to_string(2 * i + (i % 3)) + "\n";
  }
  return text;
}

}  // namespace

TEST_CASE("cubic supports and noiseless targets") {
  const CubicSplit s = gen_cubic(1000, 1);
  CHECK(s.train.size() == 1000);
  CHECK(s.test.size() == 400);
  for (Eigen::Index i = 0; i < s.train.size(); ++i) {
    const double x = s.train.inputs(i, 0);
    CHECK(x >= -4.0);
    CHECK(x <= 4.0);
    CHECK((*s.train.clean_targets)(i, 0) == x * x * x);
  }
  for (Eigen::Index i = 0; i < s.test.size(); ++i) {
    const double ax = std::fabs(s.test.inputs(i, 0));
    CHECK(ax > 4.0);
    CHECK(ax <= 6.0);
  }
  CHECK(s.test.inputs.minCoeff() == -6.0);
  CHECK(s.test.inputs.maxCoeff() == 6.0);
  const Dataset g = gen_cubic_grid(5, -2, 2, 0);
  CHECK((*g.clean_targets)(3, 0) == 1.0);
  CHECK(g.inputs(4, 0) == 2.0);
  CHECK((*gen_cubic_grid(3, 2, 4, 0).clean_targets)(0, 0) == 8.0);
}

TEST_CASE("cubic noise has standard deviation 3") {
  const CubicSplit s = gen_cubic(100000, 5);
  const Eigen::ArrayXd noise = (s.train.targets - *s.train.clean_targets).col(0).array();
  const double sd = std::sqrt((noise - noise.mean()).square().mean());
  CHECK(sd == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("generators are pure functions of their seed") {
  CHECK(gen_cubic(50, 9).train.targets == gen_cubic(50, 9).train.targets);
  CHECK(gen_cubic(50, 9).train.targets != gen_cubic(50, 10).train.targets);
  CHECK(gen_circle(50, 9).targets == gen_circle(50, 9).targets);
  CHECK(gen_circle(50, 9).inputs != gen_circle(50, 10).inputs);
}

TEST_CASE("circle radius and angle density") {
  const Dataset d = gen_circle(100000, 3);
  int off_ring = 0;
  int near_pi = 0;
  int near_zero = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    off_ring += std::fabs(d.targets.row(i).norm() - 1.0) >= 0.5;
    const double t = d.inputs(i, 0);
    CHECK(t >= 0.0);
    CHECK(t <= 2 * std::numbers::pi);
    near_pi += std::fabs(t - std::numbers::pi) <= 0.3;
    near_zero += t <= 0.6;
  }
  CHECK(off_ring <= 10);
  CHECK(near_pi < near_zero);

  CHECK(circle_valley_inverse_cdf(0.0) == 0.0);
  CHECK(circle_valley_inverse_cdf(0.5) == doctest::Approx(std::numbers::pi));
  CHECK(circle_valley_inverse_cdf(1.0) == doctest::Approx(2 * std::numbers::pi));
  CHECK_THROWS((void)circle_valley_inverse_cdf(1.5));

  CircleOptions literal;
  literal.sampling = CircleAngleSampling::LiteralTransform;
  const Dataset l = gen_circle(1000, 3, literal);
  CHECK(l.inputs.minCoeff() >= 0.0);
  CHECK(l.inputs.maxCoeff() <= 1.0);
}

TEST_CASE("csv split standardizes with training rows only") {
  const auto path = write_temp("linear.csv", linear_csv(60));
  const TabularSplits s = load_csv(path, {"y"}, {0.8, 2, 4});
  REQUIRE(s.splits.size() == 2);
  REQUIRE(s.warnings.size() == 1);
  CHECK(s.warnings[0].find("const") != std::string::npos);
  const auto& [train, test] = s.splits[0];
  CHECK(train.size() == 48);
  CHECK(test.size() == 12);
  CHECK(train.inputs.cols() == 2);
  CHECK(train.input_names == std::vector<std::string>{"a", "b"});
  for (Eigen::Index c = 0; c < train.inputs.cols(); ++c) {
    const Eigen::ArrayXd col = train.inputs.col(c).array();
    CHECK(std::fabs(col.mean()) < 1e-10);
    CHECK(std::fabs(std::sqrt(col.square().mean()) - 1.0) < 1e-10);
  }
  // leakage: stats recomputed from the de-standardized training rows match the stored ones
  const Eigen::MatrixXd raw_inputs =
      (train.inputs.array().rowwise() * train.input_stats.std.transpose().array()).rowwise() +
      train.input_stats.mean.transpose().array();
  const ColumnStats again = column_stats(raw_inputs);
  CHECK((again.mean - train.input_stats.mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((again.std - train.input_stats.std).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(test.input_stats.mean == train.input_stats.mean);
}

TEST_CASE("csv splits are seeded") {
  const auto path = write_temp("linear2.csv", linear_csv(40));
  const auto a = load_csv(path, {"y"}, {0.75, 2, 1});
  const auto b = load_csv(path, {"y"}, {0.75, 2, 1});
  CHECK(a.splits[0].first.targets == b.splits[0].first.targets);
  CHECK(a.splits[1].first.targets == b.splits[1].first.targets);
  CHECK(a.splits[0].first.targets != a.splits[1].first.targets);
}

TEST_CASE("csv errors") {
  CHECK_THROWS_AS((void)load_csv("/nonexistent/file.csv", {"y"}), std::runtime_error);
  const auto bad_cell = write_temp("bad.csv", "a,y\n1,2\n3,oops\n");
  try {
    (void)load_csv(bad_cell, {"y"});
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("oops") != std::string::npos);
    CHECK(msg.find("row 3") != std::string::npos);
  }
  const auto ok = write_temp("ok.csv", linear_csv(20));
  CHECK_THROWS((void)load_csv(ok, {"nope"}));
  CHECK_THROWS((void)load_csv(ok, {"const"}));
  CHECK_THROWS((void)load_csv(ok, {}));
  CHECK_THROWS((void)load_csv(ok, {"y"}, {1.0, 1, 0}));
}

TEST_CASE("export writes data and metadata") {
  const auto dir = std::filesystem::temp_directory_path() / "evireg_dataset_test";
  std::filesystem::create_directories(dir);
  export_dataset(gen_cubic(10, 2).train, dir / "cubic.csv");
  CHECK(std::filesystem::exists(dir / "cubic.csv"));
  CHECK(std::filesystem::exists(dir / "cubic.csv.meta.json"));
  std::ifstream in(dir / "cubic.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y");
}
