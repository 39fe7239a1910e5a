#include "evireg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "evireg/rng.hpp"
#include "json.hpp"

namespace evireg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) {
    out.push_back(trim(field));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) {
    return false;
  }
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (*begin == '+') {
    ++begin;
  }
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& m, const ColumnStats& stats) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    out.col(c) = (m.col(c).array() - stats.mean(c)) / stats.std(c);
  }
  return out;
}

nlohmann::json stats_to_json(const ColumnStats& stats) {
  if (stats.empty()) {
    return nullptr;
  }
  return {{"mean", std::vector<double>(stats.mean.data(), stats.mean.data() + stats.mean.size())},
          {"std", std::vector<double>(stats.std.data(), stats.std.data() + stats.std.size())}};
}

}  // namespace

ColumnStats column_stats(const Eigen::MatrixXd& m) {
  ColumnStats stats;
  stats.mean = m.colwise().mean().transpose();
  stats.std.resize(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double var = (m.col(c).array() - stats.mean(c)).square().mean();
    stats.std(c) = std::sqrt(var);
  }
  return stats;
}

CubicSplit gen_cubic(int n_train, std::uint64_t seed, const CubicOptions& options) {
  if (n_train < 1) {
    throw std::invalid_argument("gen_cubic: n_train must be >= 1");
  }
  if (options.test_points_per_side < 1) {
    throw std::invalid_argument("gen_cubic: test_points_per_side must be >= 1");
  }
  Rng rng(seed);
  CubicSplit out;
  Dataset& train = out.train;
  train.name = "cubic-train";
  train.seed = seed;
  train.inputs.resize(n_train, 1);
  train.targets.resize(n_train, 1);
  Eigen::MatrixXd clean(n_train, 1);
  for (int i = 0; i < n_train; ++i) {
    const double x = rng.uniform(options.train_lo, options.train_hi);
    const double noise = rng.normal(0.0, options.noise_std);
    train.inputs(i, 0) = x;
    clean(i, 0) = x * x * x;
    train.targets(i, 0) = clean(i, 0) + noise;
  }
  train.clean_targets = std::move(clean);
  train.input_names = {"x"};
  train.target_names = {"y"};

  // Left side [-outer, lo) starts at -outer; right side (hi, outer] ends at outer.
  const int per_side = options.test_points_per_side;
  const double left_step = (options.train_lo + options.test_outer) / per_side;
  const double right_step = (options.test_outer - options.train_hi) / per_side;
  Dataset& test = out.test;
  test.name = "cubic-test-ood";
  test.seed = seed;
  test.inputs.resize(2 * per_side, 1);
  test.targets.resize(2 * per_side, 1);
  Eigen::MatrixXd test_clean(2 * per_side, 1);
  for (int i = 0; i < per_side; ++i) {
    test.inputs(i, 0) = -options.test_outer + left_step * i;
    test.inputs(per_side + i, 0) = options.train_hi + right_step * (i + 1);
  }
  test.inputs(2 * per_side - 1, 0) = options.test_outer;
  for (int i = 0; i < 2 * per_side; ++i) {
    const double x = test.inputs(i, 0);
    test_clean(i, 0) = x * x * x;
    test.targets(i, 0) = test_clean(i, 0) + rng.normal(0.0, options.noise_std);
  }
  test.clean_targets = std::move(test_clean);
  test.input_names = {"x"};
  test.target_names = {"y"};
  return out;
}

Dataset gen_cubic_grid(int count, double lo, double hi, std::uint64_t seed, double noise_std) {
  if (count < 2) {
    throw std::invalid_argument("gen_cubic_grid: count must be >= 2");
  }
  Rng rng(seed);
  Dataset d;
  d.name = "cubic-grid";
  d.seed = seed;
  d.inputs.resize(count, 1);
  d.targets.resize(count, 1);
  Eigen::MatrixXd clean(count, 1);
  for (int i = 0; i < count; ++i) {
    const double x = (i + 1 == count) ? hi : lo + (hi - lo) * i / (count - 1);
    d.inputs(i, 0) = x;
    clean(i, 0) = x * x * x;
    d.targets(i, 0) = clean(i, 0) + rng.normal(0.0, noise_std);
  }
  d.clean_targets = std::move(clean);
  d.input_names = {"x"};
  d.target_names = {"y"};
  return d;
}

double circle_valley_inverse_cdf(double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    throw std::domain_error("circle_valley_inverse_cdf: u must lie in [0, 1]");
  }
  // F(t) = (t - t^2 / (2 pi)) / pi on [0, pi]; mirrored on (pi, 2 pi].
  constexpr double pi = std::numbers::pi;
  if (u <= 0.5) {
    return pi * (1.0 - std::sqrt(1.0 - 2.0 * u));
  }
  return pi * (1.0 + std::sqrt(2.0 * u - 1.0));
}

Dataset gen_circle(int n, std::uint64_t seed, const CircleOptions& options) {
  if (n < 1) {
    throw std::invalid_argument("gen_circle: n must be >= 1");
  }
  Rng rng(seed);
  Dataset d;
  d.name = "circle";
  d.seed = seed;
  d.inputs.resize(n, 1);
  d.targets.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    const double zeta = 2.0 * std::numbers::pi * rng.uniform();
    double t = 0.0;
    if (options.sampling == CircleAngleSampling::ValleyDensity) {
      t = circle_valley_inverse_cdf(zeta / (2.0 * std::numbers::pi));
    } else {
      t = std::fabs(1.0 - zeta / std::numbers::pi);
    }
    const double radius = 1.0 + rng.normal(0.0, options.noise_std);
    d.inputs(i, 0) = t;
    d.targets(i, 0) = radius * std::cos(t);
    d.targets(i, 1) = radius * std::sin(t);
  }
  d.input_names = {"t"};
  d.target_names = {"x", "y"};
  return d;
}

Dataset gen_circle_grid(int count) {
  if (count < 2) {
    throw std::invalid_argument("gen_circle_grid: count must be >= 2");
  }
  Dataset d;
  d.name = "circle-grid";
  d.inputs.resize(count, 1);
  d.targets.resize(count, 2);
  for (int i = 0; i < count; ++i) {
    const double t = 2.0 * std::numbers::pi * i / (count - 1);
    d.inputs(i, 0) = t;
    d.targets(i, 0) = std::cos(t);
    d.targets(i, 1) = std::sin(t);
  }
  d.clean_targets = d.targets;
  d.input_names = {"t"};
  d.target_names = {"x", "y"};
  return d;
}

TabularSplits load_csv(const std::filesystem::path& path, const std::vector<std::string>& target_cols,
                       const SplitOptions& split) {
  if (target_cols.empty()) {
    throw std::invalid_argument("load_csv: at least one target column is required");
  }
  if (!(split.train_frac > 0.0 && split.train_frac < 1.0)) {
    throw std::invalid_argument("load_csv: train_frac must lie in (0, 1)");
  }
  if (split.repeats < 1) {
    throw std::invalid_argument("load_csv: repeats must be >= 1");
  }
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("load_csv: " + path.string() + " is empty");
  }
  const std::vector<std::string> header = split_fields(line);
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) {
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                               " fields, header has " + std::to_string(header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c])) {
        throw std::runtime_error("load_csv: non-numeric cell '" + fields[c] + "' at row " + std::to_string(line_no) +
                                 ", column '" + header[c] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) {
    throw std::runtime_error("load_csv: need at least two data rows");
  }

  std::vector<std::size_t> target_idx;
  for (const auto& name : target_cols) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw std::runtime_error("load_csv: missing target column '" + name + "'");
    }
    target_idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  TabularSplits out;
  std::vector<std::size_t> feature_idx;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (std::find(target_idx.begin(), target_idx.end(), c) != target_idx.end()) {
      continue;
    }
    const bool constant = std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r[c] == rows[0][c]; });
    if (constant) {
      out.warnings.push_back("dropping constant feature column '" + header[c] + "'");
      continue;
    }
    feature_idx.push_back(c);
  }
  if (feature_idx.empty()) {
    throw std::runtime_error("load_csv: no non-constant feature columns");
  }

  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n_rows, static_cast<Eigen::Index>(feature_idx.size()));
  Eigen::MatrixXd y(n_rows, static_cast<Eigen::Index>(target_idx.size()));
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < feature_idx.size(); ++c) {
      x(r, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(r)][feature_idx[c]];
    }
    for (std::size_t c = 0; c < target_idx.size(); ++c) {
      y(r, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(r)][target_idx[c]];
    }
  }
  std::vector<std::string> input_names;
  for (auto c : feature_idx) {
    input_names.push_back(header[c]);
  }

  auto n_train = static_cast<std::size_t>(std::llround(split.train_frac * static_cast<double>(rows.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, rows.size() - 1);

  Rng rng(split.seed);
  for (int rep = 0; rep < split.repeats; ++rep) {
    const std::vector<std::size_t> perm = rng.permutation(rows.size());
    const std::vector<std::size_t> train_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    const std::vector<std::size_t> test_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());

    const Eigen::MatrixXd x_train = gather_rows(x, train_rows);
    const Eigen::MatrixXd y_train = gather_rows(y, train_rows);
    ColumnStats x_stats = column_stats(x_train);
    const ColumnStats y_stats = column_stats(y_train);
    for (Eigen::Index c = 0; c < x_stats.std.size(); ++c) {
      if (x_stats.std(c) == 0.0) {
        out.warnings.push_back("repeat " + std::to_string(rep) + ": feature '" + input_names[static_cast<std::size_t>(c)] +
                               "' is constant on the training rows; leaving it unscaled");
        x_stats.std(c) = 1.0;
      }
    }
    for (Eigen::Index c = 0; c < y_stats.std.size(); ++c) {
      if (y_stats.std(c) == 0.0) {
        throw std::runtime_error("load_csv: target column '" + target_cols[static_cast<std::size_t>(c)] +
                                 "' has zero variance on the training rows");
      }
    }

    auto make = [&](const std::vector<std::size_t>& idx, const char* suffix) {
      Dataset d;
      d.name = path.stem().string() + "-" + suffix + "-" + std::to_string(rep);
      d.seed = split.seed;
      d.inputs = standardize(gather_rows(x, idx), x_stats);
      d.targets = standardize(gather_rows(y, idx), y_stats);
      d.input_names = input_names;
      d.target_names = target_cols;
      d.input_stats = x_stats;
      d.target_stats = y_stats;
      return d;
    };
    out.splits.emplace_back(make(train_rows, "train"), make(test_rows, "test"));
  }
  return out;
}

void export_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export_dataset: cannot open " + path.string());
  }
  out.precision(17);
  std::vector<std::string> names;
  for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) {
    names.push_back(static_cast<std::size_t>(c) < data.input_names.size() ? data.input_names[static_cast<std::size_t>(c)]
                                                                          : "x" + std::to_string(c));
  }
  for (Eigen::Index c = 0; c < data.targets.cols(); ++c) {
    names.push_back(static_cast<std::size_t>(c) < data.target_names.size()
                        ? data.target_names[static_cast<std::size_t>(c)]
                        : "y" + std::to_string(c));
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << (i ? "," : "") << names[i];
  }
  out << '\n';
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) {
      out << (c ? "," : "") << data.inputs(r, c);
    }
    for (Eigen::Index c = 0; c < data.targets.cols(); ++c) {
      out << ',' << data.targets(r, c);
    }
    out << '\n';
  }

  nlohmann::json meta = {{"name", data.name},
                         {"seed", data.seed},
                         {"rows", data.size()},
                         {"input_stats", stats_to_json(data.input_stats)},
                         {"target_stats", stats_to_json(data.target_stats)}};
  std::ofstream meta_out(path.string() + ".meta.json");
  if (!meta_out) {
    throw std::runtime_error("export_dataset: cannot write metadata next to " + path.string());
  }
  meta_out << meta.dump(2) << '\n';
}

}  // namespace evireg
