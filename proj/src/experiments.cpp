#include "evireg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "evireg/checkpoint.hpp"
#include "evireg/dataset.hpp"
#include "evireg/losses.hpp"
#include "evireg/metrics.hpp"
#include "evireg/multivariate.hpp"
#include "evireg/svg.hpp"
#include "evireg/training.hpp"
#include "json.hpp"

namespace evireg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Entropy histogram edges are fixed so runs can be compared bin by bin.
constexpr double kEntropyLo = -5.0;
constexpr double kEntropyHi = 25.0;
constexpr int kEntropyBins = 30;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

HeadSpec head_for(const RunConfig& c) {
  HeadSpec h;
  if (c.experiment == Experiment::Circle) {
    h.kind = HeadSpec::Kind::NIW;
    h.n = 2;
  } else {
    h.activation = c.loss.activation;
  }
  return h;
}

LossSpec loss_for(const RunConfig& c) {
  LossSpec l;
  l.weights.lambda = c.loss.lambda;
  l.weights.lambda1 = c.loss.lambda1;
  l.weights.detach_error_in_U = c.loss.detach_error_in_U;
  l.r = c.loss.r;
  return l;
}

TrainOptions options_for(const RunConfig& c) {
  TrainOptions o;
  o.epochs = c.train.epochs;
  o.batch_size = c.train.batch_size;
  o.lr = c.train.lr;
  o.seed = c.train.seed;
  o.stop_on_divergence = true;
  return o;
}

Model build_model(const RunConfig& c) {
  Model m = Model::create(c.model, head_for(c));
  if (c.train.hua_init) {
    m.weights = hua_init(std::move(m.weights), m.head.evidence_channel(), c.train.hua_bias);
  }
  return m;
}

std::vector<double> column(const Eigen::MatrixXd& m, Eigen::Index c = 0) {
  return {m.col(c).data(), m.col(c).data() + m.rows()};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Summaries without predict()'s alpha > 1 precondition: inside the HUA
// alpha can be exactly 1 and the variances are reported as infinite.
struct UniSummary {
  double gamma;
  double aleatoric;
  double epistemic;
};

UniSummary summarize(const NIGParams& p) {
  if (!(p.alpha > 1.0)) {
    return {p.gamma, kInf, kInf};
  }
  const double epistemic = p.beta / (p.v * (p.alpha - 1.0));
  return {p.gamma, epistemic * p.v, epistemic};
}

json curve_json(const CalibrationCurve& c) {
  return {{"levels", c.expected_levels}, {"observed", c.observed_frequencies}, {"error", c.calibration_error}};
}

void write_training_json(const RunConfig& c, const TrainResult& r, const fs::path& path) {
  json t = {{"epochs_requested", c.train.epochs},
            {"epochs_completed", static_cast<int>(r.log.size())},
            {"diverged_at_epoch", r.diverged_at_epoch}};
  if (r.diverged_at_epoch > 0) {
    t["reason"] = r.divergence_reason;
  }
  write_text(path, t.dump(2) + "\n");
}

void write_loss_csv(const std::vector<EpochLog>& log, const fs::path& path) {
  std::string out = "epoch,total,nll,evidence_reg,unc_reg,train_rmse\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch) + "," + num(e.total) + "," + num(e.nll) + "," + num(e.evidence_reg) + "," +
           num(e.unc_reg) + "," + num(e.train_rmse) + "\n";
  }
  write_text(path, out);
}

TrainResult run_training(const RunConfig& c, const Dataset& train_data) {
  const Model model = build_model(c);
  const std::string tag = c.name + "/" + std::string(to_string(c.loss.variant));
  const int every = std::max(1, c.train.epochs / 5);
  TrainResult r = train(model, train_data, loss_for(c), options_for(c), [&](const EpochLog& e, const Model&) {
    if (e.epoch % every == 0 || e.epoch == c.train.epochs) {
      std::clog << "[" << tag << "] epoch " << e.epoch << "/" << c.train.epochs << " loss " << e.total
                << " train_rmse " << e.train_rmse << "\n";
    }
  });
  if (r.diverged_at_epoch > 0) {
    std::clog << "[" << tag << "] stopped: " << r.divergence_reason << "; keeping epoch " << r.diverged_at_epoch - 1
              << "\n";
  }
  return r;
}

// ---- cubic ---------------------------------------------------------------

struct CubicData {
  CubicSplit split;
  Dataset grid;  // in-distribution evaluation grid on [-4, 4]
};

CubicData cubic_data(const RunConfig& c) {
  CubicOptions opts;
  opts.noise_std = c.cubic.noise_std;
  CubicData d{gen_cubic(c.cubic.n_train, c.cubic.seed, opts), {}};
  d.grid = gen_cubic_grid(c.cubic.eval_points, opts.train_lo, opts.train_hi, c.cubic.seed + 1, c.cubic.noise_std);
  return d;
}

std::vector<double> entropies(const std::vector<UniSummary>& s, bool epistemic) {
  std::vector<double> out;
  out.reserve(s.size());
  for (const auto& u : s) {
    out.push_back(entropy(epistemic ? u.epistemic : u.aleatoric));
  }
  return out;
}

struct EntropyHistograms {
  Histogram in;
  Histogram ood;
};

EntropyHistograms entropy_histograms(const RunConfig& c, const Model& model, const CubicData& d) {
  std::vector<UniSummary> in, ood;
  for (const auto& p : model.predict_nig(d.grid.inputs)) in.push_back(summarize(p));
  for (const auto& p : model.predict_nig(d.split.test.inputs)) ood.push_back(summarize(p));
  const auto ein = entropies(in, c.eval.epistemic_entropy);
  const auto eood = entropies(ood, c.eval.epistemic_entropy);
  return {entropy_histogram(ein, kEntropyLo, kEntropyHi, kEntropyBins),
          entropy_histogram(eood, kEntropyLo, kEntropyHi, kEntropyBins)};
}

json cubic_metrics(const RunConfig& c, const Model& model) {
  const CubicData d = cubic_data(c);
  const std::vector<NIGParams> p_in = model.predict_nig(d.grid.inputs);
  const std::vector<NIGParams> p_ood = model.predict_nig(d.split.test.inputs);
  std::vector<UniSummary> s_in, s_ood;
  for (const auto& p : p_in) s_in.push_back(summarize(p));
  for (const auto& p : p_ood) s_ood.push_back(summarize(p));

  auto gammas = [](const std::vector<UniSummary>& s) {
    std::vector<double> g;
    for (const auto& u : s) g.push_back(u.gamma);
    return g;
  };
  auto mean_field = [](const std::vector<UniSummary>& s, double UniSummary::*f) {
    double sum = 0.0;
    for (const auto& u : s) sum += u.*f;
    return sum / static_cast<double>(s.size());
  };

  const std::vector<double> y_in = column(d.grid.targets);
  const std::vector<double> truth_in = column(*d.grid.clean_targets);
  const std::vector<double> y_ood = column(d.split.test.targets);
  const std::vector<double> truth_ood = column(*d.split.test.clean_targets);

  const CalibrationCurve cal = calibration(p_in, y_in, default_calibration_levels());
  const CutoffCurve cut = cutoff_curve(p_in, y_in, default_cutoff_fractions());
  const HuaReport hua = hua_escape_report(model, d.split.train.inputs, c.eval.hua_epsilon);
  const double epi_in = mean_field(s_in, &UniSummary::epistemic);
  const double epi_ood = mean_field(s_ood, &UniSummary::epistemic);

  json m;
  m["experiment"] = "cubic";
  m["variant"] = std::string(to_string(c.loss.variant));
  m["train"] = {{"n", d.split.train.size()}, {"rmse", prediction_rmse(model, d.split.train.inputs, d.split.train.targets)}};
  m["in_distribution"] = {{"n", d.grid.size()},
                          {"rmse_truth", rmse(gammas(s_in), truth_in)},
                          {"rmse", rmse(gammas(s_in), y_in)},
                          {"nll", predictive_nll(p_in, y_in)},
                          {"mean_epistemic", epi_in},
                          {"mean_aleatoric", mean_field(s_in, &UniSummary::aleatoric)},
                          {"calibration", curve_json(cal)},
                          {"cutoff", {{"fractions", cut.retained_fractions}, {"rmse", cut.rmse_at_fraction}}}};
  m["ood"] = {{"n", d.split.test.size()},
              {"rmse_truth", rmse(gammas(s_ood), truth_ood)},
              {"nll", predictive_nll(p_ood, y_ood)},
              {"mean_epistemic", epi_ood}};
  m["epistemic_ratio_ood_to_in"] = epi_ood / epi_in;
  m["hua"] = {{"epsilon", c.eval.hua_epsilon},
              {"fraction_in_hua", hua.fraction_in_hua},
              {"mean_alpha", hua.mean_alpha},
              {"min_alpha", hua.min_alpha}};
  if (c.eval.ood) {
    const EntropyHistograms h = entropy_histograms(c, model, d);
    m["entropy"] = {{"source", c.eval.epistemic_entropy ? "epistemic" : "aleatoric"},
                    {"edges", h.in.edges},
                    {"in_distribution", h.in.counts},
                    {"ood", h.ood.counts}};
  }
  return m;
}

void write_entropy_artifacts(const RunConfig& c, const Model& model, const fs::path& dir) {
  const EntropyHistograms h = entropy_histograms(c, model, cubic_data(c));
  std::string csv = "bin_lo,bin_hi,count_in,count_ood\n";
  LineSeries in{{}, {}, "#1f77b4", "in-distribution"};
  LineSeries ood{{}, {}, "#d62728", "out-of-distribution"};
  for (std::size_t i = 0; i < h.in.counts.size(); ++i) {
    csv += num(h.in.edges[i]) + "," + num(h.in.edges[i + 1]) + "," + std::to_string(h.in.counts[i]) + "," +
           std::to_string(h.ood.counts[i]) + "\n";
    const double mid = 0.5 * (h.in.edges[i] + h.in.edges[i + 1]);
    in.x.push_back(mid);
    in.y.push_back(h.in.density[i]);
    ood.x.push_back(mid);
    ood.y.push_back(h.ood.density[i]);
  }
  write_text(dir / "entropy_histogram.csv", csv);
  Plot plot;
  plot.title = "Predictive entropy";
  plot.x_label = "entropy";
  plot.y_label = "density";
  plot.lines = {in, ood};
  write_svg(plot, dir / "entropy_histogram.svg");
}

void write_curve_artifacts(const std::vector<NIGParams>& params, const std::vector<double>& targets,
                           const fs::path& dir, const std::string& suffix = "") {
  const CalibrationCurve cal = calibration(params, targets, default_calibration_levels());
  std::string csv = "expected,observed\n";
  for (std::size_t i = 0; i < cal.expected_levels.size(); ++i) {
    csv += num(cal.expected_levels[i]) + "," + num(cal.observed_frequencies[i]) + "\n";
  }
  write_text(dir / ("calibration" + suffix + ".csv"), csv);
  Plot cp;
  cp.title = "Calibration (error " + num(cal.calibration_error).substr(0, 8) + ")";
  cp.x_label = "expected confidence level";
  cp.y_label = "observed frequency";
  cp.y_lo = 0.0;
  cp.y_hi = 1.0;
  cp.lines = {{{0.0, 1.0}, {0.0, 1.0}, "#999999", "ideal", true},
              {cal.expected_levels, cal.observed_frequencies, "#1f77b4", "model"}};
  write_svg(cp, dir / ("calibration" + suffix + ".svg"));

  const CutoffCurve cut = cutoff_curve(params, targets, default_cutoff_fractions());
  csv = "retained_fraction,rmse\n";
  for (std::size_t i = 0; i < cut.retained_fractions.size(); ++i) {
    csv += num(cut.retained_fractions[i]) + "," + num(cut.rmse_at_fraction[i]) + "\n";
  }
  write_text(dir / ("cutoff" + suffix + ".csv"), csv);
  Plot kp;
  kp.title = "RMSE of the most confident samples";
  kp.x_label = "retained fraction";
  kp.y_label = "RMSE";
  kp.lines = {{cut.retained_fractions, cut.rmse_at_fraction, "#1f77b4", "model"}};
  write_svg(kp, dir / ("cutoff" + suffix + ".svg"));
}

void write_cubic_artifacts(const RunConfig& c, const Model& model, const fs::path& dir) {
  const CubicData d = cubic_data(c);
  Eigen::MatrixXd xs(241, 1);
  for (int i = 0; i < 241; ++i) {
    xs(i, 0) = -6.0 + 12.0 * i / 240.0;
  }
  const auto params = model.predict_nig(xs);
  std::string csv = "x,gamma,aleatoric,epistemic,truth\n";
  LineSeries pred{{}, {}, "#1f77b4", "prediction"};
  LineSeries truth{{}, {}, "#222222", "x^3", true};
  BandSeries band{{}, {}, {}, "#9ecae1", "+/- 2 epistemic std"};
  for (int i = 0; i < xs.rows(); ++i) {
    const double x = xs(i, 0);
    const UniSummary u = summarize(params[static_cast<std::size_t>(i)]);
    csv += num(x) + "," + num(u.gamma) + "," + num(u.aleatoric) + "," + num(u.epistemic) + "," + num(x * x * x) + "\n";
    const double sd = std::sqrt(u.epistemic);
    pred.x.push_back(x);
    pred.y.push_back(u.gamma);
    truth.x.push_back(x);
    truth.y.push_back(x * x * x);
    band.x.push_back(x);
    band.lo.push_back(std::isfinite(sd) ? u.gamma - 2 * sd : -1e300);
    band.hi.push_back(std::isfinite(sd) ? u.gamma + 2 * sd : 1e300);
  }
  write_text(dir / "predictions.csv", csv);
  ScatterSeries train_pts{{}, {}, "#888888", "train", 1.2};
  for (Eigen::Index i = 0; i < d.split.train.size(); i += 4) {
    train_pts.x.push_back(d.split.train.inputs(i, 0));
    train_pts.y.push_back(d.split.train.targets(i, 0));
  }
  Plot plot;
  plot.title = "Cubic regression, " + std::string(to_string(c.loss.variant));
  plot.x_label = "x";
  plot.y_label = "y";
  plot.y_lo = -250;
  plot.y_hi = 250;
  plot.bands = {band};
  plot.lines = {truth, pred};
  plot.scatters = {train_pts};
  write_svg(plot, dir / "predictions.svg");

  write_curve_artifacts(model.predict_nig(d.grid.inputs), column(d.grid.targets), dir);
  if (c.eval.ood) {
    write_entropy_artifacts(c, model, dir);
  }
}

// ---- circle --------------------------------------------------------------

struct CircleEval {
  std::vector<NIWParams> params;
  std::vector<double> exp_unc_max;     // max |entry| of LL^T / (nu - 3) per sample
  std::vector<double> aleatoric_trace;  // per sample
};

CircleEval circle_eval(const Model& model, const Dataset& grid) {
  CircleEval e;
  e.params = model.predict_niw(grid.inputs);
  const int n = model.head.n;
  for (const auto& p : e.params) {
    if (p.nu > nu_lower_bound(n)) {
      const MultiPrediction pred = predict_multi(p);
      e.exp_unc_max.push_back(pred.experiment_uncertainty ? pred.experiment_uncertainty->cwiseAbs().maxCoeff() : kInf);
      e.aleatoric_trace.push_back(pred.aleatoric.trace());
    } else {
      e.exp_unc_max.push_back(kInf);
      e.aleatoric_trace.push_back(kInf);
    }
  }
  return e;
}

json circle_metrics(const RunConfig& c, const Model& model) {
  CircleOptions opts;
  opts.noise_std = c.circle.noise_std;
  opts.sampling = c.circle.sampling;
  const Dataset train_data = gen_circle(c.circle.n, c.circle.seed, opts);
  const Dataset grid = gen_circle_grid(c.circle.eval_points);
  const CircleEval e = circle_eval(model, grid);
  const double lower = nu_lower_bound(model.head.n);

  std::vector<double> nus, gaps;
  double sq = 0.0;
  for (std::size_t i = 0; i < e.params.size(); ++i) {
    nus.push_back(e.params[i].nu);
    gaps.push_back(e.params[i].nu - lower);
    sq += (e.params[i].mu0 - grid.targets.row(static_cast<Eigen::Index>(i)).transpose()).squaredNorm();
  }
  const double exp_max = *std::max_element(e.exp_unc_max.begin(), e.exp_unc_max.end());
  const double trace_median = median_of(e.aleatoric_trace);
  const HuaReportMulti hua = hua_escape_report_multi(model, train_data.inputs, c.eval.hua_epsilon);

  json m;
  m["experiment"] = "circle";
  m["variant"] = std::string(to_string(c.loss.variant));
  m["train"] = {{"n", train_data.size()}, {"rmse", prediction_rmse(model, train_data.inputs, train_data.targets)}};
  m["eval_grid"] = {{"n", grid.size()},
                    {"rmse_truth", std::sqrt(sq / (2.0 * static_cast<double>(e.params.size())))},
                    {"mean_nu", mean_of(nus)},
                    {"min_nu", *std::min_element(nus.begin(), nus.end())},
                    {"max_nu", *std::max_element(nus.begin(), nus.end())},
                    {"mean_nu_minus_lower", mean_of(gaps)},
                    {"experiment_uncertainty_max", exp_max},
                    {"aleatoric_trace_median", trace_median},
                    {"experiment_uncertainty_finite", std::isfinite(exp_max)}};
  m["hua"] = {{"epsilon", c.eval.hua_epsilon},
              {"fraction_in_hua", hua.fraction_in_hua},
              {"mean_nu", hua.mean_nu},
              {"min_nu", hua.min_nu}};
  return m;
}

void write_circle_artifacts(const RunConfig& c, const Model& model, const fs::path& dir) {
  const Dataset grid = gen_circle_grid(c.circle.eval_points);
  const CircleEval e = circle_eval(model, grid);
  std::string csv = "t,mu_x,mu_y,nu,experiment_uncertainty_max\n";
  ScatterSeries nu_pts{{}, {}, "#1f77b4", "nu", 2.0};
  LineSeries mean_xy{{}, {}, "#1f77b4", "predicted mean"};
  LineSeries truth_xy{{}, {}, "#222222", "unit circle", true};
  for (std::size_t i = 0; i < e.params.size(); ++i) {
    const double t = grid.inputs(static_cast<Eigen::Index>(i), 0);
    const auto& p = e.params[i];
    csv += num(t) + "," + num(p.mu0(0)) + "," + num(p.mu0(1)) + "," + num(p.nu) + "," + num(e.exp_unc_max[i]) + "\n";
    nu_pts.x.push_back(t);
    nu_pts.y.push_back(p.nu);
    mean_xy.x.push_back(p.mu0(0));
    mean_xy.y.push_back(p.mu0(1));
    truth_xy.x.push_back(std::cos(t));
    truth_xy.y.push_back(std::sin(t));
  }
  write_text(dir / "predictions.csv", csv);
  Plot nu_plot;
  nu_plot.title = "nu versus t, " + std::string(to_string(c.loss.variant));
  nu_plot.x_label = "t";
  nu_plot.y_label = "nu";
  nu_plot.y_lo = nu_lower_bound(2) - 0.5;
  nu_plot.y_hi = nu_upper_bound(2) + 0.5;
  nu_plot.scatters = {nu_pts};
  write_svg(nu_plot, dir / "nu_vs_t.svg");
  Plot xy;
  xy.title = "Predicted mean";
  xy.x_label = "x";
  xy.y_label = "y";
  xy.width = 480;
  xy.height = 480;
  xy.lines = {truth_xy, mean_xy};
  write_svg(xy, dir / "mean_xy.svg");
}

// ---- tabular -------------------------------------------------------------

TabularSplits tabular_splits(const RunConfig& c) {
  SplitOptions opts;
  opts.train_frac = c.tabular.train_frac;
  opts.repeats = c.tabular.repeats;
  opts.seed = c.tabular.seed;
  return load_csv(c.tabular.path, c.tabular.targets, opts);
}

json tabular_split_metrics(const Model& model, const Dataset& train_data, const Dataset& test_data) {
  const double target_std = test_data.target_stats.std(0);
  const auto params = model.predict_nig(test_data.inputs);
  const std::vector<double> y = column(test_data.targets);
  std::vector<double> g;
  for (const auto& p : params) g.push_back(p.gamma);
  return {{"train_rmse", prediction_rmse(model, train_data.inputs, train_data.targets) * target_std},
          {"test_rmse", rmse(g, y) * target_std},
          {"test_nll", predictive_nll(params, y, target_std)},
          {"calibration_error", calibration(params, y, default_calibration_levels()).calibration_error}};
}

json tabular_metrics(const RunConfig& c, const std::vector<Model>& models, const TabularSplits& splits) {
  json rows = json::array();
  std::vector<double> rmse_v, nll_v, cal_v;
  for (std::size_t k = 0; k < models.size(); ++k) {
    json r = tabular_split_metrics(models[k], splits.splits[k].first, splits.splits[k].second);
    rmse_v.push_back(r["test_rmse"].get<double>());
    nll_v.push_back(r["test_nll"].get<double>());
    cal_v.push_back(r["calibration_error"].get<double>());
    rows.push_back(std::move(r));
  }
  auto stdev = [](const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
  };
  json m;
  m["experiment"] = "tabular";
  m["variant"] = std::string(to_string(c.loss.variant));
  m["splits"] = rows;
  m["mean"] = {{"test_rmse", mean_of(rmse_v)}, {"test_nll", mean_of(nll_v)}, {"calibration_error", mean_of(cal_v)}};
  m["std"] = {{"test_rmse", stdev(rmse_v)}, {"test_nll", stdev(nll_v)}, {"calibration_error", stdev(cal_v)}};
  m["warnings"] = splits.warnings;
  return m;
}

RunConfig with_tabular_dims(RunConfig c, const TabularSplits& splits) {
  if (splits.splits.empty()) {
    throw std::runtime_error("tabular: no splits produced");
  }
  c.model.input_dim = static_cast<int>(splits.splits.front().first.inputs.cols());
  return c;
}

// ---- hua demo ------------------------------------------------------------

json hua_demo(const RunConfig& c, const fs::path& dir) {
  const double y = 2.0;
  std::string csv = "activation,o_alpha,alpha_minus_1,d_ern,d_nll_ern,d_unc_reg\n";
  std::vector<LineSeries> lines;
  LossWeights ern;
  ern.lambda = c.loss.lambda > 0.0 ? c.loss.lambda : 0.01;
  LossWeights nll_only;
  double max_deep = 0.0;
  double max_u_dev = 0.0;
  for (ActivationKind kind : {ActivationKind::SoftPlus, ActivationKind::Exp}) {
    LineSeries line{{}, {}, kind == ActivationKind::SoftPlus ? "#1f77b4" : "#ff7f0e",
                    "log10 |dL_ERN/do_alpha|, " + std::string(to_string(kind))};
    for (int i = 0; i <= 200; ++i) {
      const double o = -40.0 + 50.0 * i / 200.0;
      const RawHead raw{0.0, 0.0, o, 0.0};
      const double d_ern = grad_head(raw, y, ern, kind).d_o_alpha;
      const double d_nll = grad_head(raw, y, nll_only, kind).d_o_alpha;
      const double d_u = grad_terms(raw, y, kind, true, true).unc_reg.d_o_alpha;
      csv += std::string(to_string(kind)) + "," + num(o) + "," + num(alpha_activation(o, kind)) + "," + num(d_ern) +
             "," + num(d_nll) + "," + num(d_u) + "\n";
      line.x.push_back(o);
      line.y.push_back(std::log10(std::max(std::fabs(d_ern), 1e-30)));
      if (o <= -30.0) {
        max_deep = std::max(max_deep, std::fabs(d_ern));
      }
      if (kind == ActivationKind::SoftPlus) {
        max_u_dev = std::max(max_u_dev, std::fabs(d_u + y));
      }
    }
    lines.push_back(line);
  }
  write_text(dir / "hua_gradients.csv", csv);
  lines.push_back({{-40.0, 10.0}, {std::log10(y), std::log10(y)}, "#2ca02c", "log10 |dL_U/do_alpha|", true});
  Plot plot;
  plot.title = "Evidence-channel gradient, |y - gamma| = 2";
  plot.x_label = "o_alpha";
  plot.y_label = "log10 |gradient|";
  plot.y_lo = -20;
  plot.y_hi = 2;
  plot.lines = lines;
  write_svg(plot, dir / "hua_gradients.svg");
  return {{"experiment", "hua-demo"},
          {"error", y},
          {"max_abs_ern_gradient_below_minus_30", max_deep},
          {"max_unc_reg_gradient_deviation", max_u_dev}};
}

// ---- runs ----------------------------------------------------------------

fs::path checkpoint_path(const RunConfig& c, const fs::path& config_dir) {
  return c.eval.checkpoint ? *c.eval.checkpoint : config_dir / "checkpoint.json";
}

std::string dump(const json& j) {
  return j.dump(2) + "\n";
}

json run_single(const RunConfig& c, const fs::path& dir) {
  make_dir(dir);
  write_text(dir / "config.json", config_to_string(c));
  switch (c.experiment) {
    case Experiment::Cubic: {
      const CubicData d = cubic_data(c);
      TrainResult r = run_training(c, d.split.train);
      save_checkpoint({r.model, r.adam}, dir / "checkpoint.json");
      write_loss_csv(r.log, dir / "loss.csv");
      write_training_json(c, r, dir / "training.json");
      json m = cubic_metrics(c, r.model);
      write_text(dir / "metrics.json", dump(m));
      write_cubic_artifacts(c, r.model, dir);
      return m;
    }
    case Experiment::Circle: {
      CircleOptions opts;
      opts.noise_std = c.circle.noise_std;
      opts.sampling = c.circle.sampling;
      const Dataset data = gen_circle(c.circle.n, c.circle.seed, opts);
      TrainResult r = run_training(c, data);
      save_checkpoint({r.model, r.adam}, dir / "checkpoint.json");
      write_loss_csv(r.log, dir / "loss.csv");
      write_training_json(c, r, dir / "training.json");
      json m = circle_metrics(c, r.model);
      write_text(dir / "metrics.json", dump(m));
      write_circle_artifacts(c, r.model, dir);
      return m;
    }
    case Experiment::Tabular: {
      const TabularSplits splits = tabular_splits(c);
      for (const auto& w : splits.warnings) {
        std::clog << "warning: " << w << "\n";
      }
      const RunConfig cc = with_tabular_dims(c, splits);
      write_text(dir / "config.json", config_to_string(cc));
      std::vector<Model> models;
      for (std::size_t k = 0; k < splits.splits.size(); ++k) {
        TrainResult r = run_training(cc, splits.splits[k].first);
        const std::string idx = std::to_string(k + 1);
        save_checkpoint({r.model, r.adam}, dir / ("checkpoint_" + idx + ".json"));
        write_loss_csv(r.log, dir / ("loss_" + idx + ".csv"));
        write_training_json(cc, r, dir / ("training_" + idx + ".json"));
        const auto& test = splits.splits[k].second;
        const std::string suffix = splits.splits.size() > 1 ? "_" + idx : "";
        write_curve_artifacts(r.model.predict_nig(test.inputs), column(test.targets), dir, suffix);
        models.push_back(std::move(r.model));
      }
      json m = tabular_metrics(cc, models, splits);
      write_text(dir / "metrics.json", dump(m));
      return m;
    }
    case Experiment::HuaDemo: {
      json m = hua_demo(c, dir);
      write_text(dir / "metrics.json", dump(m));
      return m;
    }
    case Experiment::Gradcheck:
    case Experiment::Sensitivity:
      break;
  }
  throw std::logic_error("run_single: experiment " + std::string(to_string(c.experiment)) + " is not trainable");
}

}  // namespace

fs::path resolve_output_root(const RunConfig& config, const std::optional<fs::path>& cli_out) {
  if (cli_out) {
    return *cli_out;
  }
  if (const char* env = std::getenv("EVIREG_OUT"); env != nullptr && *env != '\0') {
    return env;
  }
  return config.output_dir;
}

std::string evaluate_model(const RunConfig& config, const Model& model) {
  switch (config.experiment) {
    case Experiment::Cubic:
    case Experiment::Sensitivity:
      return dump(cubic_metrics(config, model));
    case Experiment::Circle:
      return dump(circle_metrics(config, model));
    default:
      throw std::invalid_argument("evaluate_model: unsupported experiment " + std::string(to_string(config.experiment)));
  }
}

fs::path cmd_train(const RunConfig& config, const fs::path& root) {
  config.validate();
  if (config.experiment == Experiment::Gradcheck) {
    throw ConfigError("experiment gradcheck runs through the gradcheck command");
  }
  if (config.experiment == Experiment::Sensitivity) {
    return cmd_sensitivity(config, root);
  }
  const fs::path dir = root / config.name;
  if (config.variants.empty()) {
    run_single(config, dir);
    return dir;
  }
  make_dir(dir);
  write_text(dir / "config.json", config_to_string(config));
  json summary;
  summary["experiment"] = std::string(to_string(config.experiment));
  for (Variant v : config.variants) {
    const RunConfig sub = config.for_variant(v);
    summary["variants"][std::string(to_string(v))] = run_single(sub, dir / std::string(to_string(v)));
  }
  write_text(dir / "summary.json", dump(summary));
  return dir;
}

fs::path cmd_sensitivity(const RunConfig& config, const fs::path& root) {
  config.validate();
  const fs::path dir = root / config.name;
  make_dir(dir);
  write_text(dir / "config.json", config_to_string(config));
  std::string csv = "lambda1,rmse_truth,nll,calibration_error,fraction_in_hua,mean_alpha,status\n";
  json rows = json::array();
  std::vector<double> cal;
  for (double l1 : config.lambda1_grid) {
    RunConfig sub = config;
    sub.experiment = Experiment::Cubic;
    sub.variants.clear();
    sub.loss.variant = Variant::UR_ERN;
    sub.loss.lambda1 = l1;
    sub.train.hua_init = false;
    char label[48];
    std::snprintf(label, sizeof label, "lambda1_%g", l1);
    sub.name = label;
    json row = {{"lambda1", l1}};
    try {
      const json m = run_single(sub, dir / label);
      row["rmse_truth"] = m["in_distribution"]["rmse_truth"];
      row["nll"] = m["in_distribution"]["nll"];
      row["calibration_error"] = m["in_distribution"]["calibration"]["error"];
      row["fraction_in_hua"] = m["hua"]["fraction_in_hua"];
      row["mean_alpha"] = m["hua"]["mean_alpha"];
      row["status"] = "ok";
    } catch (const std::runtime_error& e) {
      row["status"] = std::string("failed: ") + e.what();
    }
    auto field = [&](const char* k) {
      return row.contains(k) && row[k].is_number() ? num(row[k].get<double>()) : std::string("nan");
    };
    csv += num(l1) + "," + field("rmse_truth") + "," + field("nll") + "," + field("calibration_error") + "," +
           field("fraction_in_hua") + "," + field("mean_alpha") + "," + row["status"].get<std::string>() + "\n";
    cal.push_back(row.contains("calibration_error") && row["calibration_error"].is_number()
                      ? row["calibration_error"].get<double>()
                      : kInf);
    rows.push_back(row);
  }
  write_text(dir / "sensitivity.csv", csv);

  // Soft check: an interior lambda1 should calibrate no worse than both ends.
  json doc;
  doc["rows"] = rows;
  if (cal.size() >= 3) {
    const double best_mid = *std::min_element(cal.begin() + 1, cal.end() - 1);
    const bool ok = best_mid <= cal.front() && best_mid <= cal.back();
    doc["mid_range_not_worse"] = ok;
    if (!ok) {
      std::clog << "note: no interior lambda1 calibrates at least as well as both extremes\n";
    }
  }
  write_text(dir / "sensitivity.json", dump(doc));
  return dir;
}

GradcheckReport cmd_gradcheck(const RunConfig& config, const fs::path& root) {
  GradcheckReport report = run_gradcheck(config.gradcheck);
  const fs::path dir = root / config.name;
  make_dir(dir);
  write_text(dir / "gradcheck.json", report_to_json(report));
  return report;
}

std::string cmd_eval(const RunConfig& config, const fs::path& config_dir, const fs::path& out_dir) {
  if (config.experiment == Experiment::Gradcheck || config.experiment == Experiment::HuaDemo ||
      config.experiment == Experiment::Sensitivity) {
    throw ConfigError("eval needs the config of a cubic, circle or tabular run");
  }
  if (!config.variants.empty()) {
    throw ConfigError("eval needs a single-variant config; use the config.json inside a variant directory");
  }
  auto expect_compatible = [&](const Model& m, int input_dim) {
    const HeadSpec want = head_for(config);
    if (m.head.kind != want.kind || m.config.output_dim != want.raw_size()) {
      throw std::runtime_error("checkpoint head does not match the " + std::string(to_string(config.experiment)) +
                               " experiment");
    }
    if (m.config.input_dim != input_dim) {
      throw std::runtime_error("checkpoint expects " + std::to_string(m.config.input_dim) +
                               " input columns, dataset has " + std::to_string(input_dim));
    }
  };

  std::string text;
  if (config.experiment == Experiment::Tabular) {
    const TabularSplits splits = tabular_splits(config);
    std::vector<Model> models;
    for (std::size_t k = 0; k < splits.splits.size(); ++k) {
      const fs::path p = config_dir / ("checkpoint_" + std::to_string(k + 1) + ".json");
      Model m = load_checkpoint(p).model;
      expect_compatible(m, static_cast<int>(splits.splits[k].first.inputs.cols()));
      models.push_back(std::move(m));
    }
    text = dump(tabular_metrics(config, models, splits));
  } else {
    const Model m = load_checkpoint(checkpoint_path(config, config_dir)).model;
    expect_compatible(m, 1);
    text = evaluate_model(config, m);
    make_dir(out_dir);
    if (config.experiment == Experiment::Cubic && config.eval.ood) {
      write_entropy_artifacts(config, m, out_dir);
    }
  }
  make_dir(out_dir);
  write_text(out_dir / "metrics.json", text);
  return text;
}

}  // namespace evireg
