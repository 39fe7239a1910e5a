// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-8 train the
// shipped recipes from configs/ and read back the metrics they write.
//
//   evireg_acceptance [--out DIR] [--only N]...
//
// Exit status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "evireg/config.hpp"
#include "evireg/experiments.hpp"
#include "evireg/gradcheck.hpp"
#include "evireg/losses.hpp"
#include "evireg/metrics.hpp"
#include "evireg/multivariate.hpp"
#include "evireg/nig.hpp"
#include "evireg/rng.hpp"
#include "json.hpp"
#include "oracles.hpp"

#ifndef EVIREG_CONFIG_DIR
#error "EVIREG_CONFIG_DIR must point at the configs/ directory"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace evireg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string g(double v) {
  return fmt("%.3g", v);
}

// JSON metrics store infinities as null.
double num(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) {
    throw std::runtime_error("cannot read " + p.string());
  }
  return json::parse(in);
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double ulps(double x, double ref) {
  const double a = std::fabs(ref);
  const double step = std::nextafter(a, std::numeric_limits<double>::infinity()) - a;
  return std::fabs(x - ref) / step;
}

double scaled_error(double a, double b) {
  return std::fabs(a - b) / std::max({1.0, std::fabs(a), std::fabs(b)});
}

// Trains every variant of a recipe into out/<recipe>/<variant>; returns the
// per-variant metrics and wall time.
struct VariantRun {
  json metrics;
  json training;
  double seconds = 0.0;
};

std::map<std::string, VariantRun> run_recipe(const std::string& recipe, const fs::path& out) {
  const RunConfig cfg = load_config(fs::path(EVIREG_CONFIG_DIR) / (recipe + ".json"));
  std::map<std::string, VariantRun> runs;
  const fs::path root = out / recipe;
  for (Variant v : cfg.variants) {
    RunConfig c = cfg.for_variant(v);
    c.name = std::string(to_string(v));
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = cmd_train(c, root);
    VariantRun r;
    r.seconds = seconds_since(t0);
    r.metrics = read_json(dir / "metrics.json");
    r.training = read_json(dir / "training.json");
    runs[c.name] = std::move(r);
  }
  return runs;
}

std::string diverged_note(const VariantRun& r) {
  const int at = r.training.value("diverged_at_epoch", 0);
  return at > 0 ? " (non-finite at epoch " + std::to_string(at) + ", kept epoch " + std::to_string(at - 1) + ")" : "";
}

// 1. closed-form gradients against central differences
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckConfig c;
  const GradcheckReport r = run_gradcheck(c);
  const double secs = seconds_since(t0);
  double uni = 0.0;
  double net = 0.0;
  bool ok = true;
  int uni_suites = 0;
  for (const auto& s : r.suites) {
    double worst = 0.0;
    for (const auto& ch : s.channels) {
      worst = std::max(worst, ch.max_error);
    }
    if (s.name.rfind("uni.", 0) == 0) {
      ++uni_suites;
      ok = ok && s.probes >= 1000 && worst < 1e-6;
      uni = std::max(uni, worst);
    } else if (s.name.rfind("network", 0) == 0) {
      ok = ok && worst < 1e-5;
      net = std::max(net, worst);
    }
  }
  ok = ok && uni_suites == 3 && secs < 10.0;
  return {ok, "max uni error " + g(uni) + " over 3x1000 probes, network " + g(net) + ", " + fmt("%.1f s", secs)};
}

// 2. evidence-channel gradient vanishes deep in the high-uncertainty area
Outcome hua_zero_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_smooth = 0.0;
  double worst_relu = 0.0;
  const int probes = 2000;
  for (int i = 0; i < probes; ++i) {
    RawHead raw{rng.uniform(-5, 5), rng.uniform(-5, 5), 0.0, rng.uniform(-5, 5)};
    const double y = rng.uniform(-10, 10);
    const LossWeights w{0.01, 0.0};
    for (auto kind : {ActivationKind::SoftPlus, ActivationKind::Exp}) {
      raw.o_alpha = -30.0 - rng.uniform(0, 1000);
      worst_smooth = std::max(worst_smooth, std::fabs(grad_head(raw, y, w, kind).d_o_alpha));
    }
    raw.o_alpha = i == 0 ? -30.0 : -rng.uniform(1e-12, 1000);
    worst_relu = std::max(worst_relu, std::fabs(grad_head(raw, y, w, ActivationKind::ReLU).d_o_alpha));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_smooth <= 1e-10 && worst_relu == 0.0 && secs < 5.0;
  return {ok, "max |dL/do_alpha| softplus/exp " + g(worst_smooth) + ", relu " + g(worst_relu) + " over " +
                  std::to_string(probes) + " draws, " + fmt("%.2f s", secs)};
}

// 3. regularizer gradient on o_alpha equals -|y - gamma|
Outcome unc_reg_gradient() {
  Rng rng(202);
  double worst = 0.0;
  int n = 0;
  for (double o : {-1e6, -30.0, 0.0, 30.0, 1e6}) {
    for (int i = 0; i < 1000; ++i) {
      const RawHead raw{rng.uniform(-10, 10), rng.uniform(-5, 5), o, rng.uniform(-5, 5)};
      const double y = rng.uniform(-10, 10);
      const double gr = grad_terms(raw, y, ActivationKind::SoftPlus, true, true).unc_reg.d_o_alpha;
      worst = std::max(worst, ulps(gr, -std::fabs(y - raw.o_gamma)));
      ++n;
    }
  }
  return {worst <= 4.0, "max deviation " + g(worst) + " ulp over " + std::to_string(n) + " draws"};
}

// 4. multivariate: vanishing p_nu gradient, exact regularizer gradient, FD on the rest
Outcome multivariate_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);
  auto random_raw = [&] {
    RawHeadM raw = RawHeadM::zeros(2);
    for (Eigen::Index i = 0; i < raw.p.size(); ++i) {
      raw.p(i) = rng.uniform(-2, 2);
    }
    return raw;
  };
  auto random_y = [&] { return Eigen::Vector2d(rng.uniform(-3, 3), rng.uniform(-3, 3)); };

  double vanish = 0.0;
  double reg_ulps = 0.0;
  for (int i = 0; i < 1000; ++i) {
    RawHeadM raw = random_raw();
    raw.p(5) = -12.0 - rng.uniform(0, 100);
    const Eigen::Vector2d y = random_y();
    vanish = std::max(vanish, std::fabs(grad_multi(raw, y, 0.0)(5)));
    raw.p(5) = rng.uniform(-100, 100);
    reg_ulps = std::max(reg_ulps, ulps(grad_unc_reg_multi(raw, y, 1.0)(5), -(y - raw.p.head(2)).norm()));
  }

  double fd_worst = 0.0;
  const double h = 1e-5;
  for (int i = 0; i < 200; ++i) {
    const RawHeadM raw = random_raw();
    const Eigen::Vector2d y = random_y();
    const Eigen::VectorXd an = grad_multi(raw, y, 0.1);
    // channels 0..4; the p_nu channel is held to the exact checks above
    for (int k = 0; k < 5; ++k) {
      RawHeadM up = raw;
      RawHeadM dn = raw;
      up.p(k) += h;
      dn.p(k) -= h;
      // detached regularizer: only the NLL reaches the mean and L channels
      const double fd = (mern_nll(transform_multi(up), y) - mern_nll(transform_multi(dn), y)) / (2 * h);
      fd_worst = std::max(fd_worst, scaled_error(an(k), fd));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = vanish <= 1e-8 && reg_ulps <= 4.0 && fd_worst < 1e-6 && secs < 10.0;
  return {ok, "max |dL/dp_nu| at p_nu<=-12 " + g(vanish) + ", regularizer " + g(reg_ulps) + " ulp, FD " +
                  g(fd_worst) + " over 200 probes, " + fmt("%.2f s", secs)};
}

// 5. NLL against the 2-D quadrature of the NIG marginal
Outcome marginal_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(404);
  double worst = 0.0;
  int points = 0;
  const double offsets[] = {-2.0, 0.0, 3.0};
  for (int i = 0; i < 20; ++i) {
    const NIGParams p{rng.uniform(-2, 2), rng.uniform(0.2, 5), rng.uniform(1.2, 5), rng.uniform(0.2, 5)};
    const double y = p.gamma + offsets[i % 3];
    const double quad = oracle::nig_marginal_density(y, p.gamma, p.v, p.alpha, p.beta);
    worst = std::max(worst, std::fabs(nll_loss(p, y) + std::log(quad)));
    ++points;
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 30.0,
          "max |NLL + log p_quad| " + g(worst) + " over " + std::to_string(points) + " points, " + fmt("%.1f s", secs)};
}

// 6. cubic from the HUA initialization
Outcome cubic_hua(const fs::path& out) {
  const auto runs = run_recipe("cubic-hua", out);
  const auto& ern = runs.at("ERN");
  const auto& nll = runs.at("NLL-ERN");
  const auto& ur = runs.at("UR-ERN");
  auto frac = [](const VariantRun& r) { return r.metrics["hua"]["fraction_in_hua"].get<double>(); };
  const double ur_rmse = num(ur.metrics["in_distribution"]["rmse_truth"]);
  const double ur_ratio = num(ur.metrics["epistemic_ratio_ood_to_in"]);
  double slowest = 0.0;
  for (const auto& [name, r] : runs) {
    slowest = std::max(slowest, r.seconds);
  }
  std::vector<std::string> misses;
  if (!(frac(ern) > 0.95)) misses.push_back("ERN fraction_in_hua " + g(frac(ern)) + " <= 0.95");
  if (!(frac(nll) > 0.95)) misses.push_back("NLL-ERN fraction_in_hua " + g(frac(nll)) + " <= 0.95");
  if (!(frac(ur) < 0.05)) misses.push_back("UR-ERN fraction_in_hua " + g(frac(ur)) + " >= 0.05");
  if (!(ur_rmse < 2.0)) misses.push_back("UR-ERN rmse_truth " + g(ur_rmse) + " >= 2" + diverged_note(ur));
  if (!(ur_ratio > 2.0)) misses.push_back("UR-ERN epistemic ratio " + g(ur_ratio) + " <= 2");
  if (!(slowest < 120.0)) misses.push_back("slowest variant " + fmt("%.0f s", slowest));
  std::string detail = "fraction_in_hua ERN " + g(frac(ern)) + ", NLL-ERN " + g(frac(nll)) + ", UR-ERN " +
                       g(frac(ur)) + "; UR-ERN rmse_truth " + g(ur_rmse) + ", epistemic ratio " + g(ur_ratio) +
                       "; slowest " + fmt("%.0f s", slowest);
  for (const auto& m : misses) {
    detail += "\n      miss: " + m;
  }
  return {misses.empty(), detail};
}

// 7. cubic outside the HUA
Outcome cubic_outside(const fs::path& out) {
  const auto runs = run_recipe("cubic", out);
  std::vector<std::string> misses;
  std::string detail = "rmse_truth";
  double slowest = 0.0;
  for (const auto& [name, r] : runs) {
    const double rm = num(r.metrics["in_distribution"]["rmse_truth"]);
    detail += " " + name + " " + g(rm);
    if (!(rm < 2.0)) misses.push_back(name + " rmse_truth " + g(rm) + " >= 2" + diverged_note(r));
    slowest = std::max(slowest, r.seconds);
  }
  const double ce_ur = num(runs.at("UR-ERN").metrics["in_distribution"]["calibration"]["error"]);
  const double ce_ern = num(runs.at("ERN").metrics["in_distribution"]["calibration"]["error"]);
  if (!(ce_ur <= ce_ern + 0.05)) misses.push_back("UR-ERN calibration " + g(ce_ur) + " > ERN " + g(ce_ern) + " + 0.05");
  if (!(slowest < 120.0)) misses.push_back("slowest variant " + fmt("%.0f s", slowest));
  detail += "; calibration UR-ERN " + g(ce_ur) + " vs ERN " + g(ce_ern) + "; slowest " + fmt("%.0f s", slowest);
  for (const auto& m : misses) {
    detail += "\n      miss: " + m;
  }
  return {misses.empty(), detail};
}

// 8. circle from the HUA initialization
Outcome circle_hua(const fs::path& out) {
  const auto runs = run_recipe("circle-hua", out);
  const json& ern = runs.at("ERN").metrics["eval_grid"];
  const json& ur = runs.at("UR-ERN").metrics["eval_grid"];
  const double ern_gap = num(ern["mean_nu_minus_lower"]);
  const double ur_nu = num(ur["mean_nu"]);
  const bool ur_finite = ur["experiment_uncertainty_finite"].get<bool>();
  const double ur_max = num(ur["experiment_uncertainty_max"]);
  const double ur_med = num(ur["aleatoric_trace_median"]);
  const double ratio = ur_max / ur_med;
  double slowest = 0.0;
  for (const auto& [name, r] : runs) {
    slowest = std::max(slowest, r.seconds);
  }
  std::vector<std::string> misses;
  if (!(ern_gap < 1e-3)) misses.push_back("ERN mean(nu - 3) " + g(ern_gap) + " >= 1e-3");
  if (!(ur_nu > 4.0)) misses.push_back("UR-ERN mean nu " + g(ur_nu) + " <= 4");
  if (!(ur_finite && ratio < 10.0)) {
    misses.push_back("UR-ERN experiment uncertainty max " + g(ur_max) + " vs 10 x aleatoric trace median " + g(ur_med) +
                     diverged_note(runs.at("UR-ERN")));
  }
  if (!(slowest < 120.0)) misses.push_back("slowest variant " + fmt("%.0f s", slowest));
  std::string detail = "ERN mean(nu - 3) " + g(ern_gap) + "; UR-ERN mean nu " + g(ur_nu) +
                       ", experiment uncertainty max/median " + (ur_finite ? g(ratio) : std::string("non-finite")) + ", rmse_truth " + g(num(ur["rmse_truth"])) +
                       "; slowest " + fmt("%.0f s", slowest);
  for (const auto& m : misses) {
    detail += "\n      miss: " + m;
  }
  return {misses.empty(), detail};
}

// 9. calibration of targets drawn from each sample's own predictive
Outcome calibration_self_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(909);
  const int n = 10000;
  std::vector<NIGParams> params;
  std::vector<double> y;
  params.reserve(n);
  y.reserve(n);
  for (int i = 0; i < n; ++i) {
    params.push_back({rng.uniform(-3, 3), rng.uniform(0.2, 5), rng.uniform(1.2, 5), rng.uniform(0.2, 5)});
    y.push_back(sample_observation(params.back(), rng));
  }
  const double err = calibration(params, y, default_calibration_levels()).calibration_error;
  const double secs = seconds_since(t0);
  return {err < 0.002 && secs < 30.0, "calibration_error " + g(err) + " at N=10^4, " + fmt("%.1f s", secs)};
}

// 10. two identical training runs give identical bytes
Outcome determinism(const fs::path& out) {
  RunConfig c = load_config(fs::path(EVIREG_CONFIG_DIR) / "cubic.json").for_variant(Variant::UR_ERN);
  c.train.epochs = 40;
  c.name = "run";
  const fs::path a = cmd_train(c, out / "determinism-a");
  const fs::path b = cmd_train(c, out / "determinism-b");
  std::vector<std::string> differ;
  for (const char* f : {"checkpoint.json", "metrics.json", "loss.csv"}) {
    const std::string x = read_bytes(a / f);
    if (x.empty() || x != read_bytes(b / f)) {
      differ.emplace_back(f);
    }
  }
  std::string detail = differ.empty() ? "checkpoint.json, metrics.json and loss.csv byte-identical" : "differ:";
  for (const auto& d : differ) {
    detail += " " + d;
  }
  return {differ.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path out = fs::temp_directory_path() / "evireg_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--out" && i + 1 < argc) {
      out = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only.insert(std::stoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: evireg_acceptance [--out DIR] [--only N]...\n");
      return 2;
    }
  }
  fs::create_directories(out);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness},
      {2, "zero evidence gradient in the HUA", hua_zero_gradient},
      {3, "regularizer gradient is -|y - gamma|", unc_reg_gradient},
      {4, "multivariate gradients", multivariate_gradients},
      {5, "marginal-likelihood consistency", marginal_consistency},
      {6, "cubic from HUA init", [&] { return cubic_hua(out); }},
      {7, "cubic outside the HUA", [&] { return cubic_outside(out); }},
      {8, "circle from HUA init", [&] { return circle_hua(out); }},
      {9, "calibration self-consistency", calibration_self_consistency},
      {10, "determinism", [&] { return determinism(out); }},
  };

  json summary = json::object();
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) {
      continue;
    }
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    summary[std::to_string(c.id)] = {{"title", c.title}, {"pass", o.pass}, {"detail", o.detail}};
  }
  std::ofstream(out / "acceptance.json") << summary.dump(1) << '\n';
  std::printf("%d of %zu criteria failed\n", failed, only.empty() ? criteria.size() : only.size());
  return failed == 0 ? 0 : 1;
}
