#include "evireg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "evireg/losses.hpp"
#include "evireg/mlp.hpp"
#include "evireg/model.hpp"
#include "evireg/multivariate.hpp"
#include "evireg/rng.hpp"
#include "evireg/special.hpp"
#include "json.hpp"

namespace evireg {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kHeadTolerance = 1e-6;
constexpr double kNetworkTolerance = 1e-5;
constexpr double kUlpBound = 4.0;

double scaled_error(double analytic, double fd) {
  return std::fabs(analytic - fd) / std::max({1.0, std::fabs(analytic), std::fabs(fd)});
}

double ulps(double value, double reference) {
  const double mag = std::fabs(reference);
  const double ulp = std::nextafter(mag, std::numeric_limits<double>::infinity()) - mag;
  return std::fabs(value - reference) / ulp;
}

// Corrupts a closed-form value when the named fault is active.
double maybe_fault(double g, const std::string& fault, const char* channel) {
  return fault == channel ? g * 1.01 + 1e-3 : g;
}

void record(FdSuite& suite, const std::string& channel, double err) {
  for (auto& c : suite.channels) {
    if (c.channel == channel) {
      c.max_error = std::max(c.max_error, err);
      return;
    }
  }
  suite.channels.push_back({channel, err});
}

void finish(FdSuite& suite, std::vector<std::string>& failures) {
  for (const auto& c : suite.channels) {
    if (!(c.max_error < suite.tolerance)) {
      suite.pass = false;
      failures.push_back(suite.name + "." + c.channel);
    }
  }
}

// L^U with |y - gamma| frozen at the probe point, matching the detached gradient.
double detached_unc_reg(const RawHead& raw, double abs_err, ActivationKind kind) {
  return kind == ActivationKind::SoftPlus ? -abs_err * raw.o_alpha : -abs_err * log_expm1(std::exp(raw.o_alpha));
}

FdSuite uni_suite(ActivationKind kind, int probes, Rng& rng, const std::string& fault) {
  FdSuite suite;
  suite.name = "uni." + std::string(to_string(kind));
  suite.probes = probes;
  suite.tolerance = kHeadTolerance;
  LossWeights w;
  w.lambda = 0.01;
  w.lambda1 = kind == ActivationKind::ReLU ? 0.0 : 0.1;
  for (int i = 0; i < probes; ++i) {
    RawHead raw{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    if (kind == ActivationKind::ReLU) {
      while (std::fabs(raw.o_alpha) < 1e-3) {
        raw.o_alpha = rng.uniform(-3, 3);
      }
    }
    const double y = rng.uniform(-5, 5);
    const double abs_err = std::fabs(y - raw.o_gamma);
    LossWeights ern = w;
    ern.lambda1 = 0.0;
    const HeadLossFn f = [&](const RawHead& r, double yy) {
      double total = total_loss(r, yy, ern, kind).total;
      if (w.lambda1 != 0.0) {
        total += w.lambda1 * detached_unc_reg(r, abs_err, kind);
      }
      return total;
    };
    const HeadGradient fd = grad_check(f, raw, y, kFdStep);
    const HeadGradient an = grad_head(raw, y, w, kind);
    record(suite, "d_o_gamma", scaled_error(maybe_fault(an.d_o_gamma, fault, "gamma"), fd.d_o_gamma));
    record(suite, "d_o_v", scaled_error(maybe_fault(an.d_o_v, fault, "v"), fd.d_o_v));
    record(suite, "d_o_alpha", scaled_error(maybe_fault(an.d_o_alpha, fault, "alpha"), fd.d_o_alpha));
    record(suite, "d_o_beta", scaled_error(maybe_fault(an.d_o_beta, fault, "beta"), fd.d_o_beta));
  }
  return suite;
}

std::string multi_channel(const RawHeadM& raw, int i) {
  const int n = raw.n;
  if (i < n) {
    return "mu";
  }
  if (i < 2 * n) {
    return "log_diag";
  }
  if (i == raw.nu_index()) {
    return "nu";
  }
  return "lower";
}

FdSuite multi_suite(int probes, Rng& rng, const std::string& fault) {
  FdSuite suite;
  suite.name = "multi.n2";
  suite.probes = probes;
  suite.tolerance = kHeadTolerance;
  const int n = 2;
  const double lambda1 = 0.1;
  const int m = multi_head_size(n);
  for (int k = 0; k < probes; ++k) {
    RawHeadM raw = RawHeadM::zeros(n);
    for (int i = 0; i < m; ++i) {
      raw.p(i) = rng.uniform(-2, 2);
    }
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      y(i) = rng.uniform(-2, 2);
    }
    const double err_norm = (y - raw.p.head(n)).norm();
    auto f = [&](const RawHeadM& r) {
      return mern_nll(transform_multi(r), y) - lambda1 * err_norm * r.p_nu();
    };
    const Eigen::VectorXd an = grad_multi(raw, y, lambda1);
    for (int i = 0; i < m; ++i) {
      RawHeadM plus = raw;
      RawHeadM minus = raw;
      plus.p(i) += kFdStep;
      minus.p(i) -= kFdStep;
      const double fd = (f(plus) - f(minus)) / (2.0 * kFdStep);
      const std::string channel = multi_channel(raw, i);
      record(suite, channel, scaled_error(maybe_fault(an(i), fault, channel.c_str()), fd));
    }
  }
  return suite;
}

// Pre-activations at least this far from the ReLU kink keep central
// differences on the smooth branch.
bool away_from_kinks(const ForwardCache& cache) {
  for (const auto& z : cache.pre_activations) {
    if ((z.array().abs() < 1e-3).any()) {
      return false;
    }
  }
  return true;
}

FdSuite network_suite(int probes, Rng& rng, const std::string& fault) {
  FdSuite suite;
  suite.name = "network.1-8-4";
  suite.probes = probes;
  suite.tolerance = kNetworkTolerance;
  MLPConfig cfg;
  cfg.hidden_widths = {8};
  HeadSpec head;
  LossSpec loss;
  loss.weights.lambda = 0.01;
  loss.weights.lambda1 = 0.1;
  const int batch = 4;
  int done = 0;
  while (done < probes) {
    cfg.seed = rng.next_u64();
    Model model = Model::create(cfg, head);
    for (auto& layer : model.weights.layers) {
      layer.b = Eigen::VectorXd::NullaryExpr(layer.b.size(), [&] { return rng.uniform(-0.5, 0.5); });
    }
    Eigen::MatrixXd x(1, batch);
    Eigen::MatrixXd y(batch, 1);
    for (int j = 0; j < batch; ++j) {
      x(0, j) = rng.uniform(-2, 2);
      y(j, 0) = rng.uniform(-3, 3);
    }
    ForwardCache cache;
    const Eigen::MatrixXd raw = forward(model.weights, cfg.hidden_activation, x, &cache);
    if (!away_from_kinks(cache)) {
      continue;
    }
    // Detached regularizer: freeze |y - gamma| at this point for the FD side.
    const BatchLoss base = batch_loss(head, loss, raw, y, true);
    const Eigen::ArrayXd abs_err = (y.col(0).array() - raw.row(0).transpose().array()).abs();
    auto f = [&](const MLPWeights& w) {
      const Eigen::MatrixXd r = forward(w, cfg.hidden_activation, x);
      LossSpec ern = loss;
      ern.weights.lambda1 = 0.0;
      double total = batch_loss(head, ern, r, y, false).total;
      total += loss.weights.lambda1 * (-(abs_err * r.row(2).transpose().array()).mean());
      return total;
    };
    MLPWeights grads = backward(model.weights, cfg.hidden_activation, cache, base.d_raw);
    if (fault == "network") {
      grads.layers[0].w(0, 0) = grads.layers[0].w(0, 0) * 1.01 + 1e-3;
    }
    double worst = 0.0;
    for (std::size_t l = 0; l < model.weights.layers.size(); ++l) {
      auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + kFdStep;
        const double fp = f(model.weights);
        param = saved - kFdStep;
        const double fm = f(model.weights);
        param = saved;
        worst = std::max(worst, scaled_error(analytic, (fp - fm) / (2.0 * kFdStep)));
      };
      auto& layer = model.weights.layers[l];
      for (Eigen::Index i = 0; i < layer.w.size(); ++i) {
        probe(layer.w.data()[i], grads.layers[l].w.data()[i]);
      }
      for (Eigen::Index i = 0; i < layer.b.size(); ++i) {
        probe(layer.b.data()[i], grads.layers[l].b.data()[i]);
      }
    }
    record(suite, "weights", worst);
    ++done;
  }
  return suite;
}

std::vector<HuaGradientRow> hua_gradient_table(Rng& rng, int probes) {
  std::vector<HuaGradientRow> rows;
  const std::vector<std::pair<ActivationKind, std::vector<double>>> cases = {
      {ActivationKind::SoftPlus, {-30.0, -50.0, -100.0, -1000.0}},
      {ActivationKind::Exp, {-30.0, -50.0, -100.0, -1000.0}},
      {ActivationKind::ReLU, {-1e-6, -0.5, -30.0, -1000.0}},
  };
  LossWeights w;
  w.lambda = 0.01;
  for (const auto& [kind, offsets] : cases) {
    for (double o_alpha : offsets) {
      HuaGradientRow row;
      row.activation = kind;
      row.o_alpha = o_alpha;
      row.bound = kind == ActivationKind::ReLU ? 0.0 : 1e-10;
      for (int i = 0; i < probes; ++i) {
        const RawHead raw{rng.uniform(-5, 5), rng.uniform(-5, 5), o_alpha, rng.uniform(-5, 5)};
        const double y = rng.uniform(-10, 10);
        row.max_abs_gradient = std::max(row.max_abs_gradient, std::fabs(grad_head(raw, y, w, kind).d_o_alpha));
      }
      row.pass = row.max_abs_gradient <= row.bound;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

const std::vector<std::string>& gradcheck_fault_channels() {
  static const std::vector<std::string> channels = {"gamma", "v",     "alpha", "beta",   "mu",
                                                    "log_diag", "lower", "nu",    "network"};
  return channels;
}

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  const std::string& fault = config.inject_fault;
  const auto& known = gradcheck_fault_channels();
  if (!fault.empty() && std::find(known.begin(), known.end(), fault) == known.end()) {
    throw std::invalid_argument("gradcheck.inject_fault: unknown channel '" + fault + "'");
  }
  GradcheckReport report;
  Rng rng(config.seed);

  for (ActivationKind kind : {ActivationKind::SoftPlus, ActivationKind::Exp, ActivationKind::ReLU}) {
    report.suites.push_back(uni_suite(kind, config.probes, rng, fault));
  }
  report.suites.push_back(multi_suite(config.multi_probes, rng, fault));
  report.suites.push_back(network_suite(100, rng, fault));
  for (auto& suite : report.suites) {
    finish(suite, report.failures);
  }

  report.hua_zero_gradient = hua_gradient_table(rng, config.probes);
  for (const auto& row : report.hua_zero_gradient) {
    if (!row.pass) {
      report.failures.push_back("hua_zero_gradient." + std::string(to_string(row.activation)));
    }
  }

  for (double o_alpha : {-1e6, -30.0, 0.0, 30.0, 1e6}) {
    for (int i = 0; i < config.probes; ++i) {
      const double gamma = rng.uniform(-5, 5);
      const double y = rng.uniform(-5, 5);
      const RawHead raw{gamma, rng.uniform(-3, 3), o_alpha, rng.uniform(-3, 3)};
      const double g = grad_terms(raw, y, ActivationKind::SoftPlus, true, true).unc_reg.d_o_alpha;
      const double target = -std::fabs(y - gamma);
      report.unc_reg_gradient_max_ulps = std::max(report.unc_reg_gradient_max_ulps, ulps(maybe_fault(g, fault, "alpha"), target));
    }
  }
  report.unc_reg_gradient_pass = report.unc_reg_gradient_max_ulps <= kUlpBound;
  if (!report.unc_reg_gradient_pass) {
    report.failures.push_back("unc_reg_gradient.d_o_alpha");
  }

  for (double p_nu : {-12.0, -20.0, -50.0}) {
    for (int k = 0; k < config.multi_probes; ++k) {
      RawHeadM raw = RawHeadM::zeros(2);
      for (int i = 0; i + 1 < raw.p.size(); ++i) {
        raw.p(i) = rng.uniform(-2, 2);
      }
      raw.p(raw.nu_index()) = p_nu;
      const Eigen::Vector2d y(rng.uniform(-3, 3), rng.uniform(-3, 3));
      const double g = grad_multi(raw, y, 0.0)(raw.nu_index());
      report.multi_hua_zero_gradient_max_abs = std::max(report.multi_hua_zero_gradient_max_abs, std::fabs(maybe_fault(g, fault, "nu")));
      const double gu = grad_unc_reg_multi(raw, y, 1.0)(raw.nu_index());
      report.multi_unc_reg_gradient_max_ulps =
          std::max(report.multi_unc_reg_gradient_max_ulps, ulps(maybe_fault(gu, fault, "nu"), -(y - raw.p.head(2)).norm()));
    }
  }
  report.multi_hua_zero_gradient_pass = report.multi_hua_zero_gradient_max_abs <= 1e-8;
  report.multi_unc_reg_gradient_pass = report.multi_unc_reg_gradient_max_ulps <= kUlpBound;
  if (!report.multi_hua_zero_gradient_pass) {
    report.failures.push_back("multi_hua_zero_gradient.nu");
  }
  if (!report.multi_unc_reg_gradient_pass) {
    report.failures.push_back("multi_unc_reg_gradient.nu");
  }
  return report;
}

std::string report_to_json(const GradcheckReport& report) {
  using nlohmann::json;
  json doc;
  doc["pass"] = report.pass();
  doc["failures"] = report.failures;
  json suites = json::array();
  for (const auto& s : report.suites) {
    json channels = json::object();
    for (const auto& c : s.channels) {
      channels[c.channel] = c.max_error;
    }
    suites.push_back({{"name", s.name},
                      {"probes", s.probes},
                      {"tolerance", s.tolerance},
                      {"max_error", channels},
                      {"pass", s.pass}});
  }
  doc["fd_suites"] = suites;
  json t1 = json::array();
  for (const auto& r : report.hua_zero_gradient) {
    t1.push_back({{"activation", std::string(to_string(r.activation))},
                  {"o_alpha", r.o_alpha},
                  {"max_abs_gradient", r.max_abs_gradient},
                  {"bound", r.bound},
                  {"pass", r.pass}});
  }
  doc["hua_zero_gradient"] = t1;
  doc["unc_reg_gradient"] = {{"max_ulps", report.unc_reg_gradient_max_ulps}, {"bound_ulps", kUlpBound}, {"pass", report.unc_reg_gradient_pass}};
  doc["multi_hua_zero_gradient"] = {{"max_abs_gradient", report.multi_hua_zero_gradient_max_abs}, {"bound", 1e-8}, {"pass", report.multi_hua_zero_gradient_pass}};
  doc["multi_unc_reg_gradient"] = {{"max_ulps", report.multi_unc_reg_gradient_max_ulps}, {"bound_ulps", kUlpBound}, {"pass", report.multi_unc_reg_gradient_pass}};
  return doc.dump(2) + "\n";
}

}  // namespace evireg
