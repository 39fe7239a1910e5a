#include "evireg/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "evireg/gradcheck.hpp"
#include "evireg/multivariate.hpp"
#include "json.hpp"

namespace evireg {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw ConfigError(path_ + ": expected an object");
    }
  }

  [[nodiscard]] const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) {
        throw ConfigError(where(key) + ": expected a finite number");
      }
      out = v->get<double>();
    }
  }

  void integer(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) {
        throw ConfigError(where(key) + ": expected an integer");
      }
      out = v->get<int>();
    }
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        throw ConfigError(where(key) + ": expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) {
        throw ConfigError(where(key) + ": expected true or false");
      }
      out = v->get<bool>();
    }
  }

  bool string(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) {
        throw ConfigError(where(key) + ": expected a string");
      }
      out = v->get<std::string>();
      return true;
    }
    return false;
  }

  template <typename T, typename Parse>
  void parsed(const std::string& key, T& out, Parse parse) {
    std::string s;
    if (string(key, s)) {
      try {
        out = parse(s);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where(key) + ": " + e.what());
      }
    }
  }

  [[nodiscard]] std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError(where(it.key()) + ": unknown key");
      }
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

CircleAngleSampling parse_sampling(std::string_view s) {
  if (s == "valley") {
    return CircleAngleSampling::ValleyDensity;
  }
  if (s == "literal") {
    return CircleAngleSampling::LiteralTransform;
  }
  throw std::invalid_argument("unknown sampling '" + std::string(s) + "' (expected valley or literal)");
}

std::string_view sampling_name(CircleAngleSampling s) {
  return s == CircleAngleSampling::ValleyDensity ? "valley" : "literal";
}

void parse_model(Section& s, MLPConfig& m) {
  if (const json* v = s.find("hidden_widths")) {
    if (!v->is_array()) {
      throw ConfigError(s.where("hidden_widths") + ": expected an array of integers");
    }
    m.hidden_widths.clear();
    for (const auto& w : *v) {
      if (!w.is_number_integer()) {
        throw ConfigError(s.where("hidden_widths") + ": expected an array of integers");
      }
      m.hidden_widths.push_back(w.get<int>());
    }
  }
  s.parsed("hidden_activation", m.hidden_activation, parse_hidden_activation);
  s.u64("seed", m.seed);
  s.integer("input_dim", m.input_dim);
  s.integer("output_dim", m.output_dim);
  s.finish();
}

}  // namespace

std::string_view to_string(Experiment e) noexcept {
  switch (e) {
    case Experiment::Cubic: return "cubic";
    case Experiment::Circle: return "circle";
    case Experiment::Tabular: return "tabular";
    case Experiment::Gradcheck: return "gradcheck";
    case Experiment::HuaDemo: return "hua-demo";
    case Experiment::Sensitivity: return "sensitivity";
  }
  return "cubic";
}

std::string_view to_string(Variant v) noexcept {
  switch (v) {
    case Variant::ERN: return "ERN";
    case Variant::NLL_ERN: return "NLL-ERN";
    case Variant::UR_ERN: return "UR-ERN";
  }
  return "ERN";
}

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::Cubic, Experiment::Circle, Experiment::Tabular, Experiment::Gradcheck,
                       Experiment::HuaDemo, Experiment::Sensitivity}) {
    if (to_string(e) == name) {
      return e;
    }
  }
  throw ConfigError("unknown experiment '" + std::string(name) +
                    "' (expected cubic, circle, tabular, gradcheck, hua-demo or sensitivity)");
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::ERN, Variant::NLL_ERN, Variant::UR_ERN}) {
    if (to_string(v) == name) {
      return v;
    }
  }
  throw ConfigError("unknown variant '" + std::string(name) + "' (expected ERN, NLL-ERN or UR-ERN)");
}

RunConfig default_config(Experiment e) {
  RunConfig c;
  c.experiment = e;
  c.name = std::string(to_string(e));
  if (e == Experiment::Circle) {
    c.model.hidden_widths = {32, 32};
    c.model.output_dim = multi_head_size(2);
  }
  return c;
}

LossWeights RunConfig::weights_for(Variant v) const {
  LossWeights w;
  w.detach_error_in_U = loss.detach_error_in_U;
  switch (v) {
    case Variant::ERN:
      w.lambda = loss.lambda;
      break;
    case Variant::NLL_ERN:
      break;
    case Variant::UR_ERN:
      w.lambda = loss.lambda;
      w.lambda1 = loss.lambda1;
      break;
  }
  return w;
}

RunConfig RunConfig::for_variant(Variant v) const {
  RunConfig c = *this;
  const LossWeights w = weights_for(v);
  c.variants.clear();
  c.loss.variant = v;
  c.loss.lambda = w.lambda;
  c.loss.lambda1 = w.lambda1;
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (name.empty() || name.find_first_of("/\\") != std::string::npos || name == "." || name == "..") {
    fail("name must be a non-empty plain directory name");
  }
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
  if (!(loss.lambda >= 0.0) || !(loss.lambda1 >= 0.0)) {
    fail("loss.lambda and loss.lambda1 must be >= 0");
  }
  if (!(loss.r > 0.0)) {
    fail("loss.r must be > 0");
  }
  if (train.epochs < 0 || train.batch_size < 1 || !(train.lr > 0.0)) {
    fail("train needs epochs >= 0, batch_size >= 1 and lr > 0");
  }

  const bool needs_training = experiment == Experiment::Cubic || experiment == Experiment::Circle ||
                              experiment == Experiment::Tabular || experiment == Experiment::Sensitivity;
  if (needs_training) {
    const std::vector<Variant> used = variants.empty() ? std::vector<Variant>{loss.variant} : variants;
    for (Variant v : used) {
      const bool listed = !variants.empty();
      switch (v) {
        case Variant::ERN:
          if (!(loss.lambda > 0.0)) {
            fail("variant ERN requires loss.lambda > 0");
          }
          if (!listed && loss.lambda1 != 0.0) {
            fail("variant ERN requires loss.lambda1 = 0");
          }
          break;
        case Variant::NLL_ERN:
          if (!listed && (loss.lambda != 0.0 || loss.lambda1 != 0.0)) {
            fail("variant NLL-ERN requires loss.lambda = 0 and loss.lambda1 = 0");
          }
          break;
        case Variant::UR_ERN:
          if (!(loss.lambda1 > 0.0)) {
            fail("variant UR-ERN requires loss.lambda1 > 0");
          }
          if (loss.activation == ActivationKind::ReLU && experiment != Experiment::Circle) {
            fail("variant UR-ERN is incompatible with the relu alpha activation");
          }
          break;
      }
    }
  }

  const int expected_out = experiment == Experiment::Circle ? multi_head_size(2) : 4;
  const int expected_in = experiment == Experiment::Tabular ? model.input_dim : 1;
  if (needs_training && model.output_dim != expected_out) {
    fail("model.output_dim must be " + std::to_string(expected_out) + " for the " + std::string(to_string(experiment)) +
         " experiment");
  }
  if (needs_training && experiment != Experiment::Tabular && model.input_dim != expected_in) {
    fail("model.input_dim must be 1 for the " + std::string(to_string(experiment)) + " experiment");
  }

  switch (experiment) {
    case Experiment::Cubic:
    case Experiment::Sensitivity:
      if (cubic.n_train < 1 || cubic.eval_points < 2 || !(cubic.noise_std >= 0.0)) {
        fail("data needs n_train >= 1, eval_points >= 2 and noise_std >= 0");
      }
      break;
    case Experiment::Circle:
      if (circle.n < 1 || circle.eval_points < 2 || !(circle.noise_std >= 0.0)) {
        fail("data needs n >= 1, eval_points >= 2 and noise_std >= 0");
      }
      break;
    case Experiment::Tabular:
      if (tabular.path.empty()) {
        fail("data.path is required for the tabular experiment");
      }
      if (tabular.targets.size() != 1) {
        fail("data.targets must name exactly one column");
      }
      if (!(tabular.train_frac > 0.0 && tabular.train_frac < 1.0) || tabular.repeats < 1) {
        fail("data needs 0 < train_frac < 1 and repeats >= 1");
      }
      break;
    case Experiment::Gradcheck:
      if (gradcheck.probes < 1 || gradcheck.multi_probes < 1) {
        fail("gradcheck.probes and gradcheck.multi_probes must be >= 1");
      }
      if (!gradcheck.inject_fault.empty()) {
        const auto& known = gradcheck_fault_channels();
        if (std::find(known.begin(), known.end(), gradcheck.inject_fault) == known.end()) {
          fail("gradcheck.inject_fault: unknown channel '" + gradcheck.inject_fault + "'");
        }
      }
      break;
    case Experiment::HuaDemo:
      break;
  }
  if (experiment == Experiment::Sensitivity) {
    if (lambda1_grid.empty()) {
      fail("lambda1_grid must not be empty");
    }
    for (double l1 : lambda1_grid) {
      if (!(l1 > 0.0)) {
        fail("lambda1_grid entries must be > 0");
      }
    }
  }
}

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  Section root(doc, "config");
  std::string experiment_name = "cubic";
  root.string("experiment", experiment_name);
  RunConfig c = default_config(parse_experiment(experiment_name));
  root.string("name", c.name);

  std::string out_dir;
  if (root.string("output_dir", out_dir)) {
    c.output_dir = out_dir;
  }

  if (const json* v = root.find("model")) {
    Section s(*v, "model");
    parse_model(s, c.model);
  }
  if (c.experiment == Experiment::Circle) {
    c.loss.variant = Variant::UR_ERN;
  }
  if (const json* v = root.find("loss")) {
    Section s(*v, "loss");
    s.parsed("variant", c.loss.variant, parse_variant);
    s.number("lambda", c.loss.lambda);
    s.number("lambda1", c.loss.lambda1);
    s.parsed("activation", c.loss.activation, parse_activation);
    s.boolean("detach_error_in_U", c.loss.detach_error_in_U);
    s.number("r", c.loss.r);
    s.finish();
  }
  if (const json* v = root.find("variants")) {
    if (!v->is_array()) {
      throw ConfigError("config.variants: expected an array of variant names");
    }
    for (const auto& name : *v) {
      if (!name.is_string()) {
        throw ConfigError("config.variants: expected an array of variant names");
      }
      c.variants.push_back(parse_variant(name.get<std::string>()));
    }
  }
  if (const json* v = root.find("train")) {
    Section s(*v, "train");
    s.integer("epochs", c.train.epochs);
    s.integer("batch_size", c.train.batch_size);
    s.number("lr", c.train.lr);
    s.u64("seed", c.train.seed);
    s.boolean("hua_init", c.train.hua_init);
    s.number("hua_bias", c.train.hua_bias);
    s.finish();
  }
  if (const json* v = root.find("data")) {
    Section s(*v, "data");
    switch (c.experiment) {
      case Experiment::Circle: {
        s.integer("n", c.circle.n);
        s.u64("seed", c.circle.seed);
        s.number("noise_std", c.circle.noise_std);
        s.parsed("sampling", c.circle.sampling, parse_sampling);
        s.integer("eval_points", c.circle.eval_points);
        break;
      }
      case Experiment::Tabular: {
        std::string path;
        if (s.string("path", path)) {
          const std::filesystem::path p(path);
          c.tabular.path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        }
        if (const json* t = s.find("targets")) {
          if (!t->is_array()) {
            throw ConfigError("data.targets: expected an array of column names");
          }
          for (const auto& col : *t) {
            if (!col.is_string()) {
              throw ConfigError("data.targets: expected an array of column names");
            }
            c.tabular.targets.push_back(col.get<std::string>());
          }
        }
        s.number("train_frac", c.tabular.train_frac);
        s.integer("repeats", c.tabular.repeats);
        s.u64("seed", c.tabular.seed);
        break;
      }
      default: {
        s.integer("n_train", c.cubic.n_train);
        s.u64("seed", c.cubic.seed);
        s.number("noise_std", c.cubic.noise_std);
        s.integer("eval_points", c.cubic.eval_points);
        break;
      }
    }
    s.finish();
  }
  if (const json* v = root.find("gradcheck")) {
    Section s(*v, "gradcheck");
    s.integer("probes", c.gradcheck.probes);
    s.integer("multi_probes", c.gradcheck.multi_probes);
    s.u64("seed", c.gradcheck.seed);
    s.string("inject_fault", c.gradcheck.inject_fault);
    s.finish();
  }
  if (const json* v = root.find("eval")) {
    Section s(*v, "eval");
    std::string ckpt;
    if (s.string("checkpoint", ckpt)) {
      const std::filesystem::path p(ckpt);
      c.eval.checkpoint = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
    s.boolean("ood", c.eval.ood);
    s.boolean("epistemic_entropy", c.eval.epistemic_entropy);
    s.number("hua_epsilon", c.eval.hua_epsilon);
    if (!(c.eval.hua_epsilon > 0.0)) {
      throw ConfigError("config.eval.hua_epsilon: must be > 0");
    }
    s.finish();
  }
  if (const json* v = root.find("lambda1_grid")) {
    if (!v->is_array()) {
      throw ConfigError("config.lambda1_grid: expected an array of numbers");
    }
    c.lambda1_grid.clear();
    for (const auto& x : *v) {
      if (!x.is_number()) {
        throw ConfigError("config.lambda1_grid: expected an array of numbers");
      }
      c.lambda1_grid.push_back(x.get<double>());
    }
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot read config " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  // Snapshots are re-read from run directories, so relative data paths are
  // pinned to the config file location here.
  return parse_config(ss.str(), std::filesystem::absolute(path).lexically_normal().parent_path());
}

std::string config_to_string(const RunConfig& c) {
  json doc;
  doc["name"] = c.name;
  doc["experiment"] = std::string(to_string(c.experiment));
  doc["output_dir"] = c.output_dir.string();
  doc["model"] = {{"input_dim", c.model.input_dim},
                  {"hidden_widths", c.model.hidden_widths},
                  {"output_dim", c.model.output_dim},
                  {"hidden_activation", std::string(to_string(c.model.hidden_activation))},
                  {"seed", c.model.seed}};
  doc["loss"] = {{"variant", std::string(to_string(c.loss.variant))},
                 {"lambda", c.loss.lambda},
                 {"lambda1", c.loss.lambda1},
                 {"activation", std::string(to_string(c.loss.activation))},
                 {"detach_error_in_U", c.loss.detach_error_in_U},
                 {"r", c.loss.r}};
  if (!c.variants.empty()) {
    json vs = json::array();
    for (Variant v : c.variants) {
      vs.push_back(std::string(to_string(v)));
    }
    doc["variants"] = vs;
  }
  doc["train"] = {{"epochs", c.train.epochs},     {"batch_size", c.train.batch_size},
                  {"lr", c.train.lr},             {"seed", c.train.seed},
                  {"hua_init", c.train.hua_init}, {"hua_bias", c.train.hua_bias}};
  switch (c.experiment) {
    case Experiment::Circle:
      doc["data"] = {{"n", c.circle.n},
                     {"seed", c.circle.seed},
                     {"noise_std", c.circle.noise_std},
                     {"sampling", std::string(sampling_name(c.circle.sampling))},
                     {"eval_points", c.circle.eval_points}};
      break;
    case Experiment::Tabular:
      doc["data"] = {{"path", c.tabular.path.string()},
                     {"targets", c.tabular.targets},
                     {"train_frac", c.tabular.train_frac},
                     {"repeats", c.tabular.repeats},
                     {"seed", c.tabular.seed}};
      break;
    default:
      doc["data"] = {{"n_train", c.cubic.n_train},
                     {"seed", c.cubic.seed},
                     {"noise_std", c.cubic.noise_std},
                     {"eval_points", c.cubic.eval_points}};
      break;
  }
  doc["gradcheck"] = {{"probes", c.gradcheck.probes},
                      {"multi_probes", c.gradcheck.multi_probes},
                      {"seed", c.gradcheck.seed},
                      {"inject_fault", c.gradcheck.inject_fault}};
  json ev = {{"ood", c.eval.ood}, {"epistemic_entropy", c.eval.epistemic_entropy},
             {"hua_epsilon", c.eval.hua_epsilon}};
  if (c.eval.checkpoint) {
    ev["checkpoint"] = c.eval.checkpoint->string();
  }
  doc["eval"] = ev;
  doc["lambda1_grid"] = c.lambda1_grid;
  return doc.dump(2) + "\n";
}

}  // namespace evireg
