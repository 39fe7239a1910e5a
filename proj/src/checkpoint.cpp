#include "evireg/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace evireg {

using nlohmann::json;

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      row.push_back(m(r, c));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(v(i));
  }
  return out;
}

json layers_to_json(const MLPWeights& weights) {
  json layers = json::array();
  for (const auto& layer : weights.layers) {
    layers.push_back({{"w", matrix_to_json(layer.w)}, {"b", vector_to_json(layer.b)}});
  }
  return layers;
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw CheckpointError(path + key, "missing field");
  }
  return obj.at(key);
}

double read_number(const json& value, const std::string& path) {
  if (!value.is_number()) {
    throw CheckpointError(path, "expected a number");
  }
  const double x = value.get<double>();
  if (!std::isfinite(x)) {
    throw CheckpointError(path, "non-finite value");
  }
  return x;
}

int read_int(const json& value, const std::string& path) {
  if (!value.is_number_integer()) {
    throw CheckpointError(path, "expected an integer");
  }
  return value.get<int>();
}

std::string read_string(const json& value, const std::string& path) {
  if (!value.is_string()) {
    throw CheckpointError(path, "expected a string");
  }
  return value.get<std::string>();
}

Eigen::VectorXd read_vector(const json& value, Eigen::Index expected, const std::string& path) {
  if (!value.is_array() || static_cast<Eigen::Index>(value.size()) != expected) {
    throw CheckpointError(path, "expected an array of " + std::to_string(expected) + " numbers");
  }
  Eigen::VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) {
    v(i) = read_number(value[static_cast<std::size_t>(i)], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Eigen::MatrixXd read_matrix(const json& value, Eigen::Index rows, Eigen::Index cols, const std::string& path) {
  if (!value.is_array() || static_cast<Eigen::Index>(value.size()) != rows) {
    throw CheckpointError(path, "expected " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    m.row(r) = read_vector(value[static_cast<std::size_t>(r)], cols, path + "[" + std::to_string(r) + "]").transpose();
  }
  return m;
}

MLPWeights read_layers(const json& value, const MLPConfig& config, const std::string& path) {
  std::vector<int> widths = config.hidden_widths;
  widths.push_back(config.output_dim);
  if (!value.is_array() || value.size() != widths.size()) {
    throw CheckpointError(path, "expected " + std::to_string(widths.size()) + " layers");
  }
  MLPWeights weights;
  int fan_in = config.input_dim;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string layer_path = path + "[" + std::to_string(i) + "]";
    const json& layer = value[i];
    DenseLayer dense;
    dense.w = read_matrix(require(layer, "w", layer_path + "."), widths[i], fan_in, layer_path + ".w");
    dense.b = read_vector(require(layer, "b", layer_path + "."), widths[i], layer_path + ".b");
    weights.layers.push_back(std::move(dense));
    fan_in = widths[i];
  }
  return weights;
}

}  // namespace

CheckpointError::CheckpointError(std::string field, const std::string& message)
    : std::runtime_error("checkpoint field '" + field + "': " + message), field_(std::move(field)) {}

std::string checkpoint_to_string(const Checkpoint& ckpt) {
  const Model& model = ckpt.model;
  if (!model.weights.all_finite() || !ckpt.adam.m.all_finite() || !ckpt.adam.v.all_finite()) {
    throw CheckpointError("layers", "refusing to save non-finite weights");
  }
  json doc;
  doc["version"] = kCheckpointVersion;
  doc["seed"] = model.config.seed;
  doc["config"] = {{"input_dim", model.config.input_dim},
                   {"hidden_widths", model.config.hidden_widths},
                   {"output_dim", model.config.output_dim},
                   {"hidden_activation", std::string(to_string(model.config.hidden_activation))},
                   {"seed", model.config.seed}};
  doc["head"] = {{"kind", model.head.kind == HeadSpec::Kind::NIG ? "nig" : "niw"},
                 {"activation", std::string(to_string(model.head.activation))},
                 {"n", model.head.n}};
  doc["layers"] = layers_to_json(model.weights);
  doc["adam"] = {{"m", layers_to_json(ckpt.adam.m)},
                 {"v", layers_to_json(ckpt.adam.v)},
                 {"t", ckpt.adam.step},
                 {"lr", ckpt.adam.lr},
                 {"beta1", ckpt.adam.beta1},
                 {"beta2", ckpt.adam.beta2},
                 {"eps", ckpt.adam.eps}};
  return doc.dump(1) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError("<document>", std::string("malformed JSON: ") + e.what());
  }
  const int version = read_int(require(doc, "version", ""), "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("version", "unsupported version " + std::to_string(version) + " (expected " +
                                         std::to_string(kCheckpointVersion) + ")");
  }

  const json& cfg = require(doc, "config", "");
  MLPConfig config;
  config.input_dim = read_int(require(cfg, "input_dim", "config."), "config.input_dim");
  const json& widths = require(cfg, "hidden_widths", "config.");
  if (!widths.is_array()) {
    throw CheckpointError("config.hidden_widths", "expected an array");
  }
  config.hidden_widths.clear();
  for (std::size_t i = 0; i < widths.size(); ++i) {
    config.hidden_widths.push_back(read_int(widths[i], "config.hidden_widths[" + std::to_string(i) + "]"));
  }
  config.output_dim = read_int(require(cfg, "output_dim", "config."), "config.output_dim");
  try {
    config.hidden_activation =
        parse_hidden_activation(read_string(require(cfg, "hidden_activation", "config."), "config.hidden_activation"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("config.hidden_activation", e.what());
  }
  const json& seed = require(cfg, "seed", "config.");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw CheckpointError("config.seed", "expected an unsigned integer");
  }
  config.seed = seed.get<std::uint64_t>();
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("config", e.what());
  }

  const json& head_json = require(doc, "head", "");
  HeadSpec head;
  const std::string kind = read_string(require(head_json, "kind", "head."), "head.kind");
  if (kind == "nig") {
    head.kind = HeadSpec::Kind::NIG;
  } else if (kind == "niw") {
    head.kind = HeadSpec::Kind::NIW;
  } else {
    throw CheckpointError("head.kind", "expected 'nig' or 'niw'");
  }
  try {
    head.activation = parse_activation(read_string(require(head_json, "activation", "head."), "head.activation"));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("head.activation", e.what());
  }
  head.n = read_int(require(head_json, "n", "head."), "head.n");
  if (head.raw_size() != config.output_dim) {
    throw CheckpointError("head", "head size does not match config.output_dim");
  }

  Checkpoint ckpt;
  ckpt.model.config = config;
  ckpt.model.head = head;
  ckpt.model.weights = read_layers(require(doc, "layers", ""), config, "layers");

  const json& adam = require(doc, "adam", "");
  ckpt.adam.m = read_layers(require(adam, "m", "adam."), config, "adam.m");
  ckpt.adam.v = read_layers(require(adam, "v", "adam."), config, "adam.v");
  const json& t = require(adam, "t", "adam.");
  if (!t.is_number_integer() || t.get<long>() < 0) {
    throw CheckpointError("adam.t", "expected a non-negative integer");
  }
  ckpt.adam.step = t.get<long>();
  ckpt.adam.lr = read_number(require(adam, "lr", "adam."), "adam.lr");
  ckpt.adam.beta1 = read_number(require(adam, "beta1", "adam."), "adam.beta1");
  ckpt.adam.beta2 = read_number(require(adam, "beta2", "adam."), "adam.beta2");
  ckpt.adam.eps = read_number(require(adam, "eps", "adam."), "adam.eps");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_string(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  }
  out << text;
  if (!out) {
    throw std::runtime_error("failed writing checkpoint: " + path.string());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("<file>", "cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace evireg
