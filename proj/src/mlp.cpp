#include "evireg/mlp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "evireg/multivariate.hpp"
#include "evireg/rng.hpp"

namespace evireg {

namespace {

void check_shapes(const MLPWeights& a, const MLPWeights& b, const char* fn) {
  if (a.layers.size() != b.layers.size()) {
    throw std::invalid_argument(std::string(fn) + ": layer count mismatch");
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].w.rows() != b.layers[i].w.rows() || a.layers[i].w.cols() != b.layers[i].w.cols() ||
        a.layers[i].b.size() != b.layers[i].b.size()) {
      throw std::invalid_argument(std::string(fn) + ": shape mismatch in layer " + std::to_string(i));
    }
  }
}

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, HiddenActivation act) {
  switch (act) {
    case HiddenActivation::ReLU:
      return z.cwiseMax(0.0);
    case HiddenActivation::Tanh:
      return z.array().tanh().matrix();
  }
  return z;
}

// Multiplies the upstream gradient by the activation derivative in place.
void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& z, HiddenActivation act) {
  switch (act) {
    case HiddenActivation::ReLU:
      grad.array() *= (z.array() > 0.0).cast<double>();
      break;
    case HiddenActivation::Tanh:
      grad.array() *= 1.0 - z.array().tanh().square();
      break;
  }
}

bool bitwise_equal(const double* a, const double* b, Eigen::Index n) {
  return std::memcmp(a, b, static_cast<std::size_t>(n) * sizeof(double)) == 0;
}

}  // namespace

std::string_view to_string(HiddenActivation act) noexcept {
  return act == HiddenActivation::Tanh ? "tanh" : "relu";
}

HiddenActivation parse_hidden_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "relu") {
    return HiddenActivation::ReLU;
  }
  if (lower == "tanh") {
    return HiddenActivation::Tanh;
  }
  throw std::invalid_argument("unknown hidden activation '" + std::string(name) + "' (expected relu or tanh)");
}

void MLPConfig::validate() const {
  if (input_dim < 1) {
    throw std::invalid_argument("model.input_dim must be >= 1");
  }
  for (int width : hidden_widths) {
    if (width < 1) {
      throw std::invalid_argument("model.hidden_widths entries must be >= 1");
    }
  }
  bool known_head = output_dim == 4;
  for (int n = 2; !known_head && multi_head_size(n) <= output_dim; ++n) {
    known_head = multi_head_size(n) == output_dim;
  }
  if (!known_head) {
    throw std::invalid_argument("model.output_dim must be 4 or n(n+3)/2+1 for n >= 2, got " +
                                std::to_string(output_dim));
  }
}

MLPWeights MLPWeights::zeros_like() const {
  MLPWeights out;
  out.layers.reserve(layers.size());
  for (const auto& layer : layers) {
    out.layers.push_back({Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols()), Eigen::VectorXd::Zero(layer.b.size())});
  }
  return out;
}

std::size_t MLPWeights::parameter_count() const noexcept {
  std::size_t count = 0;
  for (const auto& layer : layers) {
    count += static_cast<std::size_t>(layer.w.size() + layer.b.size());
  }
  return count;
}

bool MLPWeights::all_finite() const noexcept {
  return std::all_of(layers.begin(), layers.end(),
                     [](const DenseLayer& l) { return l.w.allFinite() && l.b.allFinite(); });
}

int MLPWeights::input_dim() const noexcept {
  return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols());
}

int MLPWeights::output_dim() const noexcept {
  return layers.empty() ? 0 : static_cast<int>(layers.back().w.rows());
}

bool MLPWeights::identical(const MLPWeights& other) const noexcept {
  if (layers.size() != other.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.w.rows() != b.w.rows() || a.w.cols() != b.w.cols() || a.b.size() != b.b.size()) {
      return false;
    }
    if (!bitwise_equal(a.w.data(), b.w.data(), a.w.size()) || !bitwise_equal(a.b.data(), b.b.data(), a.b.size())) {
      return false;
    }
  }
  return true;
}

AdamState AdamState::for_weights(const MLPWeights& weights, double lr) {
  AdamState s;
  s.m = weights.zeros_like();
  s.v = weights.zeros_like();
  s.lr = lr;
  return s;
}

MLPWeights init(const MLPConfig& config) {
  config.validate();
  Rng rng(config.seed);
  MLPWeights weights;
  int fan_in = config.input_dim;
  std::vector<int> widths = config.hidden_widths;
  widths.push_back(config.output_dim);
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const int fan_out = widths[i];
    DenseLayer layer{Eigen::MatrixXd::Zero(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    const double stddev = std::sqrt(2.0 / fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) {
        layer.w(r, c) = rng.normal(0.0, stddev);
      }
    }
    weights.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return weights;
}

MLPWeights hua_init(MLPWeights weights, int channel, double bias_offset) {
  if (weights.layers.empty() || channel < 0 || channel >= weights.output_dim()) {
    throw std::out_of_range("hua_init: channel " + std::to_string(channel) + " is outside the output layer");
  }
  weights.layers.back().b(channel) = bias_offset;
  return weights;
}

Eigen::MatrixXd forward(const MLPWeights& weights, HiddenActivation act, const Eigen::MatrixXd& x,
                        ForwardCache* cache) {
  if (weights.layers.empty()) {
    throw std::invalid_argument("forward: network has no layers");
  }
  if (x.rows() != weights.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                                std::to_string(weights.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre_activations.clear();
  }
  Eigen::MatrixXd h = x;
  const std::size_t last = weights.layers.size() - 1;
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    const auto& layer = weights.layers[i];
    Eigen::MatrixXd z = layer.w * h;
    z.colwise() += layer.b;
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(h));
    }
    if (i == last) {
      return z;
    }
    h = activate(z, act);
    if (cache != nullptr) {
      cache->pre_activations.push_back(std::move(z));
    }
  }
  return h;
}

MLPWeights backward(const MLPWeights& weights, HiddenActivation act, const ForwardCache& cache,
                    const Eigen::MatrixXd& d_raw) {
  const std::size_t n_layers = weights.layers.size();
  if (cache.inputs.size() != n_layers || cache.pre_activations.size() + 1 != n_layers) {
    throw std::invalid_argument("backward: cache does not match the network");
  }
  if (d_raw.rows() != weights.output_dim() || d_raw.cols() != cache.inputs.front().cols()) {
    throw std::invalid_argument("backward: upstream gradient shape mismatch");
  }
  MLPWeights grads;
  grads.layers.resize(n_layers);
  Eigen::MatrixXd delta = d_raw;
  for (std::size_t k = n_layers; k-- > 0;) {
    grads.layers[k].w = delta * cache.inputs[k].transpose();
    grads.layers[k].b = delta.rowwise().sum();
    if (k == 0) {
      break;
    }
    delta = weights.layers[k].w.transpose() * delta;
    activation_backward(delta, cache.pre_activations[k - 1], act);
  }
  return grads;
}

void adam_step(MLPWeights& weights, const MLPWeights& grads, AdamState& state) {
  check_shapes(weights, grads, "adam_step");
  check_shapes(weights, state.m, "adam_step");
  check_shapes(weights, state.v, "adam_step");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double m_correction = 1.0 - std::pow(state.beta1, t);
  const double v_correction = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m.array() = state.beta1 * m.array() + (1.0 - state.beta1) * grad.array();
    v.array() = state.beta2 * v.array() + (1.0 - state.beta2) * grad.array().square();
    param.array() -= state.lr * (m.array() / m_correction) / ((v.array() / v_correction).sqrt() + state.eps);
  };
  for (std::size_t i = 0; i < weights.layers.size(); ++i) {
    update(weights.layers[i].w, grads.layers[i].w, state.m.layers[i].w, state.v.layers[i].w);
    update(weights.layers[i].b, grads.layers[i].b, state.m.layers[i].b, state.v.layers[i].b);
  }
}

}  // namespace evireg
