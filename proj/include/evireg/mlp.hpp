#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string_view>
#include <vector>

namespace evireg {

enum class HiddenActivation { ReLU, Tanh };

[[nodiscard]] std::string_view to_string(HiddenActivation act) noexcept;
[[nodiscard]] HiddenActivation parse_hidden_activation(std::string_view name);

struct MLPConfig {
  int input_dim = 1;
  std::vector<int> hidden_widths{100, 100, 100};
  int output_dim = 4;
  HiddenActivation hidden_activation = HiddenActivation::ReLU;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on non-positive dims or an output size
  /// that is neither 4 nor n(n+3)/2+1 for some n >= 2.
  void validate() const;
  [[nodiscard]] bool operator==(const MLPConfig&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

/// Network parameters; also used as the container for their gradients and
/// for Adam's moment estimates.
struct MLPWeights {
  std::vector<DenseLayer> layers;

  [[nodiscard]] MLPWeights zeros_like() const;
  [[nodiscard]] std::size_t parameter_count() const noexcept;
  [[nodiscard]] bool all_finite() const noexcept;
  [[nodiscard]] int input_dim() const noexcept;
  [[nodiscard]] int output_dim() const noexcept;
  /// Bitwise equality of every weight.
  [[nodiscard]] bool identical(const MLPWeights& other) const noexcept;
};

/// Activations retained by forward() for backward(). Columns are samples.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;          // input to each layer
  std::vector<Eigen::MatrixXd> pre_activations;  // hidden layers only
};

struct AdamState {
  MLPWeights m;
  MLPWeights v;
  long step = 0;
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  [[nodiscard]] static AdamState for_weights(const MLPWeights& weights, double lr);
};

/// He-scaled Gaussian weights (std = sqrt(2 / fan_in)) and zero biases,
/// drawn from an Rng seeded with config.seed.
[[nodiscard]] MLPWeights init(const MLPConfig& config);

/// Sets the output bias of `channel` to `bias_offset`, leaving everything else untouched.
[[nodiscard]] MLPWeights hua_init(MLPWeights weights, int channel, double bias_offset = -20.0);

/// x is input_dim x batch. Returns raw outputs (output_dim x batch).
[[nodiscard]] Eigen::MatrixXd forward(const MLPWeights& weights, HiddenActivation act, const Eigen::MatrixXd& x,
                                      ForwardCache* cache = nullptr);

/// Gradient of sum_columns(<d_raw, raw>) with respect to every parameter.
/// Callers that want a batch mean pass d_raw already divided by the batch size.
[[nodiscard]] MLPWeights backward(const MLPWeights& weights, HiddenActivation act, const ForwardCache& cache,
                                  const Eigen::MatrixXd& d_raw);

/// Bias-corrected Adam update in place.
void adam_step(MLPWeights& weights, const MLPWeights& grads, AdamState& state);

}  // namespace evireg
