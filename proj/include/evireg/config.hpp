#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evireg/dataset.hpp"
#include "evireg/losses.hpp"
#include "evireg/mlp.hpp"
#include "evireg/nig.hpp"

namespace evireg {

enum class Experiment { Cubic, Circle, Tabular, Gradcheck, HuaDemo, Sensitivity };
enum class Variant { ERN, NLL_ERN, UR_ERN };

[[nodiscard]] std::string_view to_string(Experiment e) noexcept;
[[nodiscard]] std::string_view to_string(Variant v) noexcept;
[[nodiscard]] Experiment parse_experiment(std::string_view name);
[[nodiscard]] Variant parse_variant(std::string_view name);

/// Any problem with a config document; the CLI maps it to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LossConfig {
  Variant variant = Variant::UR_ERN;
  double lambda = 0.01;
  double lambda1 = 0.1;
  ActivationKind activation = ActivationKind::SoftPlus;
  bool detach_error_in_U = true;
  double r = 1.0;
};

struct TrainConfig {
  int epochs = 500;
  int batch_size = 128;
  double lr = 5e-3;
  std::uint64_t seed = 0;
  bool hua_init = false;
  double hua_bias = -20.0;
};

struct CubicDataConfig {
  int n_train = 1000;
  std::uint64_t seed = 1;
  double noise_std = 3.0;
  /// Evenly spaced in-distribution evaluation points on [-4, 4].
  int eval_points = 200;
};

struct CircleDataConfig {
  int n = 300;
  std::uint64_t seed = 1;
  double noise_std = 0.1;
  CircleAngleSampling sampling = CircleAngleSampling::ValleyDensity;
  int eval_points = 200;
};

struct TabularDataConfig {
  std::filesystem::path path;
  std::vector<std::string> targets;
  double train_frac = 0.9;
  int repeats = 1;
  std::uint64_t seed = 0;
};

struct GradcheckConfig {
  int probes = 1000;
  int multi_probes = 200;
  std::uint64_t seed = 12345;
  /// Channel whose closed-form gradient is deliberately corrupted, to show
  /// the harness catches it. Empty for a normal run.
  std::string inject_fault;
};

struct EvalConfig {
  /// Defaults to checkpoint.json next to the config file.
  std::optional<std::filesystem::path> checkpoint;
  /// Also evaluate the out-of-distribution split and emit entropy histograms.
  bool ood = true;
  /// Entropy from the aleatoric variance (default) or the epistemic one.
  bool epistemic_entropy = false;
  /// Tolerance for "alpha close to 1" (nu close to n + 1) in the HUA report.
  double hua_epsilon = kDefaultHuaEpsilon;
};

struct RunConfig {
  std::string name;
  Experiment experiment = Experiment::Cubic;
  MLPConfig model;
  LossConfig loss;
  /// When non-empty, every listed variant is trained into its own
  /// subdirectory. ERN drops lambda1, NLL-ERN drops both weights.
  std::vector<Variant> variants;
  TrainConfig train;
  CubicDataConfig cubic;
  CircleDataConfig circle;
  TabularDataConfig tabular;
  GradcheckConfig gradcheck;
  EvalConfig eval;
  std::vector<double> lambda1_grid{1e-4, 1e-2, 1.0};
  std::filesystem::path output_dir = "runs";

  /// Throws ConfigError describing the first inconsistency found.
  void validate() const;
  /// Loss weights implied by `variant` and the configured lambda, lambda1.
  [[nodiscard]] LossWeights weights_for(Variant v) const;
  /// Copy restricted to a single variant, as written into per-variant run directories.
  [[nodiscard]] RunConfig for_variant(Variant v) const;
};

/// Defaults for an experiment before any file overrides. Cubic: 3 x 100
/// ReLU; circle: 2 x 32 ReLU with a 6-output head.
[[nodiscard]] RunConfig default_config(Experiment e);

/// Parses a JSON config. Keys absent from the document keep the experiment's
/// defaults; unknown keys are rejected. Relative data paths are resolved
/// against `base_dir`.
[[nodiscard]] RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] std::string config_to_string(const RunConfig& config);

}  // namespace evireg
