#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evireg/dataset.hpp"
#include "evireg/mlp.hpp"
#include "evireg/model.hpp"

namespace evireg {

struct TrainOptions {
  int epochs = 500;
  int batch_size = 128;
  double lr = 5e-3;
  /// Seeds the per-epoch minibatch permutation.
  std::uint64_t seed = 0;
  /// On non-finite weights or a numerical failure, stop and keep the last
  /// finite epoch instead of throwing.
  bool stop_on_divergence = false;
};

struct EpochLog {
  int epoch = 0;
  double total = 0.0;
  double nll = 0.0;
  double evidence_reg = 0.0;
  double unc_reg = 0.0;
  /// RMSE of the mean prediction on the training set after the epoch's updates.
  double train_rmse = 0.0;
};

struct TrainResult {
  Model model;
  AdamState adam;
  std::vector<EpochLog> log;
  /// Epoch at which training stopped early; 0 when it ran to completion.
  int diverged_at_epoch = 0;
  std::string divergence_reason;
};

/// Mean-reduced minibatch Adam. Single-threaded and fully determined by
/// (model weights, data, loss, options). Throws std::runtime_error on
/// divergence unless options.stop_on_divergence is set.
[[nodiscard]] TrainResult train(Model model, const Dataset& data, const LossSpec& loss, const TrainOptions& options,
                                const std::function<void(const EpochLog&, const Model&)>& on_epoch = {});

/// RMSE between the predicted mean (gamma or mu0) and `targets`, over all target columns.
[[nodiscard]] double prediction_rmse(const Model& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets);

}  // namespace evireg
