#include "evireg/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "evireg/rng.hpp"

namespace evireg {

double prediction_rmse(const Model& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) {
  const Eigen::MatrixXd raw = model.raw_outputs(inputs);
  const Eigen::Index k = targets.cols();
  // gamma is raw row 0; mu0 occupies the first n rows of the multivariate head.
  const Eigen::MatrixXd mean = raw.topRows(k).transpose();
  return std::sqrt((mean - targets).array().square().mean());
}

TrainResult train(Model model, const Dataset& data, const LossSpec& loss, const TrainOptions& options,
                  const std::function<void(const EpochLog&, const Model&)>& on_epoch) {
  if (options.epochs < 0 || options.batch_size < 1 || !(options.lr > 0.0)) {
    throw std::invalid_argument("train: need epochs >= 0, batch_size >= 1, lr > 0");
  }
  if (data.size() == 0) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (data.inputs.cols() != model.config.input_dim) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.inputs.cols()) +
                                " input columns, model expects " + std::to_string(model.config.input_dim));
  }
  const int expected_targets = model.head.kind == HeadSpec::Kind::NIG ? 1 : model.head.n;
  if (data.targets.cols() != expected_targets) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.targets.cols()) +
                                " target columns, head expects " + std::to_string(expected_targets));
  }

  TrainResult result{std::move(model), {}, {}, 0, {}};
  Model& m = result.model;
  result.adam = AdamState::for_weights(m.weights, options.lr);
  Rng shuffle(options.seed);
  const auto n = static_cast<std::size_t>(data.size());
  const Eigen::MatrixXd inputs_t = data.inputs.transpose();

  ForwardCache cache;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffle.permutation(n);
    const MLPWeights saved_weights = options.stop_on_divergence ? m.weights : MLPWeights{};
    const AdamState saved_adam = options.stop_on_divergence ? result.adam : AdamState{};
    EpochLog log;
    log.epoch = epoch;
    std::string failure;
    try {
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(options.batch_size)) {
        const std::size_t stop = std::min(n, start + static_cast<std::size_t>(options.batch_size));
        const auto batch = static_cast<Eigen::Index>(stop - start);
        Eigen::MatrixXd x(inputs_t.rows(), batch);
        Eigen::MatrixXd y(batch, data.targets.cols());
        for (Eigen::Index j = 0; j < batch; ++j) {
          const auto row = static_cast<Eigen::Index>(perm[start + static_cast<std::size_t>(j)]);
          x.col(j) = inputs_t.col(row);
          y.row(j) = data.targets.row(row);
        }
        const Eigen::MatrixXd raw = forward(m.weights, m.config.hidden_activation, x, &cache);
        const BatchLoss bl = batch_loss(m.head, loss, raw, y, true);
        const MLPWeights grads = backward(m.weights, m.config.hidden_activation, cache, bl.d_raw);
        adam_step(m.weights, grads, result.adam);
        const double w = static_cast<double>(batch) / static_cast<double>(n);
        log.total += bl.total * w;
        log.nll += bl.nll * w;
        log.evidence_reg += bl.evidence_reg * w;
        log.unc_reg += bl.unc_reg * w;
      }
      if (!m.weights.all_finite()) {
        failure = "weights became non-finite at epoch " + std::to_string(epoch);
      }
    } catch (const std::domain_error& e) {
      // overflowed raw outputs reach the losses as invalid parameters
      failure = "numerical failure at epoch " + std::to_string(epoch) + ": " + e.what();
    } catch (const std::runtime_error& e) {
      failure = "numerical failure at epoch " + std::to_string(epoch) + ": " + e.what();
    }
    if (!failure.empty()) {
      if (!options.stop_on_divergence) {
        throw std::runtime_error("train: " + failure);
      }
      m.weights = saved_weights;
      result.adam = saved_adam;
      result.diverged_at_epoch = epoch;
      result.divergence_reason = failure;
      break;
    }
    log.train_rmse = prediction_rmse(m, data.inputs, data.targets);
    result.log.push_back(log);
    if (on_epoch) {
      on_epoch(log, m);
    }
  }
  return result;
}

}  // namespace evireg
