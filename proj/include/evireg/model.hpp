#pragma once

#include <Eigen/Dense>
#include <vector>

#include "evireg/losses.hpp"
#include "evireg/mlp.hpp"
#include "evireg/multivariate.hpp"
#include "evireg/nig.hpp"

namespace evireg {

/// Which evidential distribution the network's raw outputs parameterize.
struct HeadSpec {
  enum class Kind { NIG, NIW };
  Kind kind = Kind::NIG;
  ActivationKind activation = ActivationKind::SoftPlus;  // NIG only
  int n = 1;                                             // target dimension; NIW requires n >= 2

  [[nodiscard]] int raw_size() const noexcept { return kind == Kind::NIG ? 4 : multi_head_size(n); }
  /// Raw channel that controls the evidence: o_alpha for NIG, p_nu for NIW.
  [[nodiscard]] int evidence_channel() const noexcept { return kind == Kind::NIG ? 2 : multi_head_size(n) - 1; }
  [[nodiscard]] bool operator==(const HeadSpec&) const = default;
};

/// Loss configuration shared by both head kinds. `weights.lambda` is only used
/// by the NIG head; the NIW loss has no evidence regularizer.
struct LossSpec {
  LossWeights weights;
  double r = 1.0;
  double floor = kDefaultActivationFloor;
};

struct Model {
  MLPConfig config;
  HeadSpec head;
  MLPWeights weights;

  /// Fresh model with init(config); throws if the output size does not match the head.
  [[nodiscard]] static Model create(const MLPConfig& config, const HeadSpec& head);

  /// Raw outputs (raw_size x N) for inputs given as N x d rows.
  [[nodiscard]] Eigen::MatrixXd raw_outputs(const Eigen::MatrixXd& inputs) const;
  [[nodiscard]] std::vector<NIGParams> predict_nig(const Eigen::MatrixXd& inputs) const;
  [[nodiscard]] std::vector<NIWParams> predict_niw(const Eigen::MatrixXd& inputs) const;
};

[[nodiscard]] RawHead raw_head_from(const Eigen::MatrixXd& raw, Eigen::Index column);
[[nodiscard]] RawHeadM raw_head_m_from(const Eigen::MatrixXd& raw, Eigen::Index column, int n);

struct BatchLoss {
  double nll = 0.0;
  double evidence_reg = 0.0;
  double unc_reg = 0.0;
  double total = 0.0;
  Eigen::MatrixXd d_raw;  // mean-reduced upstream gradient, raw_size x batch
};

/// Mean loss over the columns of `raw` against targets (N x k rows) and, when
/// requested, the gradient of that mean with respect to each raw column.
[[nodiscard]] BatchLoss batch_loss(const HeadSpec& head, const LossSpec& loss, const Eigen::MatrixXd& raw,
                                   const Eigen::MatrixXd& targets, bool with_gradient);

}  // namespace evireg
