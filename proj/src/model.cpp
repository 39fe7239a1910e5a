#include "evireg/model.hpp"

#include <stdexcept>
#include <string>

namespace evireg {

Model Model::create(const MLPConfig& config, const HeadSpec& head) {
  config.validate();
  if (head.kind == HeadSpec::Kind::NIW && head.n < 2) {
    throw std::invalid_argument("multivariate head requires n >= 2");
  }
  if (config.output_dim != head.raw_size()) {
    throw std::invalid_argument("model.output_dim = " + std::to_string(config.output_dim) +
                                " does not match the evidential head, which needs " +
                                std::to_string(head.raw_size()));
  }
  return {config, head, init(config)};
}

Eigen::MatrixXd Model::raw_outputs(const Eigen::MatrixXd& inputs) const {
  return forward(weights, config.hidden_activation, inputs.transpose());
}

std::vector<NIGParams> Model::predict_nig(const Eigen::MatrixXd& inputs) const {
  if (head.kind != HeadSpec::Kind::NIG) {
    throw std::logic_error("predict_nig called on a multivariate model");
  }
  const Eigen::MatrixXd raw = raw_outputs(inputs);
  std::vector<NIGParams> out;
  out.reserve(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    out.push_back(activate_head(raw_head_from(raw, i), head.activation));
  }
  return out;
}

std::vector<NIWParams> Model::predict_niw(const Eigen::MatrixXd& inputs) const {
  if (head.kind != HeadSpec::Kind::NIW) {
    throw std::logic_error("predict_niw called on a univariate model");
  }
  const Eigen::MatrixXd raw = raw_outputs(inputs);
  std::vector<NIWParams> out;
  out.reserve(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index i = 0; i < raw.cols(); ++i) {
    out.push_back(transform_multi(raw_head_m_from(raw, i, head.n)));
  }
  return out;
}

RawHead raw_head_from(const Eigen::MatrixXd& raw, Eigen::Index column) {
  return {raw(0, column), raw(1, column), raw(2, column), raw(3, column)};
}

RawHeadM raw_head_m_from(const Eigen::MatrixXd& raw, Eigen::Index column, int n) {
  return {n, raw.col(column)};
}

BatchLoss batch_loss(const HeadSpec& head, const LossSpec& loss, const Eigen::MatrixXd& raw,
                     const Eigen::MatrixXd& targets, bool with_gradient) {
  const Eigen::Index batch = raw.cols();
  if (batch == 0) {
    throw std::invalid_argument("batch_loss: empty batch");
  }
  if (targets.rows() != batch) {
    throw std::invalid_argument("batch_loss: target count does not match batch size");
  }
  BatchLoss out;
  if (with_gradient) {
    out.d_raw = Eigen::MatrixXd::Zero(raw.rows(), batch);
  }
  const double scale = 1.0 / static_cast<double>(batch);
  if (head.kind == HeadSpec::Kind::NIG) {
    for (Eigen::Index i = 0; i < batch; ++i) {
      const RawHead r = raw_head_from(raw, i);
      const double y = targets(i, 0);
      const LossBreakdown b = total_loss(r, y, loss.weights, head.activation, loss.floor);
      out.nll += b.nll;
      out.evidence_reg += b.evidence_reg;
      out.unc_reg += b.unc_reg;
      out.total += b.total;
      if (with_gradient) {
        const HeadGradient g = grad_head(r, y, loss.weights, head.activation, loss.floor);
        out.d_raw(0, i) = g.d_o_gamma * scale;
        out.d_raw(1, i) = g.d_o_v * scale;
        out.d_raw(2, i) = g.d_o_alpha * scale;
        out.d_raw(3, i) = g.d_o_beta * scale;
      }
    }
  } else {
    const double lambda1 = loss.weights.lambda1;
    for (Eigen::Index i = 0; i < batch; ++i) {
      const RawHeadM r = raw_head_m_from(raw, i, head.n);
      const Eigen::VectorXd y = targets.row(i).transpose();
      const NIWParams params = transform_multi(r);
      const double nll = mern_nll(params, y, loss.r);
      const double unc = lambda1 != 0.0 ? unc_reg_multi(r, params, y) : 0.0;
      out.nll += nll;
      out.unc_reg += unc;
      out.total += nll + lambda1 * unc;
      if (with_gradient) {
        out.d_raw.col(i) = grad_multi(r, y, lambda1, loss.r, loss.weights.detach_error_in_U) * scale;
      }
    }
  }
  out.nll *= scale;
  out.evidence_reg *= scale;
  out.unc_reg *= scale;
  out.total *= scale;
  return out;
}

}  // namespace evireg
