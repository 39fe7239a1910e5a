#pragma once

#include <string>
#include <vector>

#include "evireg/config.hpp"
#include "evireg/nig.hpp"

namespace evireg {

/// Worst error seen on one gradient channel across a suite's probes.
struct ChannelError {
  std::string channel;
  double max_error = 0.0;
};

/// Closed-form gradients against central differences. Errors are
/// |analytic - fd| / max(1, |analytic|, |fd|).
struct FdSuite {
  std::string name;
  int probes = 0;
  double tolerance = 0.0;
  std::vector<ChannelError> channels;
  bool pass = true;
};

/// Largest |dL_ERN/do_alpha| for one activation and one o_alpha deep in the HUA.
struct HuaGradientRow {
  ActivationKind activation = ActivationKind::SoftPlus;
  double o_alpha = 0.0;
  double max_abs_gradient = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct GradcheckReport {
  std::vector<FdSuite> suites;
  std::vector<HuaGradientRow> hua_zero_gradient;
  /// Largest deviation of dL^U/do_alpha from -|y - gamma|, in ulps of |y - gamma|.
  double unc_reg_gradient_max_ulps = 0.0;
  bool unc_reg_gradient_pass = true;
  /// Largest |dL^MERN/dp_nu| for p_nu <= -12.
  double multi_hua_zero_gradient_max_abs = 0.0;
  bool multi_hua_zero_gradient_pass = true;
  /// Largest deviation of the p_nu regularizer gradient from -||y - mu0||, in ulps.
  double multi_unc_reg_gradient_max_ulps = 0.0;
  bool multi_unc_reg_gradient_pass = true;
  /// Names of every failed check, e.g. "uni.softplus.d_o_alpha".
  std::vector<std::string> failures;

  [[nodiscard]] bool pass() const noexcept { return failures.empty(); }
};

/// Runs every gradient suite. A non-empty `config.inject_fault` corrupts
/// the closed-form gradient of that channel (one of gamma, v, alpha, beta,
/// mu, log_diag, lower, nu, network) before comparison. Throws
/// std::invalid_argument for an unknown channel name.
/// Channel names accepted by GradcheckConfig::inject_fault.
[[nodiscard]] const std::vector<std::string>& gradcheck_fault_channels();

[[nodiscard]] GradcheckReport run_gradcheck(const GradcheckConfig& config);

[[nodiscard]] std::string report_to_json(const GradcheckReport& report);

}  // namespace evireg
