#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "evireg/config.hpp"
#include "evireg/gradcheck.hpp"
#include "evireg/model.hpp"

namespace evireg {

/// Output root: the --out flag, else $EVIREG_OUT, else config.output_dir.
[[nodiscard]] std::filesystem::path resolve_output_root(const RunConfig& config,
                                                        const std::optional<std::filesystem::path>& cli_out);

/// Trains the configured experiment into `root / config.name`. With a
/// variants list, each variant gets its own subdirectory and the top level
/// holds summary.json. Returns the run directory.
std::filesystem::path cmd_train(const RunConfig& config, const std::filesystem::path& root);

/// UR-ERN on cubic (outside the HUA) once per lambda1 in the grid, with
/// identical seeds. Writes sensitivity.csv and sensitivity.json.
std::filesystem::path cmd_sensitivity(const RunConfig& config, const std::filesystem::path& root);

/// Runs the gradient suites and writes gradcheck.json.
GradcheckReport cmd_gradcheck(const RunConfig& config, const std::filesystem::path& root);

/// Recomputes the metrics of a finished run from its checkpoint(s). The
/// config is the snapshot a run directory holds; `config_dir` is where it
/// was read from. Writes metrics.json (plus histograms) into `out_dir` and
/// returns the JSON text.
std::string cmd_eval(const RunConfig& config, const std::filesystem::path& config_dir,
                     const std::filesystem::path& out_dir);

/// Metrics JSON for a trained single-split model, as written by cmd_train.
[[nodiscard]] std::string evaluate_model(const RunConfig& config, const Model& model);

}  // namespace evireg
