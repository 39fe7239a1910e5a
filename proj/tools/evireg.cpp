// evireg: train, evaluate and verify evidential regression models.
//
//   evireg <gradcheck|train|eval|sensitivity> --config <path> [--out <dir>] [--seed <u64>]
//
// Exit codes: 0 success, 1 invalid config or arguments, 2 runtime failure,
// 3 gradient check failed.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "evireg/checkpoint.hpp"
#include "evireg/config.hpp"
#include "evireg/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInvariant = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Options& opts) {
  cmd->add_option("--config", opts.config, "Run configuration (JSON)")->required();
  cmd->add_option("--out", opts.out, "Output root (overrides $EVIREG_OUT and output_dir)");
  cmd->add_option("--seed", opts.seed, "Override the model and training seeds");
}

evireg::RunConfig load(const Options& opts) {
  evireg::RunConfig config = evireg::load_config(opts.config);
  if (opts.seed) {
    config.model.seed = *opts.seed;
    config.train.seed = *opts.seed;
  }
  return config;
}

std::optional<std::filesystem::path> out_flag(const Options& opts) {
  if (opts.out.empty()) {
    return std::nullopt;
  }
  return std::filesystem::path(opts.out);
}

int run(const std::string& command, const Options& opts) {
  const evireg::RunConfig config = load(opts);
  const auto root = evireg::resolve_output_root(config, out_flag(opts));
  if (command == "gradcheck") {
    const evireg::GradcheckReport report = evireg::cmd_gradcheck(config, root);
    std::cout << "report: " << (root / config.name / "gradcheck.json").string() << "\n";
    if (!report.pass()) {
      for (const auto& f : report.failures) {
        std::cerr << "gradcheck failed: " << f << "\n";
      }
      return kExitInvariant;
    }
    std::cout << "gradcheck passed\n";
    return kExitOk;
  }
  if (command == "train") {
    const auto dir = evireg::cmd_train(config, root);
    std::cout << "run directory: " << dir.string() << "\n";
    return kExitOk;
  }
  if (command == "sensitivity") {
    const auto dir = evireg::cmd_sensitivity(config, root);
    std::cout << "run directory: " << dir.string() << "\n";
    return kExitOk;
  }
  // eval: the config sits in the run directory next to its checkpoint.
  const auto config_dir = std::filesystem::path(opts.config).parent_path();
  const auto out_dir = opts.out.empty() ? config_dir / "eval" : std::filesystem::path(opts.out);
  evireg::cmd_eval(config, config_dir, out_dir);
  std::cout << "metrics: " << (out_dir / "metrics.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep evidential regression: training, evaluation and gradient checks"};
  app.require_subcommand(1);
  Options opts;
  for (const char* name : {"gradcheck", "train", "eval", "sensitivity"}) {
    add_common(app.add_subcommand(name), opts);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, opts);
  } catch (const evireg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const evireg::CheckpointError& e) {
    std::cerr << "checkpoint error (" << e.field() << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
