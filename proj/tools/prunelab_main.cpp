// SPDX-License-Identifier: Apache-2.0
// prunelab: train / prune / diagnose / report.
#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "prunelab/checkpoint.hpp"
#include "prunelab/errors.hpp"
#include "prunelab/pruning.hpp"
#include "prunelab/runner.hpp"

namespace fs = std::filesystem;
using namespace prunelab;

namespace {

constexpr int kOk = 0;
constexpr int kCellFailures = 1;
constexpr int kConfigError = 2;

int cmd_train(const fs::path& config_path, std::size_t workers) {
  const auto config = runner::load_config(config_path);
  runner::RunOptions options;
  options.workers = workers;
  options.on_cell_done = [](const runner::CellEntry& e) {
    if (e.status == runner::CellStatus::completed) {
      fmt::print("{:<28} done  {:8.0f} ms  sparsity {:.4f}\n", e.id, e.wall_clock_ms, e.achieved_sparsity);
    } else {
      fmt::print("{:<28} FAILED  {}\n", e.id, e.error);
    }
    for (const auto& w : e.warnings) {
      fmt::print("{:<28} warning: {}\n", e.id, w);
    }
    std::fflush(stdout);
  };
  const auto result = runner::run_grid(config, options);
  fmt::print("trained {}, skipped {}, failed {}; manifest {}\n", result.trained, result.skipped, result.failed,
             result.manifest_path.string());
  return result.failed ? kCellFailures : kOk;
}

int cmd_prune(const fs::path& checkpoint, double sparsity, const std::string& mode, const std::string& scope,
              fs::path out) {
  if (mode != "oneshot") {
    throw ConfigError("prune supports only --mode oneshot");
  }
  auto bundle = pruning::one_shot_prune(checkpoint_read(checkpoint), sparsity, pruning::parse_scope(scope));
  if (out.empty()) {
    out = checkpoint;
    out.replace_extension();
    out += fmt::format(".oneshot-{}.prnk", sparsity);
  }
  checkpoint_write(bundle, out);
  fmt::print("wrote {} (achieved sparsity {:.6f})\n", out.string(), bundle.achieved_sparsity());
  return kOk;
}

int cmd_report(const fs::path& manifest, fs::path out, bool print_summary) {
  if (out.empty()) {
    out = manifest.parent_path() / "reports";
  }
  const auto report = runner::diagnose(manifest, out);
  if (print_summary) {
    fmt::print("{}", runner::format_summary(report));
  }
  fmt::print("reports written to {}\n", out.string());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pruning-identified-exemplar experiments on small synthetic networks"};
  app.require_subcommand(1);

  fs::path config_path;
  std::size_t workers = 0;
  auto* train = app.add_subcommand("train", "Run (or resume) the experiment grid of a config");
  train->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  train->add_option("--workers", workers, "Parallel cells (PRUNELAB_WORKERS overrides)");

  fs::path checkpoint;
  fs::path prune_out;
  double sparsity = 0.0;
  std::string mode = "oneshot";
  std::string scope = "global";
  auto* prune = app.add_subcommand("prune", "One-shot magnitude pruning of a checkpoint");
  prune->add_option("--checkpoint", checkpoint, "Input checkpoint")->required()->check(CLI::ExistingFile);
  prune->add_option("--sparsity", sparsity, "Target sparsity in [0, 1)")->required();
  prune->add_option("--mode", mode, "Pruning mode")->check(CLI::IsMember({"oneshot"}));
  prune->add_option("--scope", scope, "global or per_layer")->check(CLI::IsMember({"global", "per_layer"}));
  prune->add_option("--out", prune_out, "Output checkpoint");

  fs::path manifest;
  auto* diagnose = app.add_subcommand("diagnose", "Compute report tables next to the manifest and print a summary");
  diagnose->add_option("--manifest", manifest, "Run manifest")->required()->check(CLI::ExistingFile);

  fs::path report_out;
  auto* report = app.add_subcommand("report", "Write report tables to a directory");
  report->add_option("--manifest", manifest, "Run manifest")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) {
      return cmd_train(config_path, workers);
    }
    if (*prune) {
      return cmd_prune(checkpoint, sparsity, mode, scope, prune_out);
    }
    if (*diagnose) {
      return cmd_report(manifest, {}, true);
    }
    return cmd_report(manifest, report_out, false);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfigError;
  } catch (const ParameterError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kCellFailures;
  }
}
