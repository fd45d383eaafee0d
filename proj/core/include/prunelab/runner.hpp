// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "prunelab/config.hpp"
#include "prunelab/manifest.hpp"
#include "prunelab/report.hpp"

namespace prunelab::runner {

struct CellPlan {
  std::string id;
  Method method = Method::sup;
  PruningMethod pruning = PruningMethod::none;
  double sparsity = 0.0;
  std::uint32_t model_index = 0;
  std::uint64_t seed = 0;
};

/// Every cell of the grid. Dense cells (pruning none, sparsity 0) come first,
/// one per (method, model); pruned cells follow for each nonzero sparsity.
std::vector<CellPlan> plan_cells(const ExperimentConfig& config);

struct RunOptions {
  /// 0 uses the configured worker count, itself overridden by PRUNELAB_WORKERS.
  std::size_t workers = 0;
  /// Called (serialised) after each cell finishes.
  std::function<void(const CellEntry&)> on_cell_done;
};

struct GridResult {
  RunManifest manifest;
  std::filesystem::path manifest_path;
  std::size_t trained = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Trains every cell that is not already completed in
/// <output_dir>/manifest.json. A manifest written for a different config
/// raises ConfigError. Cell failures are recorded, never thrown.
GridResult run_grid(const ExperimentConfig& config, const RunOptions& options = {});

/// Worker count after applying PRUNELAB_WORKERS (ignored when not a positive integer).
std::size_t resolve_workers(std::size_t configured);

/// Builds the report tables from a manifest and writes them to `out_dir`.
/// Every file is taken from the manifest; a missing one is an error.
DiagnosticsReport diagnose(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir);

}  // namespace prunelab::runner
