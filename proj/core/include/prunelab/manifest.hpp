// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prunelab/model.hpp"

namespace prunelab::runner {

enum class CellStatus { completed, failed };

/// One (method, pruning, sparsity, model) training run. File paths are
/// relative to the directory holding the manifest.
struct CellEntry {
  std::string id;
  Method method = Method::sup;
  PruningMethod pruning = PruningMethod::none;
  double sparsity = 0.0;
  std::uint32_t model_index = 0;
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::failed;
  std::string error;
  double wall_clock_ms = 0.0;
  double achieved_sparsity = 0.0;
  std::string checkpoint;
  std::string step_log;
  std::string predictions;
  std::string reps_train;
  std::string reps_test;
  std::vector<std::string> warnings;

  std::vector<std::string> files() const;
};

struct RunManifest {
  std::string config_hash;
  std::string config_file;
  std::vector<double> sparsity_grid;
  std::vector<Method> methods;
  std::vector<PruningMethod> pruning;
  std::size_t ensemble_size = 0;
  std::size_t probe_k = 5;
  std::uint32_t class_count = 0;
  std::vector<CellEntry> cells;

  /// Every file referenced by a completed cell, plus the config copy.
  std::vector<std::string> artifacts() const;

  const CellEntry* find(const std::string& id) const;

  /// Throws ParseError for malformed JSON or missing fields.
  static RunManifest read(const std::filesystem::path& path);
  /// Writes atomically (temporary file + rename).
  void write(const std::filesystem::path& path) const;
};

/// Canonical cell id, e.g. "scl-gmp-t0.9-m003".
std::string cell_id(Method method, PruningMethod pruning, double sparsity, std::uint32_t model_index);

}  // namespace prunelab::runner
