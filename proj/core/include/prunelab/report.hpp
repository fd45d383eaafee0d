// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prunelab/diagnostics.hpp"
#include "prunelab/manifest.hpp"

namespace prunelab::runner {

struct PieRow {
  double sparsity = 0.0;
  std::optional<std::size_t> pie;  // empty for the dense row
  std::optional<diagnostics::AccuracyStats> accuracy;
};

struct QRow {
  double sparsity = 0.0;
  std::optional<diagnostics::MeanStd> q;
  std::optional<diagnostics::MeanStd> z;
  std::optional<diagnostics::MeanStd> l1;
};

struct PdRow {
  double sparsity = 0.0;
  std::optional<diagnostics::MeanStd> pie;
  std::optional<diagnostics::MeanStd> non_pie;
};

struct ClassRow {
  double sparsity = 0.0;
  std::uint32_t cls = 0;
  std::size_t pie = 0;
};

struct CohortRow {
  Method method = Method::sup;
  PruningMethod pruning = PruningMethod::none;
  double sparsity = 0.0;
  std::size_t models = 0;
  std::size_t failed = 0;
};

/// Tables of one (method, pruning) pair, one row per grid sparsity.
struct PairReport {
  Method method = Method::sup;
  PruningMethod pruning = PruningMethod::none;
  std::vector<PieRow> pie;
  std::vector<QRow> qscore;
  std::vector<PdRow> pdscore;
  std::vector<ClassRow> classes;
};

struct OverlapRow {
  PruningMethod pruning = PruningMethod::none;
  double sparsity = 0.0;
  std::uint32_t cls = 0;
  std::size_t shared = 0;
  std::size_t unique_sup = 0;
  std::size_t unique_scl = 0;
};

struct DiagnosticsReport {
  std::vector<PairReport> pairs;
  std::vector<OverlapRow> overlap;
  std::vector<CohortRow> cohorts;

  const PairReport* find(Method m, PruningMethod p) const;
};

/// Computes every table. Paths in the manifest resolve against `base_dir`.
/// Throws ProtocolError when a method lacks its dense cohort.
DiagnosticsReport build_report(const RunManifest& manifest, const std::filesystem::path& base_dir);

/// Writes the CSV tables; returns the file names in write order.
std::vector<std::string> write_report(const DiagnosticsReport& report, const std::filesystem::path& out_dir);

/// Human-readable PIE / accuracy / Q-Score overview.
std::string format_summary(const DiagnosticsReport& report);

}  // namespace prunelab::runner
