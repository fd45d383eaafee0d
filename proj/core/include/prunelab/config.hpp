// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "prunelab/datagen.hpp"
#include "prunelab/pruning.hpp"
#include "prunelab/training.hpp"

namespace prunelab::runner {

struct DatasetSpec {
  std::string kind = "mixture";  // blobs | rings | mixture | csv
  std::uint32_t classes = 4;     // blobs / rings
  std::uint32_t ring_classes = 2;
  std::uint32_t blob_classes = 2;
  std::size_t per_class_train = 100;
  std::size_t per_class_test = 50;
  std::size_t dim = 4;
  double separation = 4.0;
  double noise = 0.2;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;
};

struct GradualSpec {
  pruning::SparsitySchedule schedule;  // final_sparsity comes from the grid
  pruning::Scope scope = pruning::Scope::per_layer;
};

struct OneShotSpec {
  pruning::Scope scope = pruning::Scope::global;
  int finetune_epochs = 10;
  double finetune_lr = 0.01;
  bool finetune_encoder = true;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t base_seed = 0;
  std::size_t ensemble_size = 5;
  std::vector<double> sparsity_grid{0.0};
  std::vector<Method> methods{Method::sup, Method::scl};
  std::vector<PruningMethod> pruning{PruningMethod::gmp, PruningMethod::one_shot};
  std::filesystem::path output_dir = "runs";
  std::size_t workers = 1;

  DatasetSpec dataset;
  training::TrainConfig sup = training::TrainConfig::desk_sup();
  training::TrainConfig scl = training::TrainConfig::desk_scl();
  datagen::AugmentationPolicy augmentation;
  GradualSpec gmp_sup;
  GradualSpec gmp_scl;
  int delta_gmp_delay_epochs = 10;
  OneShotSpec oneshot;
  std::size_t probe_k = 5;

  /// Exact bytes the config was parsed from; hashed into the manifest.
  std::string source_text;

  const training::TrainConfig& train_config(Method m) const { return m == Method::sup ? sup : scl; }
  const GradualSpec& gradual(Method m) const { return m == Method::sup ? gmp_sup : gmp_scl; }

  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
};

/// Parses the sectioned key = value format documented in the README.
/// Unknown sections or keys, malformed values and broken invariants raise
/// ConfigError. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path);

/// Train and test splits described by the dataset section.
struct DataSplits {
  datagen::Dataset train;
  datagen::Dataset test;
};
DataSplits make_datasets(const DatasetSpec& spec);

/// Hex FNV-1a-64 of the config bytes.
std::string config_hash(std::string_view text);

}  // namespace prunelab::runner
