// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prunelab/model.hpp"
#include "prunelab/tensor.hpp"

namespace prunelab::diagnostics {

/// One predicted class of one model for one test sample.
struct PredictionRecord {
  std::uint32_t model_id = 0;
  Method method = Method::sup;
  PruningMethod pruning = PruningMethod::none;
  double sparsity = 0.0;
  std::uint64_t sample_id = 0;
  std::uint32_t predicted_class = 0;
  std::uint32_t true_label = 0;

  bool operator==(const PredictionRecord&) const = default;
};

using PredictionLog = std::vector<PredictionRecord>;

/// CSV with header model_id,method,pruning,sparsity,sample_id,predicted_class,true_label.
void write_prediction_log(const PredictionLog& log, const std::filesystem::path& path);
PredictionLog read_prediction_log(const std::filesystem::path& path);

/// Most frequent class; ties go to the lowest class index.
/// Throws ParameterError on empty input.
std::uint32_t modal_class(std::span<const std::uint32_t> predictions);

struct PieRecord {
  std::uint64_t sample_id = 0;
  std::uint32_t modal_dense = 0;
  std::uint32_t modal_pruned = 0;
  bool is_pie = false;
  std::uint32_t true_label = 0;

  bool operator==(const PieRecord&) const = default;
};

/// One record per sample id (ascending): the sample is a PIE iff the modal
/// class of the dense cohort differs from that of the pruned cohort.
/// Throws CohortError when the cohorts do not cover the same samples, or
/// when a (model, sample) pair repeats within a cohort.
std::vector<PieRecord> identify_pies(const PredictionLog& dense, const PredictionLog& pruned);

struct QScoreRecord {
  std::uint64_t sample_id = 0;
  double q = 0.0;
  double z = 0.0;
  double l1 = 0.0;
};

/// Q = Z / ||h||_1 on the L2-normalised h, with Z = max(h - mu) / sigma over
/// the components of h and sigma the population standard deviation.
/// Throws DegenerateInputError for a zero or constant vector.
QScoreRecord qscore(std::span<const float> h, std::uint64_t sample_id = 0);
QScoreRecord qscore(std::span<const double> h, std::uint64_t sample_id = 0);

struct PdRecord {
  std::uint64_t sample_id = 0;
  std::uint32_t depth = 0;
};

/// Representations of a set of samples at each probe layer:
/// `probes[d]` is [samples, dim_d].
struct ProbeSet {
  std::vector<Tensor> probes;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint64_t> sample_ids;

  std::size_t size() const noexcept { return labels.size(); }
};

/// k-nearest-neighbour vote (Euclidean; equal distances rank the lower
/// train index first; vote ties go to the lowest class).
std::uint32_t knn_classify(const Tensor& train, std::span<const std::uint32_t> train_labels,
                           std::span<const float> query, std::size_t k);

/// Prediction depth of every query sample: the smallest probe d (1-based)
/// such that kNN predictions at probes d..L all equal the true label, or
/// L + 1 when the last probe is wrong.
std::vector<PdRecord> pd_score(const ProbeSet& train, const ProbeSet& query, std::size_t k);

/// Number of PIEs per true class.
std::vector<std::size_t> per_class_pie_distribution(std::span<const PieRecord> records, std::uint32_t class_count);

struct PieOverlap {
  std::vector<std::uint64_t> shared;
  std::vector<std::uint64_t> unique_a;
  std::vector<std::uint64_t> unique_b;
  std::vector<std::size_t> shared_per_class;
  std::vector<std::size_t> unique_a_per_class;
  std::vector<std::size_t> unique_b_per_class;
};

/// Intersection and differences of the PIE sample sets of A and B.
/// Throws CohortError when A and B do not describe the same samples.
PieOverlap pie_overlap(std::span<const PieRecord> a, std::span<const PieRecord> b, std::uint32_t class_count);

struct AccuracyStats {
  double mean = 0.0;
  /// Sample standard deviation across models; 0 when fewer than two.
  double std = 0.0;
  std::size_t model_count = 0;
  bool std_defined = false;
  std::vector<double> per_model;
};

/// Per-model accuracy against true_label, then mean and sample std.
AccuracyStats accuracy_stats(const PredictionLog& log);

/// Mean and sample standard deviation; std is 0 for fewer than two values.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};
MeanStd mean_std(std::span<const double> values);

}  // namespace prunelab::diagnostics
