// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prunelab/tensor.hpp"

namespace prunelab::datagen {

enum class Split { train, test };

/// Labelled feature vectors. Row `i` of `features` is sample `i`; the row
/// index is the sample id used throughout prediction logs and dumps.
struct Dataset {
  Tensor features;
  std::vector<std::uint32_t> labels;
  std::uint32_t class_count = 0;
  Split split = Split::train;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return features.dim(1); }
  std::span<const float> sample(std::size_t i) const { return features.row(i); }
};

/// Throws ParameterError unless every row has the same width, every label is
/// below class_count and (for the train split) every class is populated.
void validate(const Dataset& ds);

/// Unit-covariance Gaussian clusters whose means are pairwise at least
/// `separation` apart. Class means sit on a line (dim 1) or on a circle in
/// the first two coordinates with adjacent chord length `separation`.
Dataset make_blobs(std::uint32_t class_count, std::size_t per_class, std::size_t dim, double separation,
                   std::uint64_t seed, Split split = Split::train);

/// Concentric 2-D rings; class c lies at radius c + 1 plus radial N(0, noise_sigma).
Dataset make_rings(std::uint32_t class_count, std::size_t per_class, double noise_sigma, std::uint64_t seed,
                   Split split = Split::train);

/// Rings in the first two coordinates (classes 0..ring_classes-1) plus
/// Gaussian blobs (the remaining classes) displaced by `separation` along
/// coordinates 2, 3, ... Off-plane coordinates of ring samples carry
/// N(0, noise_sigma) jitter. Requires dim >= 2 + blob_classes.
Dataset make_mixture(std::uint32_t ring_classes, std::uint32_t blob_classes, std::size_t per_class,
                     std::size_t dim, double separation, double noise_sigma, std::uint64_t seed,
                     Split split = Split::train);

struct AugmentationPolicy {
  double noise_sigma = 0.1;
  double scale_min = 0.8;
  double scale_max = 1.2;
  std::size_t views_per_sample = 2;

  void validate() const;
};

/// view_k = scale_k * sample + noise_k with scale_k ~ U[scale_min, scale_max]
/// and noise_k ~ N(0, noise_sigma^2 I). Deterministic in (seed, sample_index).
std::vector<std::vector<float>> augment(std::span<const float> sample, const AugmentationPolicy& policy,
                                        std::uint64_t seed, std::uint64_t sample_index = 0);

/// Reads "f1,...,fd,label" rows (no header). Class count is 1 + max label.
Dataset load_csv(const std::filesystem::path& path, Split split = Split::train);

/// Writes the same format with shortest round-trip float formatting.
void write_csv(const Dataset& ds, const std::filesystem::path& path);

}  // namespace prunelab::datagen
