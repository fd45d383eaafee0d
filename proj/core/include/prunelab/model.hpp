// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prunelab/network.hpp"

namespace prunelab {

enum class Method { sup, scl };
enum class PruningMethod { none, gmp, delta_gmp, one_shot };

std::string_view to_string(Method m);
std::string_view to_string(PruningMethod p);
/// Accepts the spellings produced by to_string ("sup", "scl", "none",
/// "gmp", "delta_gmp", "oneshot"). Throws ParameterError otherwise.
Method parse_method(std::string_view text);
PruningMethod parse_pruning(std::string_view text);

struct Provenance {
  Method method = Method::sup;
  std::uint64_t seed = 0;
  double sparsity = 0.0;
  PruningMethod pruning = PruningMethod::none;

  bool operator==(const Provenance&) const = default;
};

/// Encoder, optional projection head (contrastive stage 1 only) and
/// classifier head. Masks live inside each net's WeightStore.
///
/// Encoder layout: affine+relu blocks, the last one producing the
/// representation h of width `representation_dim`. Classifier head: a
/// single affine map h -> logits.
struct ModelBundle {
  Network encoder;
  std::optional<Network> projection_head;
  Network classifier_head;
  Provenance provenance;

  std::size_t representation_dim() const noexcept { return encoder.out_dim(); }
  std::size_t class_count() const noexcept { return classifier_head.out_dim(); }

  /// Prunable tensors of the encoder and classifier head in registration
  /// order (encoder first). The projection head is never included.
  std::vector<WeightEntry*> prunable();
  std::vector<const WeightEntry*> prunable() const;

  /// Fraction of prunable weights that are exactly zero.
  double achieved_sparsity() const;

  /// Fraction of prunable weights that are masked out.
  double mask_sparsity() const;

  /// True when every tensor, mask and the provenance match bit-for-bit.
  bool bit_equal(const ModelBundle& other) const;
};

struct ArchitectureSpec {
  std::size_t input_dim = 2;
  std::size_t hidden_dim = 32;
  std::size_t hidden_layers = 2;
  std::size_t representation_dim = 16;
  std::size_t class_count = 2;
};

std::vector<LayerSpec> encoder_layers(const ArchitectureSpec& arch);
std::vector<LayerSpec> classifier_layers(const ArchitectureSpec& arch);

/// affine(l -> l), relu, affine(l -> l/2), l2norm.
std::vector<LayerSpec> projection_layers(std::size_t representation_dim);

/// Freshly initialised bundle without a projection head.
ModelBundle make_bundle(const ArchitectureSpec& arch, Method method, std::uint64_t seed);

/// Encoder representation h for each row of `x`.
Tensor encode(const ModelBundle& bundle, const Tensor& x);

/// Classifier logits for each row of `x`.
Tensor logits(const ModelBundle& bundle, const Tensor& x);

/// Argmax class per row; ties resolve to the lowest class index.
std::vector<std::uint32_t> predict(const ModelBundle& bundle, const Tensor& x);

double accuracy(const std::vector<std::uint32_t>& predicted, const std::vector<std::uint32_t>& labels);

/// Probe activations used by prediction depth: the output of every encoder
/// block (post-ReLU) followed by the classifier logits. The second-to-last
/// probe is the representation h.
std::vector<Tensor> probe_activations(const ModelBundle& bundle, const Tensor& x);

}  // namespace prunelab
