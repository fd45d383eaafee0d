// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "prunelab/tensor.hpp"

namespace prunelab {

enum class LayerKind { affine, relu, l2norm };

std::string_view to_string(LayerKind kind);

/// One stage of a feedforward net. Only affine layers carry dimensions;
/// relu and l2norm act row-wise and preserve the width of their input.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;

  static LayerSpec affine(std::size_t in, std::size_t out) { return {LayerKind::affine, in, out}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec l2norm() { return {LayerKind::l2norm, 0, 0}; }

  bool operator==(const LayerSpec&) const = default;
};

/// A named trainable tensor. `mask`, when present, holds one 0/1 byte per
/// element; masked positions are treated as exactly zero everywhere.
struct WeightEntry {
  std::string name;
  Tensor value;
  std::vector<std::uint8_t> mask;
  bool prunable = false;

  bool has_mask() const noexcept { return !mask.empty(); }
  std::size_t zero_count() const noexcept;
};

/// Ordered collection of weight tensors. Registration order is stable and
/// doubles as the tie-break key for magnitude pruning.
class WeightStore {
 public:
  std::size_t add(std::string name, Tensor value, bool prunable);

  std::size_t size() const noexcept { return entries_.size(); }
  WeightEntry& operator[](std::size_t i) { return entries_[i]; }
  const WeightEntry& operator[](std::size_t i) const { return entries_[i]; }

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  const WeightEntry* find(std::string_view name) const noexcept;

  /// Writes zeros into every masked position.
  void apply_masks();

 private:
  std::vector<WeightEntry> entries_;
};

/// One gradient per WeightStore entry, in registration order.
using GradientSet = std::vector<Tensor>;

/// A feedforward stack of affine / relu / l2norm layers owning its weights.
///
/// Affine layer `k` owns two store entries, `<name>.<k>.weight` with shape
/// [out, in] (prunable) followed by `<name>.<k>.bias` with shape [out].
class Network {
 public:
  Network() = default;

  /// Builds the net with zero-initialised weights.
  Network(std::string name, std::vector<LayerSpec> layers);

  /// Adopts an existing store, e.g. one read back from a checkpoint.
  Network(std::string name, std::vector<LayerSpec> layers, WeightStore weights);

  /// He-normal weights, zero biases. Deterministic in `seed` and the net name.
  void init_weights(std::uint64_t seed);

  const std::string& name() const noexcept { return name_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  WeightStore& weights() noexcept { return weights_; }
  const WeightStore& weights() const noexcept { return weights_; }

  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }

  /// Width of the output of layer `i`.
  std::size_t width_after(std::size_t i) const { return widths_.at(i); }

  /// Store index of the weight matrix of layer `i`; the bias follows it.
  std::size_t weight_slot(std::size_t layer) const { return slots_.at(layer); }

 private:
  void validate_layers();

  std::string name_;
  std::vector<LayerSpec> layers_;
  WeightStore weights_;
  std::vector<std::size_t> slots_;
  std::vector<std::size_t> widths_;
  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
};

/// Input and every per-layer output of one forward pass.
struct Activations {
  Tensor input;
  std::vector<Tensor> outputs;

  const Tensor& output() const { return outputs.empty() ? input : outputs.back(); }
};

/// Runs `x` ([batch, in_dim]) through the net. Masked weights contribute zero.
/// Throws ShapeError on dimension mismatch, NumericError naming the first
/// layer that produced a non-finite value.
Activations forward(const Network& net, const Tensor& x);

struct BackwardResult {
  GradientSet grads;
  Tensor input_grad;
};

/// Reverse pass for the scalar loss whose gradient w.r.t. the net output is
/// `output_grad`. Gradients at masked weight positions are exactly zero.
BackwardResult backward(const Network& net, const Activations& acts, const Tensor& output_grad);

/// Row-wise backward of y = x / ||x||: returns (g - y (y.g)) / ||x||.
Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& grad_y);

/// Row-wise L2 normalisation of a [batch, dim] tensor.
Tensor l2_normalize_rows(const Tensor& x);

}  // namespace prunelab
