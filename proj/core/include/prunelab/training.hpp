// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "prunelab/datagen.hpp"
#include "prunelab/model.hpp"

namespace prunelab::training {

struct TrainConfig {
  Method method = Method::sup;
  int epochs = 30;
  std::size_t batch_size = 32;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double temperature = 0.5;
  bool cosine_annealing = false;
  std::uint64_t seed = 0;
  std::size_t representation_dim = 16;
  std::size_t hidden_dim = 32;
  std::size_t hidden_layers = 2;

  // Second (classifier-head) stage of contrastive training.
  int head_epochs = 20;
  double head_lr = 0.1;
  bool head_augmented = false;

  void validate() const;

  /// Desk-scale defaults.
  static TrainConfig desk_sup();
  static TrainConfig desk_scl();
  /// Full-size hyper-parameters of the reference WideResNet runs, kept for
  /// documentation; far too slow for the desk architecture.
  static TrainConfig paper_sup();
  static TrainConfig paper_scl();
};

/// One optimizer step of the log. Serialised as one JSON object per line.
struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double current_sparsity = 0.0;
};

void write_step_log(std::span<const StepRecord> steps, const std::filesystem::path& path);
std::vector<StepRecord> read_step_log(const std::filesystem::path& path);

/// Called once per optimizer step, before the gradient is computed, with the
/// global step counter. Returns the achieved sparsity when masks changed.
using StepHook = std::function<std::optional<double>(std::int64_t step, ModelBundle& bundle)>;

struct TrainResult {
  ModelBundle bundle;
  std::vector<StepRecord> steps;
};

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

/// Mean over the batch of -log softmax(logits)[label], with exact logit gradients.
LossAndGrad cross_entropy_loss(const Tensor& logits, std::span<const std::uint32_t> labels);

/// Supervised contrastive loss summed over anchors:
///   sum_i -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/tau) / sum_{a != i} exp(z_i.z_a/tau) )
/// where P(i) holds the other rows sharing i's label. Rows of `z` must be
/// unit-norm to 1e-5 (PreconditionError); an anchor without positives throws
/// DegenerateBatchError. The gradient is w.r.t. z.
LossAndGrad supcon_loss(const Tensor& z, std::span<const std::uint32_t> labels, double temperature);

struct SgdParams {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// v <- momentum v + (g + weight_decay w); w <- w - lr v; w <- w * mask.
/// `velocity` is lazily sized to match `weights`.
void sgd_step(WeightStore& weights, const GradientSet& grads, const SgdParams& params,
              std::vector<Tensor>& velocity);

/// base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)).
double cosine_lr(double base_lr, int epoch, int total_epochs);

/// End-to-end cross-entropy training of encoder + classifier head.
TrainResult train_sup(const datagen::Dataset& data, const TrainConfig& config, const StepHook& hook = {});

/// Stage 1: encoder + projection head on supcon over augmented views.
/// Stage 2: frozen encoder, classifier head on cross-entropy. The returned
/// bundle carries no projection head.
TrainResult train_scl(const datagen::Dataset& data, const TrainConfig& config,
                      const datagen::AugmentationPolicy& policy, const StepHook& hook = {});

struct FinetuneOptions {
  int epochs = 10;
  double lr = 0.01;
  std::size_t batch_size = 32;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  /// When false only the classifier head is updated.
  bool train_encoder = true;
};

/// Cross-entropy SGD on every unmasked weight; masks are left untouched.
ModelBundle finetune(ModelBundle bundle, const datagen::Dataset& data, const FinetuneOptions& options,
                     std::vector<StepRecord>* steps = nullptr);

}  // namespace prunelab::training
