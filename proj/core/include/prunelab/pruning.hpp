// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prunelab/model.hpp"
#include "prunelab/training.hpp"

namespace prunelab::pruning {

/// Cubic gradual-pruning ramp:
///   s(t) = s_f + (s_i - s_f) (1 - (t - t_0) / (t_e - t_0))^3   for t_0 <= t < t_e,
/// s_i before t_0 and s_f from t_e on. Masks are recomputed only on steps
/// t >= t_0 with (t - t_0) divisible by `frequency`.
struct SparsitySchedule {
  double initial_sparsity = 0.0;
  double final_sparsity = 0.9;
  std::int64_t begin_step = 0;
  std::int64_t end_step = 1000;
  std::int64_t frequency = 100;

  void validate() const;

  bool fires_at(std::int64_t step) const noexcept {
    return step >= begin_step && (step - begin_step) % frequency == 0;
  }

  /// Reference schedules of the full-size runs (supervised / contrastive).
  static SparsitySchedule paper_sup(double final_sparsity);
  static SparsitySchedule paper_scl(double final_sparsity);
};

double sparsity_at(const SparsitySchedule& schedule, std::int64_t step);

enum class Scope { global, per_layer };

std::string_view to_string(Scope scope);
Scope parse_scope(std::string_view text);

/// A read-only view of one prunable tensor and its current mask (may be empty).
struct PrunableView {
  std::span<const float> weights;
  std::span<const std::uint8_t> mask;
};

/// One 0/1 mask per prunable tensor, aligned with the views it was built from.
struct MaskSet {
  std::vector<std::vector<std::uint8_t>> masks;
  double achieved_sparsity = 0.0;

  bool operator==(const MaskSet&) const = default;
};

/// Masks the smallest-|w| weights, floor(target * total) of them. Global
/// scope ranks all tensors together; per_layer splits that count across
/// tensors by largest remainder of target * n and ranks within each. Equal
/// magnitudes are ranked by (tensor index, flat index). Positions already
/// masked, and zero weights under an existing mask, are always kept masked
/// and ranked first. Throws DegenerateLayerError if some tensor would lose
/// every weight.
MaskSet magnitude_mask(std::span<const PrunableView> tensors, double target, Scope scope);

/// magnitude_mask over the bundle's prunable tensors.
MaskSet magnitude_mask(const ModelBundle& bundle, double target, Scope scope);

/// Installs masks into the bundle's prunable tensors and zeroes masked weights.
void apply_mask_set(ModelBundle& bundle, const MaskSet& masks);

/// Step callback implementing gradual magnitude pruning on `schedule`.
/// With `total_steps` set and `clamp_to_final`, the last firing step before
/// `total_steps` uses the final sparsity even if the ramp has not ended.
class GradualPruner {
 public:
  GradualPruner(SparsitySchedule schedule, Scope scope, std::optional<std::int64_t> total_steps = std::nullopt,
                bool clamp_to_final = false);

  std::optional<double> operator()(std::int64_t step, ModelBundle& bundle);

  const SparsitySchedule& schedule() const noexcept { return schedule_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  /// (step, achieved sparsity) for every mask update performed.
  const std::vector<std::pair<std::int64_t, double>>& trace() const noexcept { return trace_; }

 private:
  SparsitySchedule schedule_;
  Scope scope_;
  std::optional<std::int64_t> last_firing_step_;
  std::vector<std::string> warnings_;
  std::vector<std::pair<std::int64_t, double>> trace_;
};

GradualPruner gmp_hook(const SparsitySchedule& schedule, Scope scope = Scope::per_layer);

/// GMP with both ramp endpoints shifted by delay_epochs * steps_per_epoch.
/// If the shifted end exceeds `total_steps` a warning is recorded and the
/// last update is clamped to the final sparsity.
GradualPruner delayed_gmp_hook(const SparsitySchedule& schedule, int delay_epochs, std::int64_t steps_per_epoch,
                               std::int64_t total_steps, Scope scope = Scope::per_layer);

/// Wraps a pruner (held by reference) as a training StepHook.
training::StepHook as_step_hook(GradualPruner& pruner);

/// Post-training global magnitude pruning of encoder and classifier head.
/// The caller fine-tunes the result.
ModelBundle one_shot_prune(ModelBundle bundle, double target, Scope scope = Scope::global);

}  // namespace prunelab::pruning
