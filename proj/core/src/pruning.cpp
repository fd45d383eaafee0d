// SPDX-License-Identifier: Apache-2.0
#include "prunelab/pruning.hpp"

#include <algorithm>
#include <cmath>

#include "prunelab/errors.hpp"

namespace prunelab::pruning {

void SparsitySchedule::validate() const {
  if (initial_sparsity < 0.0 || final_sparsity >= 1.0 || initial_sparsity > final_sparsity) {
    throw ParameterError("schedule needs 0 <= initial_sparsity <= final_sparsity < 1");
  }
  if (begin_step < 0 || begin_step >= end_step) {
    throw ParameterError("schedule needs 0 <= begin_step < end_step");
  }
  if (frequency < 1) {
    throw ParameterError("schedule frequency must be at least 1");
  }
}

SparsitySchedule SparsitySchedule::paper_sup(double final_sparsity) {
  return SparsitySchedule{0.0, final_sparsity, 1000, 20000, 500};
}

SparsitySchedule SparsitySchedule::paper_scl(double final_sparsity) {
  return SparsitySchedule{0.0, final_sparsity, 125, 2476, 62};
}

double sparsity_at(const SparsitySchedule& s, std::int64_t step) {
  if (step <= s.begin_step) {
    return s.initial_sparsity;
  }
  if (step >= s.end_step) {
    return s.final_sparsity;
  }
  const double progress =
      static_cast<double>(step - s.begin_step) / static_cast<double>(s.end_step - s.begin_step);
  const double remaining = 1.0 - progress;
  return s.final_sparsity + (s.initial_sparsity - s.final_sparsity) * remaining * remaining * remaining;
}

std::string_view to_string(Scope scope) {
  return scope == Scope::global ? "global" : "per_layer";
}

Scope parse_scope(std::string_view text) {
  if (text == "global") {
    return Scope::global;
  }
  if (text == "per_layer") {
    return Scope::per_layer;
  }
  throw ParameterError("unknown pruning scope '" + std::string(text) + "'");
}

namespace {

struct Candidate {
  bool fresh;  // false for positions that are already masked
  float magnitude;
  std::uint32_t tensor;
  std::uint32_t index;
};

bool rank_before(const Candidate& a, const Candidate& b) noexcept {
  if (a.fresh != b.fresh) {
    return !a.fresh;
  }
  if (a.magnitude != b.magnitude) {
    return a.magnitude < b.magnitude;
  }
  if (a.tensor != b.tensor) {
    return a.tensor < b.tensor;
  }
  return a.index < b.index;
}

std::size_t prune_count(double target, std::size_t n) {
  // Guard against 0.29 * 100 == 28.999999999999996.
  return static_cast<std::size_t>(std::floor(target * static_cast<double>(n) + 1e-9));
}

void prune_candidates(std::vector<Candidate>& cands, std::size_t quota, MaskSet& out) {
  std::size_t already = 0;
  for (const auto& c : cands) {
    already += !c.fresh;
  }
  const std::size_t k = std::max(quota, already);
  std::sort(cands.begin(), cands.end(), rank_before);
  for (std::size_t j = 0; j < k && j < cands.size(); ++j) {
    out.masks[cands[j].tensor][cands[j].index] = 0;
  }
}

}  // namespace

MaskSet magnitude_mask(std::span<const PrunableView> tensors, double target, Scope scope) {
  if (!(target >= 0.0) || target >= 1.0) {
    throw ParameterError("pruning target must lie in [0, 1)");
  }
  MaskSet out;
  out.masks.reserve(tensors.size());
  std::size_t total = 0;
  for (const auto& t : tensors) {
    if (!t.mask.empty() && t.mask.size() != t.weights.size()) {
      throw ShapeError("mask size does not match its tensor");
    }
    out.masks.emplace_back(t.weights.size(), std::uint8_t{1});
    total += t.weights.size();
  }

  auto candidates_of = [&](std::size_t ti, std::vector<Candidate>& cands) {
    const auto& t = tensors[ti];
    for (std::size_t i = 0; i < t.weights.size(); ++i) {
      const bool masked = !t.mask.empty() && t.mask[i] == 0;
      cands.push_back(Candidate{!masked, std::abs(t.weights[i]), static_cast<std::uint32_t>(ti),
                                static_cast<std::uint32_t>(i)});
    }
  };

  if (scope == Scope::global) {
    std::vector<Candidate> cands;
    cands.reserve(total);
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
      candidates_of(ti, cands);
    }
    prune_candidates(cands, prune_count(target, total), out);
  } else {
    // Largest-remainder split of the global count, so every tensor sits
    // within one weight of the target and the total is exact.
    std::vector<std::size_t> quota(tensors.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t assigned = 0;
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
      const double share = target * static_cast<double>(tensors[ti].weights.size());
      quota[ti] = prune_count(target, tensors[ti].weights.size());
      assigned += quota[ti];
      remainder.emplace_back(share - static_cast<double>(quota[ti]), ti);
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t want = prune_count(target, total);
    for (std::size_t j = 0; assigned < want && j < remainder.size(); ++j, ++assigned) {
      ++quota[remainder[j].second];
    }
    for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
      std::vector<Candidate> cands;
      cands.reserve(tensors[ti].weights.size());
      candidates_of(ti, cands);
      prune_candidates(cands, quota[ti], out);
    }
  }

  std::size_t zeros = 0;
  for (std::size_t ti = 0; ti < out.masks.size(); ++ti) {
    const auto& m = out.masks[ti];
    const auto z = static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{0}));
    if (!m.empty() && z == m.size()) {
      throw DegenerateLayerError("pruning to " + std::to_string(target) + " would remove every weight of tensor " +
                                 std::to_string(ti));
    }
    zeros += z;
  }
  out.achieved_sparsity = total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
  return out;
}

MaskSet magnitude_mask(const ModelBundle& bundle, double target, Scope scope) {
  std::vector<PrunableView> views;
  for (const auto* e : bundle.prunable()) {
    views.push_back(PrunableView{e->value.data(), e->mask});
  }
  return magnitude_mask(views, target, scope);
}

void apply_mask_set(ModelBundle& bundle, const MaskSet& masks) {
  auto entries = bundle.prunable();
  if (entries.size() != masks.masks.size()) {
    throw ShapeError("mask set does not match the bundle's prunable tensors");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (masks.masks[i].size() != entries[i]->value.size()) {
      throw ShapeError("mask for '" + entries[i]->name + "' has the wrong size");
    }
    entries[i]->mask = masks.masks[i];
  }
  bundle.encoder.weights().apply_masks();
  bundle.classifier_head.weights().apply_masks();
}

GradualPruner::GradualPruner(SparsitySchedule schedule, Scope scope, std::optional<std::int64_t> total_steps,
                             bool clamp_to_final)
    : schedule_(schedule), scope_(scope) {
  schedule_.validate();
  if (clamp_to_final && total_steps && *total_steps > schedule_.begin_step) {
    const std::int64_t span = *total_steps - 1 - schedule_.begin_step;
    last_firing_step_ = schedule_.begin_step + (span / schedule_.frequency) * schedule_.frequency;
  }
  if (total_steps && schedule_.end_step >= *total_steps) {
    warnings_.push_back("pruning ramp ends at step " + std::to_string(schedule_.end_step) + " but training runs " +
                        std::to_string(*total_steps) + " steps" +
                        (clamp_to_final ? "; the last update is clamped to the final sparsity" : ""));
  }
}

std::optional<double> GradualPruner::operator()(std::int64_t step, ModelBundle& bundle) {
  if (!schedule_.fires_at(step)) {
    return std::nullopt;
  }
  double target = sparsity_at(schedule_, step);
  if (last_firing_step_ && step == *last_firing_step_) {
    target = schedule_.final_sparsity;
  }
  const MaskSet masks = magnitude_mask(bundle, target, scope_);
  apply_mask_set(bundle, masks);
  trace_.emplace_back(step, masks.achieved_sparsity);
  return masks.achieved_sparsity;
}

GradualPruner gmp_hook(const SparsitySchedule& schedule, Scope scope) {
  return GradualPruner(schedule, scope);
}

GradualPruner delayed_gmp_hook(const SparsitySchedule& schedule, int delay_epochs, std::int64_t steps_per_epoch,
                               std::int64_t total_steps, Scope scope) {
  if (delay_epochs < 0 || steps_per_epoch < 1) {
    throw ParameterError("delayed GMP needs delay_epochs >= 0 and steps_per_epoch >= 1");
  }
  SparsitySchedule shifted = schedule;
  const std::int64_t offset = static_cast<std::int64_t>(delay_epochs) * steps_per_epoch;
  shifted.begin_step += offset;
  shifted.end_step += offset;
  return GradualPruner(shifted, scope, total_steps, true);
}

training::StepHook as_step_hook(GradualPruner& pruner) {
  return [&pruner](std::int64_t step, ModelBundle& bundle) { return pruner(step, bundle); };
}

ModelBundle one_shot_prune(ModelBundle bundle, double target, Scope scope) {
  if (target == 0.0) {
    return bundle;
  }
  apply_mask_set(bundle, magnitude_mask(bundle, target, scope));
  bundle.provenance.pruning = PruningMethod::one_shot;
  bundle.provenance.sparsity = target;
  return bundle;
}

}  // namespace prunelab::pruning
