// SPDX-License-Identifier: Apache-2.0
#include "prunelab/runner.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "prunelab/checkpoint.hpp"
#include "prunelab/errors.hpp"
#include "prunelab/random.hpp"
#include "prunelab/rdmp.hpp"

namespace prunelab::runner {

namespace {

namespace fs = std::filesystem;

std::int64_t steps_per_epoch(std::size_t samples, std::size_t batch) {
  return static_cast<std::int64_t>((samples + batch - 1) / batch);
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ProtocolError("cannot read '" + path.string() + "'");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

diagnostics::ProbeSet probe_set(const ModelBundle& bundle, const datagen::Dataset& data) {
  diagnostics::ProbeSet set;
  set.probes = probe_activations(bundle, data.features);
  set.labels = data.labels;
  set.sample_ids.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    set.sample_ids[i] = i;
  }
  return set;
}

void check_masks_zero(const ModelBundle& bundle) {
  for (const WeightEntry* w : bundle.prunable()) {
    if (!w->has_mask()) {
      continue;
    }
    const auto values = w->value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (w->mask[i] == 0 && values[i] != 0.0f) {
        throw Error("masked weight " + w->name + "[" + std::to_string(i) + "] is nonzero after training");
      }
    }
  }
}

struct Context {
  const ExperimentConfig& config;
  const DataSplits& data;
  fs::path out_dir;
};

fs::path cell_dir(const std::string& id) { return fs::path("runs") / id; }

/// Trains (or prunes) one cell and writes its artifacts. Throws on failure.
void execute(const Context& ctx, const CellPlan& plan, CellEntry& entry) {
  const ExperimentConfig& cfg = ctx.config;
  const datagen::Dataset& train = ctx.data.train;
  training::TrainConfig tc = cfg.train_config(plan.method);
  tc.method = plan.method;
  tc.seed = plan.seed;

  const std::int64_t spe = steps_per_epoch(train.size(), tc.batch_size);
  const std::int64_t total = spe * tc.epochs;

  auto run_training = [&](const training::StepHook& hook) {
    return plan.method == Method::sup ? training::train_sup(train, tc, hook)
                                      : training::train_scl(train, tc, cfg.augmentation, hook);
  };

  ModelBundle bundle = make_bundle(ArchitectureSpec{}, plan.method, 0);
  std::vector<training::StepRecord> steps;

  switch (plan.pruning) {
    case PruningMethod::none: {
      auto result = run_training({});
      bundle = std::move(result.bundle);
      steps = std::move(result.steps);
      break;
    }
    case PruningMethod::gmp:
    case PruningMethod::delta_gmp: {
      const GradualSpec& g = cfg.gradual(plan.method);
      pruning::SparsitySchedule schedule = g.schedule;
      schedule.final_sparsity = plan.sparsity;
      pruning::GradualPruner pruner =
          plan.pruning == PruningMethod::gmp
              ? pruning::GradualPruner(schedule, g.scope, total, true)
              : pruning::delayed_gmp_hook(schedule, cfg.delta_gmp_delay_epochs, spe, total, g.scope);
      auto result = run_training(pruning::as_step_hook(pruner));
      bundle = std::move(result.bundle);
      steps = std::move(result.steps);
      entry.warnings = pruner.warnings();
      break;
    }
    case PruningMethod::one_shot: {
      const std::string dense_id = cell_id(plan.method, PruningMethod::none, 0.0, plan.model_index);
      const fs::path dense_ckpt = ctx.out_dir / cell_dir(dense_id) / "checkpoint.prnk";
      if (!fs::exists(dense_ckpt)) {
        throw ProtocolError("dense checkpoint of " + dense_id + " is missing");
      }
      bundle = pruning::one_shot_prune(checkpoint_read(dense_ckpt), plan.sparsity, cfg.oneshot.scope);
      training::FinetuneOptions ft;
      ft.epochs = cfg.oneshot.finetune_epochs;
      ft.lr = cfg.oneshot.finetune_lr;
      ft.batch_size = tc.batch_size;
      ft.momentum = tc.momentum;
      ft.weight_decay = tc.weight_decay;
      ft.seed = derive_seed(plan.seed, "finetune");
      ft.train_encoder = cfg.oneshot.finetune_encoder;
      bundle = training::finetune(std::move(bundle), train, ft, &steps);
      break;
    }
  }
  bundle.provenance = Provenance{plan.method, plan.seed, plan.sparsity, plan.pruning};
  check_masks_zero(bundle);
  entry.achieved_sparsity = bundle.achieved_sparsity();

  const fs::path rel = cell_dir(plan.id);
  fs::create_directories(ctx.out_dir / rel);

  const datagen::Dataset& test = ctx.data.test;
  const auto predicted = predict(bundle, test.features);
  diagnostics::PredictionLog log;
  log.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    log.push_back(diagnostics::PredictionRecord{plan.model_index, plan.method, plan.pruning, plan.sparsity, i,
                                                predicted[i], test.labels[i]});
  }

  entry.checkpoint = (rel / "checkpoint.prnk").generic_string();
  entry.step_log = (rel / "steps.jsonl").generic_string();
  entry.predictions = (rel / "predictions.csv").generic_string();
  entry.reps_train = (rel / "reps_train.rdmp").generic_string();
  entry.reps_test = (rel / "reps_test.rdmp").generic_string();

  checkpoint_write(bundle, ctx.out_dir / entry.checkpoint);
  training::write_step_log(steps, ctx.out_dir / entry.step_log);
  diagnostics::write_prediction_log(log, ctx.out_dir / entry.predictions);
  diagnostics::write_rdmp(probe_set(bundle, train), ctx.out_dir / entry.reps_train);
  diagnostics::write_rdmp(probe_set(bundle, test), ctx.out_dir / entry.reps_test);
}

bool files_present(const fs::path& base, const CellEntry& e) {
  const auto files = e.files();
  if (files.size() != 5) {
    return false;
  }
  for (const auto& f : files) {
    if (!fs::exists(base / f)) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<CellPlan> plan_cells(const ExperimentConfig& config) {
  std::vector<CellPlan> plans;
  for (Method m : config.methods) {
    for (std::uint32_t k = 0; k < config.ensemble_size; ++k) {
      plans.push_back(CellPlan{cell_id(m, PruningMethod::none, 0.0, k), m, PruningMethod::none, 0.0, k,
                               config.base_seed + k});
    }
  }
  for (Method m : config.methods) {
    for (PruningMethod p : config.pruning) {
      if (p == PruningMethod::none) {
        continue;
      }
      for (double t : config.sparsity_grid) {
        if (t == 0.0) {
          continue;
        }
        for (std::uint32_t k = 0; k < config.ensemble_size; ++k) {
          plans.push_back(CellPlan{cell_id(m, p, t, k), m, p, t, k, config.base_seed + k});
        }
      }
    }
  }
  return plans;
}

std::size_t resolve_workers(std::size_t configured) {
  std::size_t workers = std::max<std::size_t>(configured, 1);
  if (const char* env = std::getenv("PRUNELAB_WORKERS")) {
    std::size_t v = 0;
    const std::string_view s(env);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && ptr == s.data() + s.size() && v > 0) {
      workers = v;
    }
  }
  return workers;
}

GridResult run_grid(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);

  GridResult result;
  result.manifest_path = out_dir / "manifest.json";
  const std::string hash = config_hash(config.source_text);

  std::vector<CellEntry> previous;
  if (fs::exists(result.manifest_path)) {
    RunManifest old = RunManifest::read(result.manifest_path);
    if (old.config_hash != hash) {
      throw ConfigError("output directory '" + out_dir.string() + "' holds a run of a different config (hash " +
                        old.config_hash + ")");
    }
    previous = std::move(old.cells);
  }

  const DataSplits data = make_datasets(config.dataset);
  if (config.probe_k > data.train.size()) {
    throw ConfigError("probe k exceeds the training set size");
  }

  RunManifest& manifest = result.manifest;
  manifest.config_hash = hash;
  if (!config.source_text.empty()) {
    manifest.config_file = "config.ini";
    std::ofstream(out_dir / manifest.config_file, std::ios::binary) << config.source_text;
  }
  manifest.sparsity_grid = config.sparsity_grid;
  manifest.methods = config.methods;
  manifest.pruning = config.pruning;
  manifest.ensemble_size = config.ensemble_size;
  manifest.probe_k = config.probe_k;
  manifest.class_count = data.train.class_count;

  const auto plans = plan_cells(config);
  std::vector<std::optional<CellEntry>> entries(plans.size());
  std::vector<std::size_t> dense_todo;
  std::vector<std::size_t> pruned_todo;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    for (const auto& e : previous) {
      if (e.id == plans[i].id && e.status == CellStatus::completed && files_present(out_dir, e)) {
        entries[i] = e;
      }
    }
    if (entries[i]) {
      ++result.skipped;
    } else {
      (plans[i].pruning == PruningMethod::none ? dense_todo : pruned_todo).push_back(i);
    }
  }

  std::mutex mu;
  auto publish = [&] {
    manifest.cells.clear();
    for (const auto& e : entries) {
      if (e) {
        manifest.cells.push_back(*e);
      }
    }
    manifest.write(result.manifest_path);
  };
  publish();

  const Context ctx{config, data, out_dir};
  const std::size_t workers = resolve_workers(options.workers ? options.workers : config.workers);

  auto run_phase = [&](const std::vector<std::size_t>& todo) {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t n = next++; n < todo.size(); n = next++) {
        const CellPlan& plan = plans[todo[n]];
        CellEntry entry;
        entry.id = plan.id;
        entry.method = plan.method;
        entry.pruning = plan.pruning;
        entry.sparsity = plan.sparsity;
        entry.model_index = plan.model_index;
        entry.seed = plan.seed;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          execute(ctx, plan, entry);
          entry.status = CellStatus::completed;
        } catch (const std::exception& e) {
          entry.status = CellStatus::failed;
          entry.error = e.what();
        }
        entry.wall_clock_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        std::lock_guard lock(mu);
        (entry.status == CellStatus::completed ? result.trained : result.failed) += 1;
        entries[todo[n]] = entry;
        publish();
        if (options.on_cell_done) {
          options.on_cell_done(entry);
        }
      }
    };
    const std::size_t n_threads = std::min(workers, todo.size());
    if (n_threads <= 1) {
      work();
      return;
    }
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) {
      pool.emplace_back(work);
    }
  };

  // One-shot cells read the dense checkpoints, so dense cells go first.
  run_phase(dense_todo);
  run_phase(pruned_todo);
  return result;
}

DiagnosticsReport diagnose(const fs::path& manifest_path, const fs::path& out_dir) {
  const RunManifest manifest = RunManifest::read(manifest_path);
  const fs::path base = manifest_path.parent_path();
  if (!manifest.config_file.empty()) {
    const std::string text = read_bytes(base / manifest.config_file);
    if (config_hash(text) != manifest.config_hash) {
      throw ProtocolError("stored config does not match the manifest's config hash");
    }
  }
  for (const auto& f : manifest.artifacts()) {
    if (!fs::exists(base / f)) {
      throw ProtocolError("manifest references missing file '" + (base / f).string() + "'");
    }
  }
  DiagnosticsReport report = build_report(manifest, base);
  write_report(report, out_dir);
  return report;
}

}  // namespace prunelab::runner
