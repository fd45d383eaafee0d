// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gradient_cases.hpp"
#include "oracles.hpp"
#include "prunelab/checkpoint.hpp"
#include "prunelab/diagnostics.hpp"
#include "prunelab/errors.hpp"
#include "prunelab/pruning.hpp"
#include "prunelab/runner.hpp"
#include "prunelab/training.hpp"

using namespace prunelab;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = PRUNELAB_SOURCE_DIR;
const fs::path kGolden = fs::path(PRUNELAB_TEST_DATA) / "golden";

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED: " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

/// A desk grid trained into `dir` and diagnosed into `dir`/reports.
struct DeskRun {
  fs::path dir;
  runner::RunManifest manifest;
  runner::DiagnosticsReport report;
  double seconds = 0.0;
  std::size_t failed = 0;
};

DeskRun run_desk(const fs::path& dir) {
  fs::remove_all(dir);
  auto cfg = runner::load_config(kSource / "configs" / "desk.ini");
  cfg.output_dir = dir;
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = runner::run_grid(cfg);
  DeskRun r{dir, grid.manifest, {}, 0.0, grid.failed};
  r.report = runner::diagnose(grid.manifest_path, dir / "reports");
  r.seconds = seconds_since(t0);
  return r;
}

// ---------------------------------------------------------------- criteria

Verdict gradients() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_ce = 0.0;
  double worst_sc = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ce = gradcheck::cross_entropy_case(seed);
    const auto sc = gradcheck::supcon_case(seed);
    worst_ce = std::max(worst_ce, ce.max_rel_error);
    worst_sc = std::max(worst_sc, sc.max_rel_error);
    v.check(ce.masked_exact_zero && sc.masked_exact_zero, fmt::format("masked gradient nonzero, seed {}", seed));
  }
  const double secs = seconds_since(t0);
  v.check(worst_ce < 1e-4, fmt::format("cross-entropy max rel error {:.3g}", worst_ce));
  v.check(worst_sc < 1e-4, fmt::format("supcon max rel error {:.3g}", worst_sc));
  v.check(secs < 10.0, fmt::format("runtime {:.2f}s", secs));
  v.note(fmt::format("max rel error ce {:.2g}, supcon {:.2g}; {:.2f}s", worst_ce, worst_sc, secs));
  return v;
}

Verdict qscore_oracle() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = diagnostics::qscore(std::vector<float>{1, 0, 0, 0});
  v.check(std::abs(r.q - std::sqrt(3.0)) <= 1e-9, fmt::format("q(1,0,0,0) = {:.12f}", r.q));
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> h(2 + static_cast<std::size_t>(i % 40));
    for (double& x : h) {
      x = g(rng);
    }
    const double c = scale(rng);
    std::vector<double> hc = h;
    for (double& x : hc) {
      x *= c;
    }
    worst = std::max(worst, std::abs(diagnostics::qscore(h).q - diagnostics::qscore(hc).q));
  }
  v.check(worst <= 1e-9, fmt::format("scale invariance gap {:.3g}", worst));
  bool raised = false;
  try {
    diagnostics::qscore(std::vector<float>{0.5f, 0.5f, 0.5f});
  } catch (const DegenerateInputError&) {
    raised = true;
  }
  v.check(raised, "constant vector did not raise");
  const double secs = seconds_since(t0);
  v.check(secs < 1.0, fmt::format("runtime {:.3f}s", secs));
  v.note(fmt::format("q = {:.10f}, worst scale gap {:.2g}", r.q, worst));
  return v;
}

Verdict pie_oracle() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3);
  auto pick = [&](std::uint32_t lo, std::uint32_t hi) { return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng); };
  std::size_t pies = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t models = pick(1, 10), samples = pick(1, 100), classes = pick(2, 5);
    std::vector<std::uint32_t> labels(samples);
    for (auto& l : labels) {
      l = pick(0, classes - 1);
    }
    auto cohort = [&](double t) {
      diagnostics::PredictionLog log;
      for (std::uint32_t m = 0; m < models; ++m) {
        for (std::uint32_t s = 0; s < samples; ++s) {
          // mostly right, with model-specific noise, so both outcomes occur
          const std::uint32_t pred = pick(0, 3) == 0 ? pick(0, classes - 1) : labels[s];
          log.push_back({m, Method::sup, t == 0.0 ? PruningMethod::none : PruningMethod::gmp, t, s, pred, labels[s]});
        }
      }
      std::shuffle(log.begin(), log.end(), rng);
      return log;
    };
    const auto dense = cohort(0.0);
    const auto pruned = cohort(0.9);
    const auto got = diagnostics::identify_pies(dense, pruned);
    const auto want = oracle::pies(dense, pruned);
    bool same = got.size() == want.size();
    for (const auto& r : got) {
      same = same && want.count(r.sample_id) && want.at(r.sample_id) == r.is_pie;
      pies += r.is_pie;
    }
    v.check(same, fmt::format("cohort {} disagrees with the oracle", trial));
  }
  const double secs = seconds_since(t0);
  v.check(secs < 5.0, fmt::format("runtime {:.2f}s", secs));
  v.note(fmt::format("50 cohorts, {} PIEs in total; {:.3f}s", pies, secs));
  return v;
}

Verdict pd_oracle() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::size_t sentinels = 0;
  std::size_t queries = 0;
  const std::size_t ks[] = {1, 3, 5};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t probes = pick(1, 3), n_train = pick(5, 30), n_query = pick(1, 20), k = ks[trial % 3];
    const auto classes = static_cast<std::uint32_t>(pick(2, 4));
    auto make = [&](std::size_t n, const std::vector<std::size_t>& dims) {
      diagnostics::ProbeSet p;
      for (auto d : dims) {
        Tensor t({n, d});
        for (float& x : t.data()) {
          // coarse grid values make exact distance ties common
          x = std::round(g(rng) * 2.0f) / 2.0f;
        }
        p.probes.push_back(std::move(t));
      }
      for (std::size_t i = 0; i < n; ++i) {
        p.labels.push_back(static_cast<std::uint32_t>(pick(0, classes - 1)));
        p.sample_ids.push_back(i);
      }
      return p;
    };
    std::vector<std::size_t> dims(probes);
    for (auto& d : dims) {
      d = pick(1, 4);
    }
    const auto train = make(n_train, dims);
    const auto query = make(n_query, dims);
    const auto got = diagnostics::pd_score(train, query, k);
    const auto want = oracle::pd_depths(train, query, k);
    bool same = got.size() == want.size();
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].depth == want[i];
      sentinels += want[i] == probes + 1;
    }
    queries += n_query;
    v.check(same, fmt::format("instance {} disagrees with the oracle", trial));
  }
  v.check(sentinels > 0, "no instance exercised the L+1 sentinel");
  const double secs = seconds_since(t0);
  v.check(secs < 5.0, fmt::format("runtime {:.2f}s", secs));
  v.note(fmt::format("20 instances, {} queries, {} at the sentinel; {:.3f}s", queries, sentinels, secs));
  return v;
}

Verdict schedule(const DeskRun& desk) {
  Verdict v;
  using pruning::SparsitySchedule;
  const SparsitySchedule s{0.15, 0.9, 100, 1100, 10};
  v.check(pruning::sparsity_at(s, 100) == 0.15, "s_i not exact at t_0");
  v.check(pruning::sparsity_at(s, 1100) == 0.9, "s_f not exact at t_e");
  const double mid = pruning::sparsity_at(SparsitySchedule{0.0, 0.9, 0, 1000, 10}, 500);
  v.check(std::abs(mid - 0.7875) <= 1e-12, fmt::format("midpoint {:.15f}", mid));

  std::size_t traces = 0;
  double worst_gap = 0.0;
  for (const auto& c : desk.manifest.cells) {
    if (c.pruning != PruningMethod::gmp && c.pruning != PruningMethod::delta_gmp) {
      continue;
    }
    if (c.status != runner::CellStatus::completed) {
      v.check(false, c.id + " did not complete");
      continue;
    }
    const auto steps = training::read_step_log(desk.dir / c.step_log);
    bool monotone = true;
    for (std::size_t i = 1; i < steps.size(); ++i) {
      monotone = monotone && steps[i].current_sparsity >= steps[i - 1].current_sparsity;
    }
    v.check(monotone, c.id + " sparsity trace decreases");
    const auto b = checkpoint_read(desk.dir / c.checkpoint);
    std::size_t total = 0;
    for (const auto* w : b.prunable()) {
      total += w->value.size();
    }
    const double gap = std::abs(b.mask_sparsity() - c.sparsity);
    worst_gap = std::max(worst_gap, gap * static_cast<double>(total));
    v.check(gap <= 1.0 / static_cast<double>(total), fmt::format("{} ends at {:.6f}", c.id, b.mask_sparsity()));
    ++traces;
  }
  v.note(fmt::format("{} GMP/delta-GMP traces, worst final gap {:.2f} weights", traces, worst_gap));
  return v;
}

Verdict masks(const DeskRun& desk) {
  Verdict v;
  std::size_t checkpoints = 0;
  std::size_t masked = 0;
  for (const auto& c : desk.manifest.cells) {
    if (c.status != runner::CellStatus::completed) {
      continue;
    }
    const auto b = checkpoint_read(desk.dir / c.checkpoint);
    ++checkpoints;
    for (const auto* w : b.prunable()) {
      if (w->mask.empty()) {
        continue;
      }
      for (std::size_t i = 0; i < w->value.size(); ++i) {
        if (w->mask[i] == 0) {
          ++masked;
          if (w->value[i] != 0.0f || std::signbit(w->value[i])) {
            v.check(false, fmt::format("{}: {}[{}] = {}", c.id, w->name, i, w->value[i]));
          }
        }
      }
    }
  }

  std::mt19937_64 rng(6);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::uniform_real_distribution<double> target(0.0, 0.95);
  std::uniform_int_distribution<int> size(8, 200);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<float>> w(1 + static_cast<std::size_t>(trial % 4));
    for (auto& t : w) {
      t.resize(static_cast<std::size_t>(size(rng)));
      for (float& x : t) {
        x = g(rng);
      }
    }
    auto scaled = w;
    const float c = std::ldexp(1.0f, trial % 7 - 3);  // exact scaling
    for (auto& t : scaled) {
      for (float& x : t) {
        x *= c;
      }
    }
    const double t = target(rng);
    const auto scope = trial % 2 ? pruning::Scope::global : pruning::Scope::per_layer;
    auto mask = [&](const std::vector<std::vector<float>>& ws) -> std::optional<pruning::MaskSet> {
      std::vector<pruning::PrunableView> views;
      for (const auto& x : ws) {
        views.push_back({x, {}});
      }
      try {
        return pruning::magnitude_mask(views, t, scope);
      } catch (const DegenerateLayerError&) {
        return std::nullopt;
      }
    };
    const auto a = mask(w);
    v.check(a == mask(scaled), fmt::format("weight set {} not scale invariant", trial));
    v.check(a == mask(w), fmt::format("weight set {} not deterministic", trial));
  }
  v.note(fmt::format("{} checkpoints, {} masked weights all 0.0; 100 weight sets", checkpoints, masked));
  return v;
}

Verdict protocol(const DeskRun& desk) {
  Verdict v;
  v.check(desk.failed == 0, fmt::format("{} desk cells failed", desk.failed));
  auto row = [&](Method m, PruningMethod p, double t) -> std::pair<std::optional<std::size_t>, double> {
    const auto* pr = desk.report.find(m, p);
    if (!pr) {
      return {std::nullopt, NAN};
    }
    for (std::size_t i = 0; i < pr->pie.size(); ++i) {
      if (pr->pie[i].sparsity == t) {
        return {pr->pie[i].pie, pr->qscore[i].q ? pr->qscore[i].q->mean : NAN};
      }
    }
    return {std::nullopt, NAN};
  };
  const std::vector<PruningMethod> modes{PruningMethod::gmp, PruningMethod::delta_gmp, PruningMethod::one_shot};
  for (Method m : {Method::sup, Method::scl}) {
    for (auto p : modes) {
      const auto half = row(m, p, 0.5).first;
      const auto most = row(m, p, 0.9).first;
      const bool ok = half && most && *most >= *half;
      v.check(ok, fmt::format("(a) {}/{}: PIE at 0.9 below PIE at 0.5", to_string(m), to_string(p)));
      v.note(fmt::format("(a) {}/{} PIE 0.5 -> 0.9: {} -> {}", to_string(m), to_string(p), half.value_or(0),
                         most.value_or(0)));
    }
  }
  for (auto p : modes) {
    const double scl0 = row(Method::scl, p, 0.0).second, scl9 = row(Method::scl, p, 0.9).second;
    const double sup0 = row(Method::sup, p, 0.0).second, sup9 = row(Method::sup, p, 0.9).second;
    const double drop = scl0 - scl9;
    v.check(scl9 < scl0, fmt::format("(b) {}: SCL mean Q {:.4f} at 0.9 is not below {:.4f} at 0", to_string(p), scl9,
                                     scl0));
    v.check(std::abs(sup9 - sup0) < drop,
            fmt::format("(c) {}: Sup mean Q moves by {:.4f}, SCL drops by {:.4f}", to_string(p),
                        std::abs(sup9 - sup0), drop));
    v.note(fmt::format("(b,c) {}: SCL Q {:.4f} -> {:.4f}, Sup Q {:.4f} -> {:.4f}", to_string(p), scl0, scl9, sup0,
                       sup9));
  }
  v.check(desk.seconds < 15 * 60, fmt::format("desk run took {:.0f}s", desk.seconds));
  v.note(fmt::format("desk grid trained and diagnosed in {:.1f}s", desk.seconds));
  return v;
}

Verdict determinism(const DeskRun& a, const DeskRun& b) {
  Verdict v;
  std::size_t compared = 0;
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(a.dir / "reports")) {
    names.insert(e.path().filename().string());
  }
  for (const auto& e : fs::directory_iterator(b.dir / "reports")) {
    v.check(names.count(e.path().filename().string()) == 1, "report set differs: " + e.path().filename().string());
  }
  for (const auto& n : names) {
    v.check(slurp(a.dir / "reports" / n) == slurp(b.dir / "reports" / n), "report differs: " + n);
    ++compared;
  }
  std::size_t artifacts = 0;
  for (const auto& f : a.manifest.artifacts()) {
    v.check(slurp(a.dir / f) == slurp(b.dir / f), "artifact differs: " + f);
    ++artifacts;
  }
  v.note(fmt::format("{} report files and {} artifacts bit-identical across two runs", compared, artifacts));
  return v;
}

Verdict checkpoints(const fs::path& work) {
  Verdict v;
  std::mt19937_64 rng(9);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  const fs::path dir = work / "checkpoints";
  fs::create_directories(dir);
  std::size_t flips = 0;
  for (int i = 0; i < 100; ++i) {
    const ArchitectureSpec arch{pick(1, 8), pick(2, 24), pick(1, 3), pick(2, 12), pick(2, 6)};
    auto bundle = make_bundle(arch, i % 2 ? Method::scl : Method::sup, static_cast<std::uint64_t>(i));
    const double t = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
    try {
      bundle = pruning::one_shot_prune(bundle, t);
    } catch (const DegenerateLayerError&) {
      // tiny layers cannot reach every target; keep the dense bundle
    }
    bundle.provenance.seed = rng();
    const fs::path path = dir / fmt::format("b{:03d}.prnk", i);
    checkpoint_write(bundle, path);
    v.check(checkpoint_read(path).bit_equal(bundle) && checkpoint_read(path).provenance == bundle.provenance,
            fmt::format("bundle {} changed in the round trip", i));

    auto bytes = encode_checkpoint(bundle);
    for (int f = 0; f < 5; ++f) {
      auto bad = bytes;
      const std::size_t at = pick(0, bad.size() - 1);
      bad[at] = static_cast<std::uint8_t>(bad[at] ^ (1u << pick(0, 7)));
      bool caught = false;
      try {
        decode_checkpoint(bad);
      } catch (const CorruptCheckpointError&) {
        caught = true;
      }
      v.check(caught, fmt::format("bundle {}: flip at byte {} went unnoticed", i, at));
      ++flips;
    }
  }
  v.note(fmt::format("100 bundles round-tripped, {} single-byte corruptions detected", flips));
  return v;
}

Verdict schema(const DeskRun& desk, const fs::path& work) {
  Verdict v;
  const fs::path out = work / "golden_reports";
  fs::remove_all(out);
  runner::diagnose(kGolden / "fixture" / "manifest.json", out);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(kGolden / "expected")) {
    const auto name = e.path().filename().string();
    v.check(fs::exists(out / name), "missing report " + name);
    v.check(slurp(out / name) == slurp(e.path()), "report differs from golden: " + name);
    ++files;
  }
  // The desk reports must use the same column layouts as the golden files.
  const std::map<std::string, std::string> expected{
      {"pie", "sparsity,pie,acc_mean,acc_std"},
      {"qscore", "sparsity,q_mean,q_std,z_mean,z_std,l1_mean,l1_std"},
      {"pdscore", "sparsity,pd_pie_mean,pd_pie_std,pd_nonpie_mean,pd_nonpie_std"}};
  std::size_t desk_files = 0;
  for (const auto& pr : desk.report.pairs) {
    const std::string tag = fmt::format("{}_{}", to_string(pr.method), to_string(pr.pruning));
    for (const auto& [kind, header] : expected) {
      const fs::path f = desk.dir / "reports" / (kind + "_" + tag + ".csv");
      v.check(first_line(f) == header, f.filename().string() + " has unexpected columns");
      std::ifstream in(f);
      std::string line;
      std::getline(in, line);
      std::vector<double> sparsities;
      while (std::getline(in, line)) {
        sparsities.push_back(std::stod(line.substr(0, line.find(','))));
      }
      v.check(sparsities == desk.manifest.sparsity_grid, f.filename().string() + " rows do not follow the grid");
      ++desk_files;
    }
  }
  for (const auto& [kind, header] : expected) {
    const fs::path golden = kGolden / "expected" / (kind + "_sup_gmp.csv");
    v.check(first_line(golden) == header, golden.filename().string() + " header mismatch");
  }
  v.note(fmt::format("{} golden files byte-identical; {} desk tables match the schema", files, desk_files));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prunelab acceptance suite"};
  fs::path work = fs::temp_directory_path() / "prunelab_acceptance";
  app.add_option("--work-dir", work, "Scratch directory for desk runs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work);

  struct Criterion {
    int id;
    std::string name;
    std::function<Verdict()> run;
  };
  std::optional<DeskRun> desk_a;
  std::optional<DeskRun> desk_b;
  auto desk = [&]() -> const DeskRun& {
    if (!desk_a) {
      desk_a = run_desk(work / "desk_a");
    }
    return *desk_a;
  };

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradients},
      {2, "Q-Score oracle", qscore_oracle},
      {3, "PIE oracle equivalence", pie_oracle},
      {4, "PD-Score oracle equivalence", pd_oracle},
      {5, "schedule exactness", [&] { return schedule(desk()); }},
      {6, "mask invariants", [&] { return masks(desk()); }},
      {7, "protocol reproduction", [&] { return protocol(desk()); }},
      {8, "end-to-end determinism",
       [&] {
         const auto& a = desk();
         desk_b = run_desk(work / "desk_b");
         return determinism(a, *desk_b);
       }},
      {9, "checkpoint round trip", [&] { return checkpoints(work); }},
      {10, "report schema", [&] { return schema(desk(), work); }},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failures += !v.pass;
    std::printf("%s criterion %d (%s)\n", v.pass ? "PASS" : "FAIL", c.id, c.name.c_str());
    for (const auto& n : v.notes) {
      std::printf("    %s\n", n.c_str());
    }
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
