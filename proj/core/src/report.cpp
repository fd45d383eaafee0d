// SPDX-License-Identifier: Apache-2.0
#include "prunelab/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "prunelab/errors.hpp"
#include "prunelab/rdmp.hpp"

namespace prunelab::runner {

namespace {

namespace fs = std::filesystem;
using diagnostics::MeanStd;
using diagnostics::PieRecord;
using diagnostics::PredictionLog;
using diagnostics::ProbeSet;

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string num(double v) { return fmt::format("{:.6f}", v); }

std::string mean_cols(const std::optional<MeanStd>& ms) {
  return ms ? num(ms->mean) + "," + num(ms->std) : std::string("-,-");
}

/// Everything diagnose needs from one cohort of completed cells.
struct Cohort {
  std::size_t models = 0;
  std::size_t failed = 0;
  PredictionLog log;
  // Per-sample means over models.
  std::map<std::uint64_t, MeanStd> q;
  std::map<std::uint64_t, MeanStd> z;
  std::map<std::uint64_t, MeanStd> l1;
  std::map<std::uint64_t, double> depth;
};

std::optional<MeanStd> over_samples(const std::map<std::uint64_t, MeanStd>& per_sample) {
  std::vector<double> values;
  for (const auto& [id, ms] : per_sample) {
    values.push_back(ms.mean);
  }
  if (values.empty()) {
    return std::nullopt;
  }
  return diagnostics::mean_std(values);
}

std::optional<MeanStd> depth_group(const Cohort& c, const std::vector<PieRecord>* pies, bool want_pie) {
  std::vector<double> values;
  for (const auto& [id, d] : c.depth) {
    bool is_pie = false;
    if (pies) {
      auto it = std::lower_bound(pies->begin(), pies->end(), id,
                                 [](const PieRecord& r, std::uint64_t v) { return r.sample_id < v; });
      is_pie = it != pies->end() && it->sample_id == id && it->is_pie;
    }
    if (is_pie == want_pie) {
      values.push_back(d);
    }
  }
  if (values.empty()) {
    return std::nullopt;
  }
  return diagnostics::mean_std(values);
}

fs::path resolve(const fs::path& base, const std::string& rel) {
  fs::path p = base / rel;
  if (!fs::exists(p)) {
    throw ProtocolError("manifest references missing file '" + p.string() + "'");
  }
  return p;
}

Cohort load_cohort(const RunManifest& manifest, const fs::path& base, Method m, PruningMethod p, double t) {
  Cohort c;
  // Per sample: one value per model.
  std::map<std::uint64_t, std::vector<double>> qs, zs, ls, ds;
  for (const auto& cell : manifest.cells) {
    if (cell.method != m || cell.pruning != p || cell.sparsity != t) {
      continue;
    }
    if (cell.status != CellStatus::completed) {
      ++c.failed;
      continue;
    }
    ++c.models;
    auto log = diagnostics::read_prediction_log(resolve(base, cell.predictions));
    c.log.insert(c.log.end(), log.begin(), log.end());

    const ProbeSet train = diagnostics::read_rdmp(resolve(base, cell.reps_train));
    const ProbeSet test = diagnostics::read_rdmp(resolve(base, cell.reps_test));
    if (test.probes.size() < 2) {
      throw ProtocolError("representation dump '" + cell.reps_test + "' has fewer than two probes");
    }
    const Tensor& h = test.probes[test.probes.size() - 2];
    for (std::size_t i = 0; i < test.size(); ++i) {
      try {
        const auto r = diagnostics::qscore(h.row(i), test.sample_ids[i]);
        qs[r.sample_id].push_back(r.q);
        zs[r.sample_id].push_back(r.z);
        ls[r.sample_id].push_back(r.l1);
      } catch (const DegenerateInputError&) {
        // a dead representation carries no Q-Score
      }
    }
    for (const auto& r : diagnostics::pd_score(train, test, manifest.probe_k)) {
      ds[r.sample_id].push_back(r.depth);
    }
  }
  auto fold = [](const std::map<std::uint64_t, std::vector<double>>& in, std::map<std::uint64_t, MeanStd>& out) {
    for (const auto& [id, v] : in) {
      out[id] = diagnostics::mean_std(v);
    }
  };
  fold(qs, c.q);
  fold(zs, c.z);
  fold(ls, c.l1);
  for (const auto& [id, v] : ds) {
    c.depth[id] = diagnostics::mean_std(v).mean;
  }
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write report '" + path.string() + "'");
  }
  out << text;
}

}  // namespace

const PairReport* DiagnosticsReport::find(Method m, PruningMethod p) const {
  for (const auto& pr : pairs) {
    if (pr.method == m && pr.pruning == p) {
      return &pr;
    }
  }
  return nullptr;
}

DiagnosticsReport build_report(const RunManifest& manifest, const fs::path& base_dir) {
  std::vector<double> grid = manifest.sparsity_grid;
  std::sort(grid.begin(), grid.end());
  if (grid.empty() || grid.front() != 0.0) {
    throw ProtocolError("the sparsity grid must contain the dense baseline 0");
  }

  DiagnosticsReport report;
  // PIE records per (method, pruning, sparsity), kept for the overlap tables.
  std::map<std::tuple<Method, PruningMethod, double>, std::vector<PieRecord>> pies_by_cell;

  for (Method m : manifest.methods) {
    const Cohort dense = load_cohort(manifest, base_dir, m, PruningMethod::none, 0.0);
    report.cohorts.push_back(CohortRow{m, PruningMethod::none, 0.0, dense.models, dense.failed});
    if (dense.models == 0) {
      throw ProtocolError(fmt::format("no completed dense models for method {}", to_string(m)));
    }
    for (PruningMethod p : manifest.pruning) {
      if (p == PruningMethod::none) {
        continue;
      }
      PairReport pr{m, p, {}, {}, {}, {}};
      for (double t : grid) {
        if (t == 0.0) {
          pr.pie.push_back(PieRow{0.0, std::nullopt, diagnostics::accuracy_stats(dense.log)});
          pr.qscore.push_back(QRow{0.0, over_samples(dense.q), over_samples(dense.z), over_samples(dense.l1)});
          pr.pdscore.push_back(PdRow{0.0, std::nullopt, depth_group(dense, nullptr, false)});
          continue;
        }
        const Cohort c = load_cohort(manifest, base_dir, m, p, t);
        report.cohorts.push_back(CohortRow{m, p, t, c.models, c.failed});
        if (c.models == 0) {
          pr.pie.push_back(PieRow{t, std::nullopt, std::nullopt});
          pr.qscore.push_back(QRow{t, std::nullopt, std::nullopt, std::nullopt});
          pr.pdscore.push_back(PdRow{t, std::nullopt, std::nullopt});
          continue;
        }
        auto pies = diagnostics::identify_pies(dense.log, c.log);
        const auto count = static_cast<std::size_t>(
            std::count_if(pies.begin(), pies.end(), [](const PieRecord& r) { return r.is_pie; }));
        pr.pie.push_back(PieRow{t, count, diagnostics::accuracy_stats(c.log)});
        pr.qscore.push_back(QRow{t, over_samples(c.q), over_samples(c.z), over_samples(c.l1)});
        pr.pdscore.push_back(PdRow{t, depth_group(c, &pies, true), depth_group(c, &pies, false)});
        const auto per_class = diagnostics::per_class_pie_distribution(pies, manifest.class_count);
        for (std::uint32_t k = 0; k < per_class.size(); ++k) {
          pr.classes.push_back(ClassRow{t, k, per_class[k]});
        }
        pies_by_cell[{m, p, t}] = std::move(pies);
      }
      report.pairs.push_back(std::move(pr));
    }
  }

  for (PruningMethod p : manifest.pruning) {
    for (double t : grid) {
      auto a = pies_by_cell.find({Method::sup, p, t});
      auto b = pies_by_cell.find({Method::scl, p, t});
      if (a == pies_by_cell.end() || b == pies_by_cell.end()) {
        continue;
      }
      const auto ov = diagnostics::pie_overlap(a->second, b->second, manifest.class_count);
      for (std::uint32_t k = 0; k < manifest.class_count; ++k) {
        report.overlap.push_back(
            OverlapRow{p, t, k, ov.shared_per_class[k], ov.unique_a_per_class[k], ov.unique_b_per_class[k]});
      }
    }
  }
  return report;
}

std::vector<std::string> write_report(const DiagnosticsReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_file(out_dir / name, text);
    written.push_back(name);
  };

  for (const auto& pr : report.pairs) {
    const std::string tag = fmt::format("{}_{}", to_string(pr.method), to_string(pr.pruning));

    std::string pie = "sparsity,pie,acc_mean,acc_std\n";
    for (const auto& r : pr.pie) {
      pie += shortest(r.sparsity) + "," + (r.pie ? std::to_string(*r.pie) : std::string("-")) + ",";
      pie += r.accuracy ? num(100.0 * r.accuracy->mean) + "," + num(100.0 * r.accuracy->std) : std::string("-,-");
      pie += "\n";
    }
    emit("pie_" + tag + ".csv", pie);

    std::string q = "sparsity,q_mean,q_std,z_mean,z_std,l1_mean,l1_std\n";
    for (const auto& r : pr.qscore) {
      q += shortest(r.sparsity) + "," + mean_cols(r.q) + "," + mean_cols(r.z) + "," + mean_cols(r.l1) + "\n";
    }
    emit("qscore_" + tag + ".csv", q);

    std::string pd = "sparsity,pd_pie_mean,pd_pie_std,pd_nonpie_mean,pd_nonpie_std\n";
    for (const auto& r : pr.pdscore) {
      pd += shortest(r.sparsity) + "," + mean_cols(r.pie) + "," + mean_cols(r.non_pie) + "\n";
    }
    emit("pdscore_" + tag + ".csv", pd);

    std::string cls = "sparsity,class,pie\n";
    for (const auto& r : pr.classes) {
      cls += fmt::format("{},{},{}\n", shortest(r.sparsity), r.cls, r.pie);
    }
    emit("pie_classes_" + tag + ".csv", cls);
  }

  std::map<PruningMethod, std::string> overlap;
  for (const auto& r : report.overlap) {
    auto& text = overlap[r.pruning];
    if (text.empty()) {
      text = "sparsity,class,shared,unique_sup,unique_scl\n";
    }
    text += fmt::format("{},{},{},{},{}\n", shortest(r.sparsity), r.cls, r.shared, r.unique_sup, r.unique_scl);
  }
  for (const auto& [p, text] : overlap) {
    emit(fmt::format("pie_overlap_{}.csv", to_string(p)), text);
  }

  std::string cohorts = "method,pruning,sparsity,models,failed\n";
  for (const auto& r : report.cohorts) {
    cohorts += fmt::format("{},{},{},{},{}\n", to_string(r.method), to_string(r.pruning), shortest(r.sparsity),
                           r.models, r.failed);
  }
  emit("cohorts.csv", cohorts);
  return written;
}

std::string format_summary(const DiagnosticsReport& report) {
  std::string out;
  for (const auto& pr : report.pairs) {
    out += fmt::format("{} / {}\n", to_string(pr.method), to_string(pr.pruning));
    out += fmt::format("  {:>8}  {:>5}  {:>16}  {:>16}\n", "sparsity", "PIE", "acc % (sd)", "Q (sd)");
    for (std::size_t i = 0; i < pr.pie.size(); ++i) {
      const auto& p = pr.pie[i];
      const auto& q = pr.qscore[i];
      const std::string acc =
          p.accuracy ? fmt::format("{:.2f} ({:.2f})", 100.0 * p.accuracy->mean, 100.0 * p.accuracy->std) : "-";
      const std::string qs = q.q ? fmt::format("{:.4f} ({:.4f})", q.q->mean, q.q->std) : "-";
      out += fmt::format("  {:>8}  {:>5}  {:>16}  {:>16}\n", shortest(p.sparsity),
                         p.pie ? std::to_string(*p.pie) : "-", acc, qs);
    }
  }
  out += "sd: sample standard deviation (accuracy across models, Q across samples)\n";
  return out;
}

}  // namespace prunelab::runner
