// SPDX-License-Identifier: Apache-2.0
#include "prunelab/manifest.hpp"

#include <charconv>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "prunelab/errors.hpp"

namespace prunelab::runner {

namespace {

using json = nlohmann::ordered_json;

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string cell_id(Method method, PruningMethod pruning, double sparsity, std::uint32_t model_index) {
  return fmt::format("{}-{}-t{}-m{:03}", to_string(method), to_string(pruning), shortest(sparsity), model_index);
}

std::vector<std::string> CellEntry::files() const {
  std::vector<std::string> out;
  for (const auto* f : {&checkpoint, &step_log, &predictions, &reps_train, &reps_test}) {
    if (!f->empty()) {
      out.push_back(*f);
    }
  }
  return out;
}

std::vector<std::string> RunManifest::artifacts() const {
  std::vector<std::string> out;
  if (!config_file.empty()) {
    out.push_back(config_file);
  }
  for (const auto& c : cells) {
    if (c.status == CellStatus::completed) {
      auto f = c.files();
      out.insert(out.end(), f.begin(), f.end());
    }
  }
  return out;
}

const CellEntry* RunManifest::find(const std::string& id) const {
  for (const auto& c : cells) {
    if (c.id == id) {
      return &c;
    }
  }
  return nullptr;
}

void RunManifest::write(const std::filesystem::path& path) const {
  json j;
  j["config_hash"] = config_hash;
  j["config_file"] = config_file;
  j["sparsity_grid"] = sparsity_grid;
  json methods_j = json::array();
  for (auto m : methods) {
    methods_j.push_back(std::string(to_string(m)));
  }
  j["methods"] = methods_j;
  json pruning_j = json::array();
  for (auto p : pruning) {
    pruning_j.push_back(std::string(to_string(p)));
  }
  j["pruning"] = pruning_j;
  j["ensemble_size"] = ensemble_size;
  j["probe_k"] = probe_k;
  j["class_count"] = class_count;
  json cells_j = json::array();
  for (const auto& c : cells) {
    json cj;
    cj["id"] = c.id;
    cj["method"] = std::string(to_string(c.method));
    cj["pruning"] = std::string(to_string(c.pruning));
    cj["sparsity"] = c.sparsity;
    cj["model_index"] = c.model_index;
    cj["seed"] = c.seed;
    cj["status"] = c.status == CellStatus::completed ? "completed" : "failed";
    cj["error"] = c.error;
    cj["wall_clock_ms"] = c.wall_clock_ms;
    cj["achieved_sparsity"] = c.achieved_sparsity;
    cj["checkpoint"] = c.checkpoint;
    cj["step_log"] = c.step_log;
    cj["predictions"] = c.predictions;
    cj["reps_train"] = c.reps_train;
    cj["reps_test"] = c.reps_test;
    cj["warnings"] = c.warnings;
    cells_j.push_back(std::move(cj));
  }
  j["cells"] = cells_j;
  j["artifacts"] = artifacts();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) {
      throw Error("cannot write manifest '" + path.string() + "'");
    }
    out << j.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

RunManifest RunManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open manifest '" + path.string() + "'", 0);
  }
  RunManifest m;
  try {
    const auto j = json::parse(in);
    m.config_hash = j.at("config_hash").get<std::string>();
    m.config_file = j.at("config_file").get<std::string>();
    m.sparsity_grid = j.at("sparsity_grid").get<std::vector<double>>();
    for (const auto& s : j.at("methods")) {
      m.methods.push_back(parse_method(s.get<std::string>()));
    }
    for (const auto& s : j.at("pruning")) {
      m.pruning.push_back(parse_pruning(s.get<std::string>()));
    }
    m.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    m.probe_k = j.at("probe_k").get<std::size_t>();
    m.class_count = j.at("class_count").get<std::uint32_t>();
    for (const auto& cj : j.at("cells")) {
      CellEntry c;
      c.id = cj.at("id").get<std::string>();
      c.method = parse_method(cj.at("method").get<std::string>());
      c.pruning = parse_pruning(cj.at("pruning").get<std::string>());
      c.sparsity = cj.at("sparsity").get<double>();
      c.model_index = cj.at("model_index").get<std::uint32_t>();
      c.seed = cj.at("seed").get<std::uint64_t>();
      const auto status = cj.at("status").get<std::string>();
      if (status != "completed" && status != "failed") {
        throw ParseError("manifest cell '" + c.id + "' has unknown status '" + status + "'", 0);
      }
      c.status = status == "completed" ? CellStatus::completed : CellStatus::failed;
      c.error = cj.value("error", "");
      c.wall_clock_ms = cj.value("wall_clock_ms", 0.0);
      c.achieved_sparsity = cj.value("achieved_sparsity", 0.0);
      c.checkpoint = cj.value("checkpoint", "");
      c.step_log = cj.value("step_log", "");
      c.predictions = cj.at("predictions").get<std::string>();
      c.reps_train = cj.at("reps_train").get<std::string>();
      c.reps_test = cj.at("reps_test").get<std::string>();
      c.warnings = cj.value("warnings", std::vector<std::string>{});
      m.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest '" + path.string() + "': " + e.what(), 0);
  } catch (const ParameterError& e) {
    throw ParseError("malformed manifest '" + path.string() + "': " + e.what(), 0);
  }
  return m;
}

}  // namespace prunelab::runner
