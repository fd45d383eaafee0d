// SPDX-License-Identifier: Apache-2.0
#include "prunelab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "prunelab/errors.hpp"
#include "prunelab/random.hpp"

namespace prunelab::runner {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string_view rest = s;
  for (;;) {
    const auto comma = rest.find(',');
    auto item = trim(rest.substr(0, comma));
    if (!item.empty()) {
      out.push_back(std::move(item));
    }
    if (comma == std::string_view::npos) {
      break;
    }
    rest.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_value(const std::string& where, const std::string& text) {
  T value{};
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError(where + ": cannot parse '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& where, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1") {
    return true;
  }
  if (t == "false" || t == "no" || t == "0") {
    return false;
  }
  throw ConfigError(where + ": expected a boolean, got '" + text + "'");
}

using Setter = std::function<void(const std::string& where, const std::string& value)>;
using Section = std::map<std::string, Setter>;

template <typename T>
Setter num(T& field) {
  return [&field](const std::string& where, const std::string& v) { field = parse_value<T>(where, v); };
}

Setter flag(bool& field) {
  return [&field](const std::string& where, const std::string& v) { field = parse_bool(where, v); };
}

Setter text(std::string& field) {
  return [&field](const std::string&, const std::string& v) { field = trim(v); };
}

Setter scope(pruning::Scope& field) {
  return [&field](const std::string& where, const std::string& v) {
    try {
      field = pruning::parse_scope(trim(v));
    } catch (const ParameterError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  };
}

Section train_section(training::TrainConfig& c) {
  return {{"epochs", num(c.epochs)},
          {"batch_size", num(c.batch_size)},
          {"lr", num(c.lr)},
          {"momentum", num(c.momentum)},
          {"weight_decay", num(c.weight_decay)},
          {"temperature", num(c.temperature)},
          {"cosine_annealing", flag(c.cosine_annealing)},
          {"representation_dim", num(c.representation_dim)},
          {"hidden_dim", num(c.hidden_dim)},
          {"hidden_layers", num(c.hidden_layers)},
          {"head_epochs", num(c.head_epochs)},
          {"head_lr", num(c.head_lr)},
          {"head_augmented", flag(c.head_augmented)}};
}

Section gradual_section(GradualSpec& g) {
  return {{"initial_sparsity", num(g.schedule.initial_sparsity)},
          {"begin_step", num(g.schedule.begin_step)},
          {"end_step", num(g.schedule.end_step)},
          {"frequency", num(g.schedule.frequency)},
          {"scope", scope(g.scope)}};
}

}  // namespace

void ExperimentConfig::validate() const {
  if (ensemble_size < 1) {
    throw ConfigError("experiment.ensemble_size must be at least 1");
  }
  if (std::find(sparsity_grid.begin(), sparsity_grid.end(), 0.0) == sparsity_grid.end()) {
    throw ConfigError("experiment.sparsity_grid must contain 0 (the dense baseline)");
  }
  for (double t : sparsity_grid) {
    if (t < 0.0 || t >= 1.0) {
      throw ConfigError("experiment.sparsity_grid values must lie in [0, 1)");
    }
  }
  if (methods.empty()) {
    throw ConfigError("experiment.methods must name at least one method");
  }
  if (workers < 1) {
    throw ConfigError("experiment.workers must be at least 1");
  }
  if (probe_k < 1) {
    throw ConfigError("probe.k must be at least 1");
  }
  try {
    for (Method m : methods) {
      auto c = train_config(m);
      c.method = m;
      c.validate();
      auto s = gradual(m).schedule;
      s.final_sparsity = std::max(s.initial_sparsity, 0.5);
      s.validate();
    }
    if (std::find(methods.begin(), methods.end(), Method::scl) != methods.end()) {
      augmentation.validate();
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (delta_gmp_delay_epochs < 0) {
    throw ConfigError("delta_gmp.delay_epochs must be nonnegative");
  }
  if (oneshot.finetune_epochs < 0 || !(oneshot.finetune_lr > 0.0)) {
    throw ConfigError("oneshot fine-tuning needs epochs >= 0 and lr > 0");
  }
  const auto& d = dataset;
  if (d.kind != "blobs" && d.kind != "rings" && d.kind != "mixture" && d.kind != "csv") {
    throw ConfigError("dataset.kind must be blobs, rings, mixture or csv");
  }
  if (d.kind != "csv" && d.train_seed == d.test_seed) {
    throw ConfigError("dataset.train_seed and dataset.test_seed must differ");
  }
  if (d.kind == "csv" && (d.train_csv.empty() || d.test_csv.empty())) {
    throw ConfigError("dataset kind csv needs train_csv and test_csv");
  }
}

ExperimentConfig parse_config(std::string_view source, const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  cfg.sup.method = Method::sup;
  cfg.scl.method = Method::scl;
  cfg.gmp_sup.schedule = pruning::SparsitySchedule{0.0, 0.0, 20, 400, 20};
  cfg.gmp_scl.schedule = pruning::SparsitySchedule{0.0, 0.0, 10, 200, 10};
  cfg.source_text = std::string(source);

  std::string grid_text;
  std::string methods_text;
  std::string pruning_text;
  std::string output_dir;
  std::string train_csv;
  std::string test_csv;

  std::map<std::string, Section> sections;
  sections["experiment"] = {{"name", text(cfg.name)},
                            {"base_seed", num(cfg.base_seed)},
                            {"ensemble_size", num(cfg.ensemble_size)},
                            {"sparsity_grid", text(grid_text)},
                            {"methods", text(methods_text)},
                            {"pruning", text(pruning_text)},
                            {"output_dir", text(output_dir)},
                            {"workers", num(cfg.workers)}};
  sections["dataset"] = {{"kind", text(cfg.dataset.kind)},
                         {"classes", num(cfg.dataset.classes)},
                         {"ring_classes", num(cfg.dataset.ring_classes)},
                         {"blob_classes", num(cfg.dataset.blob_classes)},
                         {"per_class_train", num(cfg.dataset.per_class_train)},
                         {"per_class_test", num(cfg.dataset.per_class_test)},
                         {"dim", num(cfg.dataset.dim)},
                         {"separation", num(cfg.dataset.separation)},
                         {"noise", num(cfg.dataset.noise)},
                         {"train_seed", num(cfg.dataset.train_seed)},
                         {"test_seed", num(cfg.dataset.test_seed)},
                         {"train_csv", text(train_csv)},
                         {"test_csv", text(test_csv)}};
  sections["train.sup"] = train_section(cfg.sup);
  sections["train.scl"] = train_section(cfg.scl);
  sections["augment"] = {{"noise_sigma", num(cfg.augmentation.noise_sigma)},
                         {"scale_min", num(cfg.augmentation.scale_min)},
                         {"scale_max", num(cfg.augmentation.scale_max)},
                         {"views_per_sample", num(cfg.augmentation.views_per_sample)}};
  sections["gmp.sup"] = gradual_section(cfg.gmp_sup);
  sections["gmp.scl"] = gradual_section(cfg.gmp_scl);
  sections["delta_gmp"] = {{"delay_epochs", num(cfg.delta_gmp_delay_epochs)}};
  sections["oneshot"] = {{"scope", scope(cfg.oneshot.scope)},
                         {"finetune_epochs", num(cfg.oneshot.finetune_epochs)},
                         {"finetune_lr", num(cfg.oneshot.finetune_lr)},
                         {"finetune_encoder", flag(cfg.oneshot.finetune_encoder)}};
  sections["probe"] = {{"k", num(cfg.probe_k)}};

  pt::ptree tree;
  try {
    std::istringstream in{std::string(source)};
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config syntax error: " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  for (const auto& [section_name, section] : tree) {
    if (!section.data().empty()) {
      throw ConfigError("key '" + section_name + "' appears outside of any section");
    }
    auto sec = sections.find(section_name);
    if (sec == sections.end()) {
      throw ConfigError("unknown section [" + section_name + "]");
    }
    for (const auto& [key, value] : section) {
      auto setter = sec->second.find(key);
      if (setter == sec->second.end()) {
        throw ConfigError("unknown key '" + key + "' in section [" + section_name + "]");
      }
      setter->second(section_name + "." + key, value.data());
    }
  }

  if (!grid_text.empty()) {
    cfg.sparsity_grid.clear();
    for (const auto& item : split_list(grid_text)) {
      cfg.sparsity_grid.push_back(parse_value<double>("experiment.sparsity_grid", item));
    }
    std::sort(cfg.sparsity_grid.begin(), cfg.sparsity_grid.end());
    cfg.sparsity_grid.erase(std::unique(cfg.sparsity_grid.begin(), cfg.sparsity_grid.end()),
                            cfg.sparsity_grid.end());
  }
  try {
    if (!methods_text.empty()) {
      cfg.methods.clear();
      for (const auto& item : split_list(methods_text)) {
        cfg.methods.push_back(parse_method(item));
      }
    }
    if (!pruning_text.empty()) {
      cfg.pruning.clear();
      for (const auto& item : split_list(pruning_text)) {
        const auto p = parse_pruning(item);
        if (p == PruningMethod::none) {
          throw ConfigError("experiment.pruning: 'none' is implied by the dense baseline");
        }
        cfg.pruning.push_back(p);
      }
    }
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  auto resolve = [&base_dir](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (!output_dir.empty()) {
    cfg.output_dir = resolve(output_dir);
  }
  if (!train_csv.empty()) {
    cfg.dataset.train_csv = resolve(train_csv);
  }
  if (!test_csv.empty()) {
    cfg.dataset.test_csv = resolve(test_csv);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open config '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

DataSplits make_datasets(const DatasetSpec& spec) {
  using datagen::Split;
  DataSplits out;
  try {
    if (spec.kind == "blobs") {
      out.train = datagen::make_blobs(spec.classes, spec.per_class_train, spec.dim, spec.separation,
                                      spec.train_seed, Split::train);
      out.test = datagen::make_blobs(spec.classes, spec.per_class_test, spec.dim, spec.separation, spec.test_seed,
                                     Split::test);
    } else if (spec.kind == "rings") {
      out.train = datagen::make_rings(spec.classes, spec.per_class_train, spec.noise, spec.train_seed, Split::train);
      out.test = datagen::make_rings(spec.classes, spec.per_class_test, spec.noise, spec.test_seed, Split::test);
    } else if (spec.kind == "mixture") {
      out.train = datagen::make_mixture(spec.ring_classes, spec.blob_classes, spec.per_class_train, spec.dim,
                                        spec.separation, spec.noise, spec.train_seed, Split::train);
      out.test = datagen::make_mixture(spec.ring_classes, spec.blob_classes, spec.per_class_test, spec.dim,
                                       spec.separation, spec.noise, spec.test_seed, Split::test);
    } else {
      out.train = datagen::load_csv(spec.train_csv, Split::train);
      out.test = datagen::load_csv(spec.test_csv, Split::test);
      out.test.class_count = out.train.class_count = std::max(out.train.class_count, out.test.class_count);
      if (out.train.dim() != out.test.dim()) {
        throw ConfigError("train and test CSV files have different feature counts");
      }
    }
    datagen::validate(out.train);
    datagen::validate(out.test);
  } catch (const ParameterError& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  return out;
}

std::string config_hash(std::string_view text) {
  return fmt::format("{:016x}", fnv1a(text));
}

}  // namespace prunelab::runner
