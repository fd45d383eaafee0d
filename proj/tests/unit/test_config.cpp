// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "prunelab/config.hpp"
#include "prunelab/errors.hpp"
#include "tiny_config.hpp"

using namespace prunelab;
using namespace prunelab::runner;

namespace {

const std::filesystem::path kDesk = std::filesystem::path(PRUNELAB_SOURCE_DIR) / "configs" / "desk.ini";

}  // namespace

TEST(Config, DeskConfigParses) {
  const auto cfg = load_config(kDesk);
  EXPECT_EQ(cfg.name, "desk");
  EXPECT_EQ(cfg.ensemble_size, 5u);
  EXPECT_EQ(cfg.sparsity_grid, (std::vector<double>{0.0, 0.5, 0.9}));
  EXPECT_EQ(cfg.methods, (std::vector<Method>{Method::sup, Method::scl}));
  EXPECT_EQ(cfg.pruning.size(), 3u);
  EXPECT_EQ(cfg.dataset.kind, "mixture");
  EXPECT_EQ(cfg.scl.temperature, 0.5);
  EXPECT_TRUE(cfg.scl.cosine_annealing);
  EXPECT_EQ(cfg.gmp_scl.schedule.frequency, 14);
  EXPECT_EQ(cfg.oneshot.scope, pruning::Scope::global);
  EXPECT_EQ(cfg.probe_k, 5u);
  EXPECT_EQ(cfg.output_dir.filename(), "desk");
  EXPECT_TRUE(cfg.output_dir.is_absolute());
}

TEST(Config, HashIsOverExactBytes) {
  const auto text = tiny::config_text();
  EXPECT_EQ(config_hash(text), config_hash(text));
  EXPECT_NE(config_hash(text), config_hash(text + " "));
  EXPECT_EQ(config_hash(text).size(), 16u);
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");  // FNV-1a offset basis
}

TEST(Config, UnknownKeyOrSectionFails) {
  EXPECT_THROW(parse_config(tiny::config_text() + "bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config(tiny::config_text() + "[nope]\nk = 1\n"), ConfigError);
}

TEST(Config, GridNeedsDenseBaseline) {
  EXPECT_THROW(parse_config(tiny::config_text("0.5, 0.9")), ConfigError);
  EXPECT_THROW(parse_config(tiny::config_text("0, 1.0")), ConfigError);
  EXPECT_EQ(parse_config(tiny::config_text("0.9, 0, 0.5, 0.5")).sparsity_grid,
            (std::vector<double>{0.0, 0.5, 0.9}));
}

TEST(Config, EnsembleMustBePositive) {
  EXPECT_THROW(parse_config(tiny::config_text("0", 0)), ConfigError);
}

TEST(Config, MalformedValuesFail) {
  EXPECT_THROW(parse_config("[experiment]\nensemble_size = many\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nmethods = sup, magic\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\npruning = none\n"), ConfigError);
  EXPECT_THROW(parse_config("[oneshot]\nfinetune_encoder = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment\n"), ConfigError);
}

TEST(Config, CsvDatasetNeedsFiles) {
  EXPECT_THROW(parse_config("[dataset]\nkind = csv\n"), ConfigError);
  EXPECT_THROW(load_config("/definitely/not/here.ini"), ConfigError);
}
