// SPDX-License-Identifier: Apache-2.0
#include <random>

#include <benchmark/benchmark.h>

#include "prunelab/datagen.hpp"
#include "prunelab/diagnostics.hpp"
#include "prunelab/model.hpp"
#include "prunelab/network.hpp"
#include "prunelab/pruning.hpp"
#include "prunelab/training.hpp"

using namespace prunelab;

namespace {

ModelBundle desk_bundle(std::size_t hidden) {
  return make_bundle(ArchitectureSpec{4, hidden, 2, 16, 4}, Method::sup, 1);
}

Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Tensor t({rows, cols});
  for (float& v : t.data()) {
    v = g(rng);
  }
  return t;
}

void BM_Forward(benchmark::State& state) {
  const auto b = desk_bundle(static_cast<std::size_t>(state.range(0)));
  const Tensor x = random_batch(64, 4, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(b.encoder, x));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128)->Arg(512);

void BM_ForwardBackward(benchmark::State& state) {
  const auto b = desk_bundle(static_cast<std::size_t>(state.range(0)));
  const Tensor x = random_batch(64, 4, 3);
  std::vector<std::uint32_t> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint32_t>(i % 4);
  }
  for (auto _ : state) {
    const auto enc = forward(b.encoder, x);
    const auto head = forward(b.classifier_head, enc.output());
    const auto lg = training::cross_entropy_loss(head.output(), labels);
    const auto hb = backward(b.classifier_head, head, lg.grad);
    benchmark::DoNotOptimize(backward(b.encoder, enc, hb.input_grad));
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBackward)->Arg(32)->Arg(128)->Arg(512);

void BM_SupCon(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Tensor z = random_batch(n, 8, 4);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (float v : z.row(r)) {
      s += static_cast<double>(v) * v;
    }
    for (float& v : z.row(r)) {
      v = static_cast<float>(v / std::sqrt(s));
    }
  }
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint32_t>((i / 2) % 4);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(training::supcon_loss(z, labels, 0.5));
  }
}
BENCHMARK(BM_SupCon)->Arg(64)->Arg(256);

void BM_MagnitudeMask(benchmark::State& state) {
  const auto b = desk_bundle(static_cast<std::size_t>(state.range(0)));
  const auto scope = state.range(1) ? pruning::Scope::global : pruning::Scope::per_layer;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pruning::magnitude_mask(b, 0.9, scope));
  }
}
BENCHMARK(BM_MagnitudeMask)->Args({32, 0})->Args({32, 1})->Args({512, 0})->Args({512, 1});

void BM_QScore(benchmark::State& state) {
  const Tensor h = random_batch(1, static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::qscore(h.row(0)));
  }
}
BENCHMARK(BM_QScore)->Arg(16)->Arg(128);

void BM_PdScore(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto make = [](std::size_t rows, std::uint64_t seed) {
    diagnostics::ProbeSet p;
    for (std::size_t d : {32u, 32u, 16u, 4u}) {
      p.probes.push_back(random_batch(rows, d, seed + d));
    }
    for (std::size_t i = 0; i < rows; ++i) {
      p.labels.push_back(static_cast<std::uint32_t>(i % 4));
      p.sample_ids.push_back(i);
    }
    return p;
  };
  const auto train = make(n, 10);
  const auto query = make(n / 2, 20);
  for (auto _ : state) {
    benchmark::DoNotOptimize(diagnostics::pd_score(train, query, 5));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(query.size()));
}
BENCHMARK(BM_PdScore)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
