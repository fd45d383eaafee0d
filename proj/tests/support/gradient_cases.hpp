// SPDX-License-Identifier: Apache-2.0
// Seeded finite-difference cases for the two training losses.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "prunelab/network.hpp"
#include "prunelab/training.hpp"

namespace gradcheck {

struct Result {
  double max_rel_error = 0.0;
  std::size_t params = 0;
  bool masked_exact_zero = true;
};

namespace detail {

inline void randomize(prunelab::Network& net, std::mt19937_64& rng, bool with_mask) {
  std::normal_distribution<double> n(0.0, 0.6);
  std::bernoulli_distribution keep(0.7);
  for (auto& e : net.weights()) {
    for (float& v : e.value.data()) {
      v = static_cast<float>(n(rng));
    }
    if (with_mask && e.prunable) {
      e.mask.resize(e.value.size());
      for (auto& m : e.mask) {
        m = keep(rng) ? 1 : 0;
      }
      e.mask[0] = 1;
    }
  }
  net.weights().apply_masks();
}

inline oracle::DoubleNet mirror(const prunelab::Network& net) {
  oracle::DoubleNet d{net.layers(), {}};
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (net.layers()[i].kind == prunelab::LayerKind::affine) {
      d.masks.push_back(net.weights()[net.weight_slot(i)].mask);
    }
  }
  return d;
}

template <class Loss>
Result compare(const prunelab::Network& net, const prunelab::GradientSet& grads, const oracle::Mat& x,
               Loss&& loss) {
  const oracle::DoubleNet d = mirror(net);
  const auto params = oracle::flatten(net);
  const auto fd = oracle::finite_difference([&](const std::vector<double>& p) { return loss(d.run(p, x)); },
                                            params, 1e-3);
  Result r;
  std::size_t k = 0;
  for (std::size_t e = 0; e < grads.size(); ++e) {
    const auto& entry = net.weights()[e];
    for (std::size_t i = 0; i < grads[e].size(); ++i, ++k) {
      if (entry.has_mask() && entry.mask[i] == 0 && grads[e][i] != 0.0f) {
        r.masked_exact_zero = false;
      }
      r.max_rel_error = std::max(r.max_rel_error, oracle::rel_error(grads[e][i], fd[k]));
    }
  }
  r.params = k;
  return r;
}

/// Redraws until the case is one where a 1e-3 central difference is a
/// trustworthy oracle: no ReLU kink within reach of the step, every row
/// entering l2norm with norm at least 1, and the difference quotient
/// already converged (steps h and h/2 agree to 1e-5 relative). None of
/// these conditions look at the analytic gradient.
template <class Build, class Loss>
auto draw_smooth(std::uint64_t seed, Build&& build, Loss&& loss) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    auto c = build(seed * 7919 + attempt);
    const oracle::DoubleNet d = mirror(c.net);
    const auto params = oracle::flatten(c.net);
    const auto x = oracle::to_mat(c.x);
    double min_pre = 1e9;
    double min_norm = 1e9;
    d.run(params, x, &min_pre, &min_norm);
    if (min_pre <= 0.05 || min_norm < 1.0) {
      continue;
    }
    auto f = [&](const std::vector<double>& p) { return loss(c, d.run(p, x)); };
    const auto coarse = oracle::finite_difference(f, params, 1e-3);
    const auto fine = oracle::finite_difference(f, params, 5e-4);
    bool converged = true;
    for (std::size_t k = 0; k < coarse.size(); ++k) {
      converged = converged && oracle::rel_error(coarse[k], fine[k]) < 1e-5;
    }
    if (converged) {
      return c;
    }
  }
}

}  // namespace detail

struct Case {
  prunelab::Network net;
  prunelab::Tensor x;
  std::vector<std::uint32_t> labels;
};

/// Up to three affine layers, batch up to 8, random mask on odd seeds.
inline Result cross_entropy_case(std::uint64_t seed) {
  auto c = detail::draw_smooth(seed, [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    const std::size_t in = pick(2, 4), hidden = pick(3, 5), classes = pick(2, 4), batch = pick(2, 8);
    const std::size_t depth = pick(1, 3);
    std::vector<prunelab::LayerSpec> layers;
    std::size_t w = in;
    for (std::size_t l = 0; l + 1 < depth; ++l) {
      layers.push_back(prunelab::LayerSpec::affine(w, hidden));
      layers.push_back(prunelab::LayerSpec::relu());
      w = hidden;
    }
    layers.push_back(prunelab::LayerSpec::affine(w, classes));
    Case out{prunelab::Network("ce", layers), prunelab::Tensor({batch, in}), {}};
    detail::randomize(out.net, rng, seed % 2 == 1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (float& v : out.x.data()) {
      v = static_cast<float>(n(rng));
    }
    for (std::size_t b = 0; b < batch; ++b) {
      out.labels.push_back(static_cast<std::uint32_t>(pick(0, classes - 1)));
    }
    return out;
  }, [](const Case& k, const oracle::Mat& out) { return oracle::cross_entropy(out, k.labels); });
  const auto acts = prunelab::forward(c.net, c.x);
  const auto lg = prunelab::training::cross_entropy_loss(acts.output(), c.labels);
  const auto back = prunelab::backward(c.net, acts, lg.grad);
  return detail::compare(c.net, back.grads, oracle::to_mat(c.x),
                         [&](const oracle::Mat& out) { return oracle::cross_entropy(out, c.labels); });
}

/// affine -> relu -> affine -> l2norm feeding the contrastive loss, so the
/// row normalisation sits inside the checked gradient.
inline Result supcon_case(std::uint64_t seed, double tau = 0.5) {
  auto c = detail::draw_smooth(seed, [&](std::uint64_t s) {
    std::mt19937_64 rng(s);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    const std::size_t in = pick(2, 4), hidden = pick(3, 5), out_dim = pick(2, 4), pairs = pick(2, 4);
    std::vector<prunelab::LayerSpec> layers{prunelab::LayerSpec::affine(in, hidden), prunelab::LayerSpec::relu(),
                                            prunelab::LayerSpec::affine(hidden, out_dim),
                                            prunelab::LayerSpec::l2norm()};
    Case out{prunelab::Network("sc", layers), prunelab::Tensor({2 * pairs, in}), {}};
    detail::randomize(out.net, rng, seed % 2 == 1);
    std::normal_distribution<double> n(0.0, 1.0);
    for (float& v : out.x.data()) {
      v = static_cast<float>(n(rng));
    }
    for (std::size_t p = 0; p < pairs; ++p) {
      const auto cls = static_cast<std::uint32_t>(p % 2);
      out.labels.push_back(cls);
      out.labels.push_back(cls);
    }
    return out;
  }, [tau](const Case& k, const oracle::Mat& out) { return oracle::supcon(out, k.labels, tau); });
  const auto acts = prunelab::forward(c.net, c.x);
  const auto lg = prunelab::training::supcon_loss(acts.output(), c.labels, tau);
  const auto back = prunelab::backward(c.net, acts, lg.grad);
  return detail::compare(c.net, back.grads, oracle::to_mat(c.x),
                         [&](const oracle::Mat& out) { return oracle::supcon(out, c.labels, tau); });
}

}  // namespace gradcheck
