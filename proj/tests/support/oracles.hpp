// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used as test oracles. Nothing here
// calls into the code under test except for plain data accessors.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "prunelab/diagnostics.hpp"
#include "prunelab/network.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const prunelab::Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t r = 0; r < t.dim(0); ++r) {
    for (std::size_t c = 0; c < t.dim(1); ++c) {
      m[r][c] = t.at(r, c);
    }
  }
  return m;
}

/// Double-precision forward pass over a flat parameter vector laid out in
/// store order (weight [out,in] row-major, then bias, per affine layer).
/// Masked weights count as zero. Returns the final activations and records
/// the smallest |pre-activation| and the smallest norm entering an l2norm,
/// so callers can steer clear of ReLU kinks and of the normaliser's
/// high-curvature region near the origin.
struct DoubleNet {
  std::vector<prunelab::LayerSpec> layers;
  std::vector<std::vector<std::uint8_t>> masks;  // per affine layer, may be empty

  Mat run(const std::vector<double>& params, Mat x, double* min_abs_preact = nullptr,
          double* min_norm = nullptr) const {
    std::size_t off = 0;
    std::size_t affine = 0;
    for (const auto& l : layers) {
      if (l.kind == prunelab::LayerKind::affine) {
        Mat y(x.size(), std::vector<double>(l.out_dim));
        const auto& mask = masks.size() > affine ? masks[affine] : std::vector<std::uint8_t>{};
        for (std::size_t r = 0; r < x.size(); ++r) {
          for (std::size_t o = 0; o < l.out_dim; ++o) {
            double acc = params[off + l.out_dim * l.in_dim + o];
            for (std::size_t i = 0; i < l.in_dim; ++i) {
              const std::size_t k = o * l.in_dim + i;
              if (mask.empty() || mask[k]) {
                acc += params[off + k] * x[r][i];
              }
            }
            y[r][o] = acc;
          }
        }
        off += l.out_dim * l.in_dim + l.out_dim;
        ++affine;
        x = std::move(y);
      } else if (l.kind == prunelab::LayerKind::relu) {
        for (auto& row : x) {
          for (auto& v : row) {
            if (min_abs_preact) {
              *min_abs_preact = std::min(*min_abs_preact, std::abs(v));
            }
            v = std::max(v, 0.0);
          }
        }
      } else {
        for (auto& row : x) {
          double n = 0.0;
          for (double v : row) {
            n += v * v;
          }
          n = std::sqrt(n);
          if (min_norm) {
            *min_norm = std::min(*min_norm, n);
          }
          for (auto& v : row) {
            v /= n;
          }
        }
      }
    }
    return x;
  }
};

inline std::vector<double> flatten(const prunelab::Network& net) {
  std::vector<double> p;
  for (const auto& e : net.weights()) {
    for (float v : e.value.data()) {
      p.push_back(v);
    }
  }
  return p;
}

/// Mean cross-entropy, computed with log-sum-exp in double.
inline double cross_entropy(const Mat& logits, const std::vector<std::uint32_t>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.size(); ++r) {
    const double mx = *std::max_element(logits[r].begin(), logits[r].end());
    double s = 0.0;
    for (double v : logits[r]) {
      s += std::exp(v - mx);
    }
    total += -(logits[r][labels[r]] - mx - std::log(s));
  }
  return total / static_cast<double>(logits.size());
}

/// Supervised contrastive loss summed over anchors, by direct summation.
inline double supcon(const Mat& z, const std::vector<std::uint32_t>& labels, double tau) {
  const std::size_t n = z.size();
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t k = 0; k < z[a].size(); ++k) {
      s += z[a][k] * z[b][k];
    }
    return s;
  };
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      if (a != i) {
        denom += std::exp(dot(i, a) / tau);
      }
    }
    double sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) {
        sum += dot(i, p) / tau - std::log(denom);
        ++positives;
      }
    }
    loss += -sum / static_cast<double>(positives);
  }
  return loss;
}

/// Central finite difference of f at params, one coordinate at a time.
template <class F>
std::vector<double> finite_difference(F&& f, std::vector<double> params, double h) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = f(params);
    params[i] = keep - h;
    const double down = f(params);
    params[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// |a - b| relative to the larger magnitude, with an absolute floor for
/// near-zero components.
inline double rel_error(double a, double b, double floor = 1e-3) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Majority vote by explicit histogram; ties to the lowest class.
inline std::uint32_t majority(const std::vector<std::uint32_t>& votes) {
  std::uint32_t top = 0;
  for (auto v : votes) {
    top = std::max(top, v);
  }
  std::vector<std::size_t> hist(top + 1, 0);
  for (auto v : votes) {
    ++hist[v];
  }
  std::uint32_t best = 0;
  for (std::uint32_t c = 0; c <= top; ++c) {
    if (hist[c] > hist[best]) {
      best = c;
    }
  }
  return best;
}

/// PIE flags per sample id by brute-force majority vote over both cohorts.
inline std::map<std::uint64_t, bool> pies(const prunelab::diagnostics::PredictionLog& dense,
                                          const prunelab::diagnostics::PredictionLog& pruned) {
  std::map<std::uint64_t, std::vector<std::uint32_t>> d, p;
  for (const auto& r : dense) {
    d[r.sample_id].push_back(r.predicted_class);
  }
  for (const auto& r : pruned) {
    p[r.sample_id].push_back(r.predicted_class);
  }
  std::map<std::uint64_t, bool> out;
  for (const auto& [id, votes] : d) {
    out[id] = majority(votes) != majority(p.at(id));
  }
  return out;
}

/// kNN by an exhaustive distance table with a stable sort on distance.
inline std::uint32_t knn(const Mat& train, const std::vector<std::uint32_t>& labels, const std::vector<double>& q,
                         std::size_t k) {
  std::vector<double> dist(train.size());
  for (std::size_t j = 0; j < train.size(); ++j) {
    double s = 0.0;
    for (std::size_t d = 0; d < q.size(); ++d) {
      s += (train[j][d] - q[d]) * (train[j][d] - q[d]);
    }
    dist[j] = s;
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  std::vector<std::uint32_t> votes;
  for (std::size_t j = 0; j < std::min(k, train.size()); ++j) {
    votes.push_back(labels[order[j]]);
  }
  return majority(votes);
}

/// Prediction depth: evaluate every probe, then scan for the first index
/// from which the remaining probes are all correct.
inline std::vector<std::uint32_t> pd_depths(const prunelab::diagnostics::ProbeSet& train,
                                            const prunelab::diagnostics::ProbeSet& query, std::size_t k) {
  const std::size_t L = train.probes.size();
  std::vector<std::uint32_t> out;
  for (std::size_t q = 0; q < query.size(); ++q) {
    std::vector<bool> correct(L);
    for (std::size_t d = 0; d < L; ++d) {
      const Mat tr = to_mat(train.probes[d]);
      const auto qrow = query.probes[d].row(q);
      const std::vector<double> qv(qrow.begin(), qrow.end());
      correct[d] = knn(tr, train.labels, qv, k) == query.labels[q];
    }
    std::uint32_t depth = static_cast<std::uint32_t>(L + 1);
    for (std::size_t d = 0; d < L; ++d) {
      if (std::all_of(correct.begin() + static_cast<std::ptrdiff_t>(d), correct.end(), [](bool b) { return b; })) {
        depth = static_cast<std::uint32_t>(d + 1);
        break;
      }
    }
    out.push_back(depth);
  }
  return out;
}

/// Softmax regression on raw features (full-batch gradient descent), scored
/// on `eval`.
inline double linear_probe_accuracy(const prunelab::Tensor& x, const std::vector<std::uint32_t>& y,
                                    std::uint32_t classes, const prunelab::Tensor& ex,
                                    const std::vector<std::uint32_t>& ey, int iterations = 2000) {
  const std::size_t n = y.size(), dim = x.dim(1), c = classes;
  std::vector<double> w(c * (dim + 1), 0.0);
  auto scores = [&](const prunelab::Tensor& t, std::size_t i) {
    std::vector<double> z(c);
    for (std::size_t k = 0; k < c; ++k) {
      z[k] = w[k * (dim + 1) + dim];
      for (std::size_t j = 0; j < dim; ++j) {
        z[k] += w[k * (dim + 1) + j] * t.at(i, j);
      }
    }
    return z;
  };
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> g(w.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto z = scores(x, i);
      const double mx = *std::max_element(z.begin(), z.end());
      double s = 0.0;
      for (auto& v : z) {
        v = std::exp(v - mx);
        s += v;
      }
      for (std::size_t k = 0; k < c; ++k) {
        const double p = z[k] / s - (k == y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < dim; ++j) {
          g[k * (dim + 1) + j] += p * x.at(i, j);
        }
        g[k * (dim + 1) + dim] += p;
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] -= 0.5 * g[k] / static_cast<double>(n);
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ey.size(); ++i) {
    const auto z = scores(ex, i);
    correct += static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin()) == ey[i];
  }
  return static_cast<double>(correct) / static_cast<double>(ey.size());
}

}  // namespace oracle
