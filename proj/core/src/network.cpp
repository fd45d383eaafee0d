// SPDX-License-Identifier: Apache-2.0
#include "prunelab/network.hpp"

#include <cmath>
#include <random>

#include "prunelab/errors.hpp"
#include "prunelab/random.hpp"

namespace prunelab {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::affine:
      return "affine";
    case LayerKind::relu:
      return "relu";
    case LayerKind::l2norm:
      return "l2norm";
  }
  return "unknown";
}

std::size_t WeightEntry::zero_count() const noexcept {
  std::size_t n = 0;
  for (float v : value.data()) {
    n += (v == 0.0f);
  }
  return n;
}

std::size_t WeightStore::add(std::string name, Tensor value, bool prunable) {
  entries_.push_back(WeightEntry{std::move(name), std::move(value), {}, prunable});
  return entries_.size() - 1;
}

const WeightEntry* WeightStore::find(std::string_view name) const noexcept {
  for (const auto& e : entries_) {
    if (e.name == name) {
      return &e;
    }
  }
  return nullptr;
}

void WeightStore::apply_masks() {
  for (auto& e : entries_) {
    if (!e.has_mask()) {
      continue;
    }
    auto w = e.value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (e.mask[i] == 0) {
        w[i] = 0.0f;
      }
    }
  }
}

Network::Network(std::string name, std::vector<LayerSpec> layers)
    : name_(std::move(name)), layers_(std::move(layers)) {
  validate_layers();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kind != LayerKind::affine) {
      continue;
    }
    const std::string prefix = name_ + "." + std::to_string(i);
    slots_[i] = weights_.add(prefix + ".weight", Tensor({l.out_dim, l.in_dim}), true);
    weights_.add(prefix + ".bias", Tensor({l.out_dim}), false);
  }
}

Network::Network(std::string name, std::vector<LayerSpec> layers, WeightStore weights)
    : name_(std::move(name)), layers_(std::move(layers)), weights_(std::move(weights)) {
  validate_layers();
  std::size_t next = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kind != LayerKind::affine) {
      continue;
    }
    if (next + 1 >= weights_.size()) {
      throw ShapeError("weight store of '" + name_ + "' has too few tensors for its layers");
    }
    const auto& w = weights_[next];
    const auto& b = weights_[next + 1];
    if (w.value.dims() != std::vector<std::size_t>{l.out_dim, l.in_dim} ||
        b.value.dims() != std::vector<std::size_t>{l.out_dim}) {
      throw ShapeError("tensors '" + w.name + "'/'" + b.name + "' do not match layer " + std::to_string(i));
    }
    if (w.has_mask() && w.mask.size() != w.value.size()) {
      throw ShapeError("mask of '" + w.name + "' does not match its tensor");
    }
    slots_[i] = next;
    next += 2;
  }
  if (next != weights_.size()) {
    throw ShapeError("weight store of '" + name_ + "' has tensors not used by any layer");
  }
}

void Network::validate_layers() {
  if (layers_.empty()) {
    throw ShapeError("network '" + name_ + "' has no layers");
  }
  slots_.assign(layers_.size(), static_cast<std::size_t>(-1));
  widths_.assign(layers_.size(), 0);
  std::size_t width = 0;
  bool seen_affine = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.kind == LayerKind::affine) {
      if (l.in_dim == 0 || l.out_dim == 0) {
        throw ShapeError("affine layer " + std::to_string(i) + " needs positive dimensions");
      }
      if (!seen_affine) {
        in_dim_ = l.in_dim;
        seen_affine = true;
      } else if (l.in_dim != width) {
        throw ShapeError("layer " + std::to_string(i) + " expects width " + std::to_string(l.in_dim) +
                         " but receives " + std::to_string(width));
      }
      width = l.out_dim;
    } else if (!seen_affine) {
      throw ShapeError("network '" + name_ + "' must start with an affine layer");
    }
    widths_[i] = width;
  }
  out_dim_ = width;
}

void Network::init_weights(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, name_));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind != LayerKind::affine) {
      continue;
    }
    auto& w = weights_[slots_[i]];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(layers_[i].in_dim)));
    for (float& v : w.value.data()) {
      v = static_cast<float>(dist(rng));
    }
    auto& b = weights_[slots_[i] + 1];
    std::fill(b.value.data().begin(), b.value.data().end(), 0.0f);
  }
  weights_.apply_masks();
}

namespace {

float masked(const WeightEntry& w, std::size_t i) noexcept {
  return (w.has_mask() && w.mask[i] == 0) ? 0.0f : w.value[i];
}

Tensor affine_forward(const WeightEntry& w, const WeightEntry& b, const Tensor& x) {
  const std::size_t batch = x.dim(0);
  const std::size_t in = w.value.dim(1);
  const std::size_t out = w.value.dim(0);
  Tensor y({batch, out});
  for (std::size_t r = 0; r < batch; ++r) {
    auto xr = x.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b.value[o];
      const std::size_t base = o * in;
      for (std::size_t i = 0; i < in; ++i) {
        acc += static_cast<double>(masked(w, base + i)) * xr[i];
      }
      y.at(r, o) = static_cast<float>(acc);
    }
  }
  return y;
}

void check_finite(const Tensor& t, std::size_t layer, LayerKind kind) {
  if (!t.all_finite()) {
    throw NumericError("non-finite activation after layer " + std::to_string(layer) + " (" +
                       std::string(to_string(kind)) + ")");
  }
}

}  // namespace

Tensor l2_normalize_rows(const Tensor& x) {
  Tensor y(x.dims());
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    auto xr = x.row(r);
    double sq = 0.0;
    for (float v : xr) {
      sq += static_cast<double>(v) * v;
    }
    if (!(sq > 0.0)) {
      throw DegenerateInputError("cannot L2-normalize zero row " + std::to_string(r));
    }
    const double norm = std::sqrt(sq);
    auto yr = y.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) {
      yr[c] = static_cast<float>(xr[c] / norm);
    }
  }
  return y;
}

Tensor l2_normalize_rows_backward(const Tensor& x, const Tensor& y, const Tensor& grad_y) {
  Tensor dx(x.dims());
  for (std::size_t r = 0; r < x.dim(0); ++r) {
    auto xr = x.row(r);
    auto yr = y.row(r);
    auto gr = grad_y.row(r);
    double sq = 0.0;
    double dot = 0.0;
    for (std::size_t c = 0; c < xr.size(); ++c) {
      sq += static_cast<double>(xr[c]) * xr[c];
      dot += static_cast<double>(yr[c]) * gr[c];
    }
    const double norm = std::sqrt(sq);
    auto dr = dx.row(r);
    for (std::size_t c = 0; c < xr.size(); ++c) {
      dr[c] = static_cast<float>((gr[c] - yr[c] * dot) / norm);
    }
  }
  return dx;
}

Activations forward(const Network& net, const Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != net.in_dim()) {
    throw ShapeError("network '" + net.name() + "' expects [batch, " + std::to_string(net.in_dim()) + "], got " +
                     x.shape_string());
  }
  Activations acts;
  acts.input = x;
  acts.outputs.reserve(net.layers().size());
  const Tensor* current = &acts.input;
  const auto& store = net.weights();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& layer = net.layers()[i];
    Tensor y;
    switch (layer.kind) {
      case LayerKind::affine: {
        const std::size_t slot = net.weight_slot(i);
        y = affine_forward(store[slot], store[slot + 1], *current);
        break;
      }
      case LayerKind::relu: {
        y = *current;
        for (float& v : y.data()) {
          v = v > 0.0f ? v : 0.0f;
        }
        break;
      }
      case LayerKind::l2norm:
        y = l2_normalize_rows(*current);
        break;
    }
    check_finite(y, i, layer.kind);
    acts.outputs.push_back(std::move(y));
    current = &acts.outputs.back();
  }
  return acts;
}

BackwardResult backward(const Network& net, const Activations& acts, const Tensor& output_grad) {
  const auto& layers = net.layers();
  if (acts.outputs.size() != layers.size() || acts.input.rank() != 2 || acts.input.dim(1) != net.in_dim()) {
    throw ShapeError("activations do not belong to network '" + net.name() + "'");
  }
  const std::size_t batch = acts.input.dim(0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& o = acts.outputs[i];
    if (o.rank() != 2 || o.dim(0) != batch || o.dim(1) != net.width_after(i)) {
      throw ShapeError("stale activation at layer " + std::to_string(i) + " of '" + net.name() + "'");
    }
  }
  if (output_grad.dims() != acts.output().dims()) {
    throw ShapeError("output gradient " + output_grad.shape_string() + " does not match output " +
                     acts.output().shape_string());
  }

  const auto& store = net.weights();
  BackwardResult result;
  result.grads.reserve(store.size());
  for (const auto& e : store) {
    result.grads.emplace_back(e.value.dims());
  }

  Tensor grad = output_grad;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const Tensor& in = li == 0 ? acts.input : acts.outputs[li - 1];
    const Tensor& out = acts.outputs[li];
    switch (layer.kind) {
      case LayerKind::affine: {
        const std::size_t slot = net.weight_slot(li);
        const auto& w = store[slot];
        const std::size_t n_in = layer.in_dim;
        const std::size_t n_out = layer.out_dim;
        Tensor& gw = result.grads[slot];
        Tensor& gb = result.grads[slot + 1];
        for (std::size_t o = 0; o < n_out; ++o) {
          double bias_acc = 0.0;
          for (std::size_t r = 0; r < batch; ++r) {
            bias_acc += grad.at(r, o);
          }
          gb[o] = static_cast<float>(bias_acc);
          for (std::size_t i = 0; i < n_in; ++i) {
            const std::size_t flat = o * n_in + i;
            if (w.has_mask() && w.mask[flat] == 0) {
              gw[flat] = 0.0f;
              continue;
            }
            double acc = 0.0;
            for (std::size_t r = 0; r < batch; ++r) {
              acc += static_cast<double>(grad.at(r, o)) * in.at(r, i);
            }
            gw[flat] = static_cast<float>(acc);
          }
        }
        Tensor gx({batch, n_in});
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t i = 0; i < n_in; ++i) {
            double acc = 0.0;
            for (std::size_t o = 0; o < n_out; ++o) {
              acc += static_cast<double>(grad.at(r, o)) * masked(w, o * n_in + i);
            }
            gx.at(r, i) = static_cast<float>(acc);
          }
        }
        grad = std::move(gx);
        break;
      }
      case LayerKind::relu: {
        for (std::size_t k = 0; k < grad.size(); ++k) {
          if (!(out[k] > 0.0f)) {
            grad[k] = 0.0f;
          }
        }
        break;
      }
      case LayerKind::l2norm:
        grad = l2_normalize_rows_backward(in, out, grad);
        break;
    }
  }
  result.input_grad = std::move(grad);
  return result;
}

}  // namespace prunelab
