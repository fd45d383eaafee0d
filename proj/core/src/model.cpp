// SPDX-License-Identifier: Apache-2.0
#include "prunelab/model.hpp"

#include "prunelab/errors.hpp"

namespace prunelab {

std::string_view to_string(Method m) {
  return m == Method::sup ? "sup" : "scl";
}

std::string_view to_string(PruningMethod p) {
  switch (p) {
    case PruningMethod::none:
      return "none";
    case PruningMethod::gmp:
      return "gmp";
    case PruningMethod::delta_gmp:
      return "delta_gmp";
    case PruningMethod::one_shot:
      return "oneshot";
  }
  return "none";
}

Method parse_method(std::string_view text) {
  if (text == "sup") {
    return Method::sup;
  }
  if (text == "scl") {
    return Method::scl;
  }
  throw ParameterError("unknown training method '" + std::string(text) + "'");
}

PruningMethod parse_pruning(std::string_view text) {
  if (text == "none") {
    return PruningMethod::none;
  }
  if (text == "gmp") {
    return PruningMethod::gmp;
  }
  if (text == "delta_gmp") {
    return PruningMethod::delta_gmp;
  }
  if (text == "oneshot") {
    return PruningMethod::one_shot;
  }
  throw ParameterError("unknown pruning method '" + std::string(text) + "'");
}

std::vector<WeightEntry*> ModelBundle::prunable() {
  std::vector<WeightEntry*> out;
  for (Network* net : {&encoder, &classifier_head}) {
    for (auto& e : net->weights()) {
      if (e.prunable) {
        out.push_back(&e);
      }
    }
  }
  return out;
}

std::vector<const WeightEntry*> ModelBundle::prunable() const {
  std::vector<const WeightEntry*> out;
  for (const Network* net : {&encoder, &classifier_head}) {
    for (const auto& e : net->weights()) {
      if (e.prunable) {
        out.push_back(&e);
      }
    }
  }
  return out;
}

double ModelBundle::achieved_sparsity() const {
  std::size_t zeros = 0;
  std::size_t total = 0;
  for (const auto* e : prunable()) {
    zeros += e->zero_count();
    total += e->value.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
}

double ModelBundle::mask_sparsity() const {
  std::size_t masked = 0;
  std::size_t total = 0;
  for (const auto* e : prunable()) {
    total += e->value.size();
    if (e->has_mask()) {
      for (auto m : e->mask) {
        masked += (m == 0);
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(masked) / static_cast<double>(total);
}

namespace {

bool store_bit_equal(const WeightStore& a, const WeightStore& b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || a[i].prunable != b[i].prunable || a[i].mask != b[i].mask ||
        !a[i].value.bit_equal(b[i].value)) {
      return false;
    }
  }
  return true;
}

bool net_bit_equal(const Network& a, const Network& b) {
  return a.name() == b.name() && a.layers() == b.layers() && store_bit_equal(a.weights(), b.weights());
}

}  // namespace

bool ModelBundle::bit_equal(const ModelBundle& other) const {
  if (projection_head.has_value() != other.projection_head.has_value()) {
    return false;
  }
  if (projection_head && !net_bit_equal(*projection_head, *other.projection_head)) {
    return false;
  }
  return provenance == other.provenance && net_bit_equal(encoder, other.encoder) &&
         net_bit_equal(classifier_head, other.classifier_head);
}

std::vector<LayerSpec> encoder_layers(const ArchitectureSpec& arch) {
  if (arch.input_dim == 0 || arch.representation_dim == 0 || (arch.hidden_layers > 0 && arch.hidden_dim == 0)) {
    throw ParameterError("architecture dimensions must be positive");
  }
  std::vector<LayerSpec> layers;
  std::size_t width = arch.input_dim;
  for (std::size_t i = 0; i < arch.hidden_layers; ++i) {
    layers.push_back(LayerSpec::affine(width, arch.hidden_dim));
    layers.push_back(LayerSpec::relu());
    width = arch.hidden_dim;
  }
  layers.push_back(LayerSpec::affine(width, arch.representation_dim));
  layers.push_back(LayerSpec::relu());
  return layers;
}

std::vector<LayerSpec> classifier_layers(const ArchitectureSpec& arch) {
  if (arch.class_count < 2) {
    throw ParameterError("classifier needs at least two classes");
  }
  return {LayerSpec::affine(arch.representation_dim, arch.class_count)};
}

std::vector<LayerSpec> projection_layers(std::size_t representation_dim) {
  const std::size_t p = std::max<std::size_t>(1, representation_dim / 2);
  return {LayerSpec::affine(representation_dim, representation_dim), LayerSpec::relu(),
          LayerSpec::affine(representation_dim, p), LayerSpec::l2norm()};
}

ModelBundle make_bundle(const ArchitectureSpec& arch, Method method, std::uint64_t seed) {
  ModelBundle b{Network("encoder", encoder_layers(arch)), std::nullopt,
                Network("classifier", classifier_layers(arch)), Provenance{method, seed, 0.0, PruningMethod::none}};
  b.encoder.init_weights(seed);
  b.classifier_head.init_weights(seed);
  return b;
}

Tensor encode(const ModelBundle& bundle, const Tensor& x) {
  return forward(bundle.encoder, x).output();
}

Tensor logits(const ModelBundle& bundle, const Tensor& x) {
  return forward(bundle.classifier_head, encode(bundle, x)).output();
}

std::vector<std::uint32_t> predict(const ModelBundle& bundle, const Tensor& x) {
  const Tensor z = logits(bundle, x);
  std::vector<std::uint32_t> out(z.dim(0));
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    auto row = z.row(r);
    std::uint32_t best = 0;
    for (std::uint32_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) {
        best = c;
      }
    }
    out[r] = best;
  }
  return out;
}

double accuracy(const std::vector<std::uint32_t>& predicted, const std::vector<std::uint32_t>& labels) {
  if (predicted.size() != labels.size() || labels.empty()) {
    throw ShapeError("accuracy needs equally sized, nonempty prediction and label lists");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += predicted[i] == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<Tensor> probe_activations(const ModelBundle& bundle, const Tensor& x) {
  Activations enc = forward(bundle.encoder, x);
  std::vector<Tensor> probes;
  const auto& layers = bundle.encoder.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool block_end = layers[i].kind != LayerKind::affine &&
                           (i + 1 == layers.size() || layers[i + 1].kind == LayerKind::affine);
    if (block_end) {
      probes.push_back(enc.outputs[i]);
    }
  }
  probes.push_back(forward(bundle.classifier_head, enc.output()).output());
  return probes;
}

}  // namespace prunelab
