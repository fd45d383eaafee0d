// SPDX-License-Identifier: Apache-2.0
#include "prunelab/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include <zlib.h>

#include "binary_io.hpp"
#include "prunelab/errors.hpp"

namespace prunelab {

namespace {

constexpr std::string_view kProvenancePrefix = "@provenance ";

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::string provenance_name(const Provenance& p) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), p.sparsity);
  return std::string(kProvenancePrefix) + "method=" + std::string(to_string(p.method)) +
         " pruning=" + std::string(to_string(p.pruning)) + " sparsity=" + std::string(buf, res.ptr) +
         " seed=" + std::to_string(p.seed);
}

[[noreturn]] void corrupt(const std::string& what) {
  throw CorruptCheckpointError("corrupt checkpoint: " + what);
}

Provenance parse_provenance(std::string_view name) {
  name.remove_prefix(kProvenancePrefix.size());
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(name)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      corrupt("malformed provenance field '" + token + "'");
    }
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  Provenance p;
  try {
    p.method = parse_method(kv.at("method"));
    p.pruning = parse_pruning(kv.at("pruning"));
    const auto& s = kv.at("sparsity");
    if (std::from_chars(s.data(), s.data() + s.size(), p.sparsity).ec != std::errc()) {
      corrupt("bad sparsity in provenance");
    }
    const auto& seed = kv.at("seed");
    if (std::from_chars(seed.data(), seed.data() + seed.size(), p.seed).ec != std::errc()) {
      corrupt("bad seed in provenance");
    }
  } catch (const std::out_of_range&) {
    corrupt("provenance is missing a field");
  } catch (const ParameterError& e) {
    corrupt(e.what());
  }
  return p;
}

void write_entry(detail::ByteWriter& w, const WeightEntry& e) {
  if (e.name.size() > 0xffff) {
    throw ParameterError("tensor name too long for a checkpoint");
  }
  w.u16(static_cast<std::uint16_t>(e.name.size()));
  w.raw(e.name);
  w.u8(static_cast<std::uint8_t>(e.value.rank()));
  for (auto d : e.value.dims()) {
    w.u32(static_cast<std::uint32_t>(d));
  }
  for (float v : e.value.data()) {
    w.f32(v);
  }
  w.u8(e.has_mask() ? 1 : 0);
  if (e.has_mask()) {
    std::vector<std::uint8_t> packed((e.mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < e.mask.size(); ++i) {
      if (e.mask[i] != 0) {
        packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
      }
    }
    for (auto b : packed) {
      w.u8(b);
    }
  }
}

/// Rebuilds the layer list of a net from its affine weight shapes.
std::vector<LayerSpec> layers_from_store(const WeightStore& store, bool relu_after_last, const std::string& net) {
  std::vector<LayerSpec> layers;
  if (store.size() % 2 != 0) {
    corrupt("net '" + net + "' has an unpaired weight tensor");
  }
  const std::size_t affine_count = store.size() / 2;
  for (std::size_t k = 0; k < affine_count; ++k) {
    const auto& w = store[2 * k];
    if (w.value.rank() != 2) {
      corrupt("weight '" + w.name + "' is not a matrix");
    }
    const std::string expected = net + "." + std::to_string(layers.size());
    if (w.name != expected + ".weight" || store[2 * k + 1].name != expected + ".bias") {
      corrupt("unexpected tensor names near '" + w.name + "'");
    }
    layers.push_back(LayerSpec::affine(w.value.dim(1), w.value.dim(0)));
    if (relu_after_last || k + 1 < affine_count) {
      layers.push_back(LayerSpec::relu());
    }
  }
  return layers;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle& bundle) {
  detail::ByteWriter w;
  w.raw("PRNK");
  w.u16(kCheckpointVersion);
  const std::size_t count = 1 + bundle.encoder.weights().size() + bundle.classifier_head.weights().size();
  w.u32(static_cast<std::uint32_t>(count));
  WeightEntry prov{provenance_name(bundle.provenance), Tensor({1}), {}, false};
  write_entry(w, prov);
  for (const auto& e : bundle.encoder.weights()) {
    write_entry(w, e);
  }
  for (const auto& e : bundle.classifier_head.weights()) {
    write_entry(w, e);
  }
  const std::uint32_t crc = crc32_of(std::span<const std::uint8_t>(w.bytes()).subspan(4));
  w.u32(crc);
  return std::move(w.bytes());
}

ModelBundle decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 2 + 4 + 4) {
    corrupt("file too short");
  }
  if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "PRNK") {
    corrupt("bad magic");
  }
  const auto body = bytes.subspan(4, bytes.size() - 8);
  detail::ByteReader tail(bytes.subspan(bytes.size() - 4), [](const char* what) { corrupt(what); });
  if (tail.u32() != crc32_of(body)) {
    corrupt("checksum mismatch");
  }
  detail::ByteReader r(body, [](const char* what) { corrupt(what); });
  if (const auto v = r.u16(); v != kCheckpointVersion) {
    corrupt("unsupported version " + std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  std::optional<Provenance> provenance;
  WeightStore encoder;
  WeightStore classifier;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.str(r.u16());
    const std::uint8_t rank = r.u8();
    std::vector<std::size_t> dims(rank);
    std::size_t n = 1;
    for (auto& d : dims) {
      d = r.u32();
      if (d == 0) {
        corrupt("zero extent in tensor '" + name + "'");
      }
      n *= d;
    }
    if (n > r.remaining() / 4) {
      corrupt("tensor '" + name + "' runs past the end of the file");
    }
    std::vector<float> data(n);
    for (float& v : data) {
      v = r.f32();
    }
    std::vector<std::uint8_t> mask;
    if (const auto present = r.u8(); present == 1) {
      auto packed = r.take((n + 7) / 8);
      mask.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
      }
    } else if (present != 0) {
      corrupt("bad mask flag on tensor '" + name + "'");
    }

    if (name.starts_with(kProvenancePrefix)) {
      provenance = parse_provenance(name);
      continue;
    }
    const bool prunable = name.ends_with(".weight");
    Tensor value(std::move(dims), std::move(data));
    WeightStore* target = nullptr;
    if (name.starts_with("encoder.")) {
      target = &encoder;
    } else if (name.starts_with("classifier.")) {
      target = &classifier;
    } else {
      corrupt("unknown tensor '" + name + "'");
    }
    const std::size_t slot = target->add(std::move(name), std::move(value), prunable);
    (*target)[slot].mask = std::move(mask);
  }
  if (r.remaining() != 0) {
    corrupt("trailing bytes after the last tensor");
  }
  if (!provenance) {
    corrupt("missing provenance record");
  }
  try {
    auto enc_layers = layers_from_store(encoder, true, "encoder");
    auto cls_layers = layers_from_store(classifier, false, "classifier");
    return ModelBundle{Network("encoder", std::move(enc_layers), std::move(encoder)), std::nullopt,
                       Network("classifier", std::move(cls_layers), std::move(classifier)), *provenance};
  } catch (const ShapeError& e) {
    corrupt(e.what());
  }
}

void checkpoint_write(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(bundle);
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write checkpoint '" + path.string() + "'");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error("failed writing checkpoint '" + path.string() + "'");
  }
}

ModelBundle checkpoint_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorruptCheckpointError("cannot open checkpoint '" + path.string() + "'");
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace prunelab
