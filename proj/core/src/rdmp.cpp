// SPDX-License-Identifier: Apache-2.0
#include "prunelab/rdmp.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "prunelab/errors.hpp"

namespace prunelab::diagnostics {

void write_rdmp(const ProbeSet& set, const std::filesystem::path& path) {
  const std::size_t n = set.size();
  if (!set.sample_ids.empty() && set.sample_ids.size() != n) {
    throw ShapeError("representation dump: sample id count differs from label count");
  }
  for (const auto& p : set.probes) {
    if (p.rank() != 2 || p.dim(0) != n) {
      throw ShapeError("representation dump: probe tensor does not have one row per sample");
    }
  }
  detail::ByteWriter w;
  w.raw("RDMP");
  w.u16(kRdmpVersion);
  w.u32(static_cast<std::uint32_t>(set.probes.size()));
  w.u32(static_cast<std::uint32_t>(n));
  for (const auto& p : set.probes) {
    w.u32(static_cast<std::uint32_t>(p.dim(1)));
  }
  for (std::size_t s = 0; s < n; ++s) {
    w.u64(set.sample_ids.empty() ? s : set.sample_ids[s]);
    w.u32(set.labels[s]);
    for (const auto& p : set.probes) {
      for (float v : p.row(s)) {
        w.f32(v);
      }
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write representation dump '" + path.string() + "'");
  }
  out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
}

ProbeSet read_rdmp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError("cannot open representation dump '" + path.string() + "'", 0);
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string name = path.string();
  detail::ByteReader r(std::span<const std::uint8_t>(bytes),
                       [&name](const char* what) -> void { throw ParseError(name + ": " + what, 0); });
  if (r.str(4) != "RDMP") {
    throw ParseError(name + ": not a representation dump (bad magic)", 0);
  }
  if (const auto v = r.u16(); v != kRdmpVersion) {
    throw ParseError(name + ": unsupported dump version " + std::to_string(v), 0);
  }
  const std::uint32_t probes = r.u32();
  const std::uint32_t samples = r.u32();
  std::vector<std::size_t> dims(probes);
  std::size_t row_floats = 0;
  for (auto& d : dims) {
    d = r.u32();
    if (d == 0) {
      throw ParseError(name + ": zero probe width", 0);
    }
    row_floats += d;
  }
  if (r.remaining() != static_cast<std::size_t>(samples) * (12 + 4 * row_floats)) {
    throw ParseError(name + ": payload size does not match the header", 0);
  }
  ProbeSet set;
  for (auto d : dims) {
    set.probes.emplace_back(std::vector<std::size_t>{samples, d});
  }
  set.labels.resize(samples);
  set.sample_ids.resize(samples);
  for (std::uint32_t s = 0; s < samples; ++s) {
    set.sample_ids[s] = r.u64();
    set.labels[s] = r.u32();
    for (auto& p : set.probes) {
      for (float& v : p.row(s)) {
        v = r.f32();
      }
    }
  }
  return set;
}

}  // namespace prunelab::diagnostics
