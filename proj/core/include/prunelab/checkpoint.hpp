// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "prunelab/model.hpp"

namespace prunelab {

/// Checkpoint layout, little-endian:
///   "PRNK" | version u16 | tensor count u32 | per tensor:
///     name length u16, UTF-8 name, rank u8, extents u32 each, f32 payload,
///     mask-present u8 [, mask bits packed LSB-first, ceil(n / 8) bytes]
///   | CRC-32 (zlib polynomial) of every byte after the magic.
///
/// Provenance travels as the first tensor, a single zero named
/// "@provenance method=<m> pruning=<p> sparsity=<s> seed=<n>". Encoder and
/// classifier tensors follow under their store names; the projection head
/// is never written.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelBundle& bundle);

/// Throws CorruptCheckpointError on a bad magic, version, truncation,
/// checksum mismatch or a tensor set that does not form a valid bundle.
ModelBundle decode_checkpoint(std::span<const std::uint8_t> bytes);

void checkpoint_write(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle checkpoint_read(const std::filesystem::path& path);

}  // namespace prunelab
