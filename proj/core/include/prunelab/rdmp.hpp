// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "prunelab/diagnostics.hpp"

namespace prunelab::diagnostics {

/// Representation dump, little-endian:
///   "RDMP" | version u16 | probe_count u32 | sample_count u32 |
///   dim u32 per probe | per sample: sample_id u64, true_label u32,
///   the sample's f32 vector at each probe, concatenated in probe order.
inline constexpr std::uint16_t kRdmpVersion = 1;

void write_rdmp(const ProbeSet& set, const std::filesystem::path& path);

/// Throws ParseError on a bad magic, version or a truncated file.
ProbeSet read_rdmp(const std::filesystem::path& path);

}  // namespace prunelab::diagnostics
