#pragma once

// Binary cache of precomputed hop features (`<image_id>.mewp`).
//
// Layout, all little-endian:
//   offset  size  field
//   0       4     magic "MEWP"
//   4       4     u32 format version (1)
//   8       8     u64 n (nodes)
//   16      8     u64 F (feature dim)
//   24      4     u32 K (hops)
//   28      8     u64 sampling seed
//   36      4     u32 flags (bit 0 stochastic, bit 1 resample each epoch)
//   40      ...   Voronoi hops 0..K, then cell-type hops 0..K; each an
//                 n x F row-major block of f32
//
// File size is exactly 40 + 2 (K + 1) n F 4 bytes.

#include "mew/precompute.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace mew {

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr std::size_t kCacheHeaderBytes = 40;

std::uint64_t cache_file_size(std::uint64_t n, std::uint64_t f, std::uint32_t hops);

std::string encode_cache(const PrecomputedFeatures& pf);
/// Throws BadMagic, VersionMismatch or TruncatedFile.
PrecomputedFeatures decode_cache(std::string_view bytes);

void write_cache(const std::filesystem::path& path, const PrecomputedFeatures& pf);
PrecomputedFeatures read_cache(const std::filesystem::path& path);

}  // namespace mew
