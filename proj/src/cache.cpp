#include "mew/cache.hpp"

#include "mew/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace mew {

namespace binio {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "failed writing " + path);
}

}  // namespace binio

std::uint64_t cache_file_size(std::uint64_t n, std::uint64_t f, std::uint32_t hops) {
  return kCacheHeaderBytes + 2ull * (hops + 1ull) * n * f * 4ull;
}

std::string encode_cache(const PrecomputedFeatures& pf) {
  const std::size_t n = pf.n(), f = pf.feature_dim();
  const auto hops = static_cast<std::uint32_t>(pf.hops);
  if (pf.voronoi_hops.size() != hops + 1u || pf.celltype_hops.size() != hops + 1u) {
    throw Error(Errc::DimMismatch, "precomputed features must hold K+1 matrices per branch");
  }
  std::string out;
  out.reserve(cache_file_size(n, f, hops));
  out.append("MEWP", 4);
  binio::put_u32(out, kCacheVersion);
  binio::put_u64(out, n);
  binio::put_u64(out, f);
  binio::put_u32(out, hops);
  binio::put_u64(out, pf.seed);
  binio::put_u32(out, pf.flags);
  for (const auto* branch : {&pf.voronoi_hops, &pf.celltype_hops}) {
    for (const Matrix& m : *branch) {
      if (m.rows() != n || m.cols() != f) throw Error(Errc::DimMismatch, "hop matrix shape mismatch");
      for (double v : m.values()) binio::put_f32(out, static_cast<float>(v));
    }
  }
  return out;
}

PrecomputedFeatures decode_cache(std::string_view bytes) {
  binio::Reader r(bytes);
  if (bytes.size() < 4) throw Error(Errc::TruncatedFile, "cache shorter than its magic");
  if (r.take(4) != "MEWP") throw Error(Errc::BadMagic, "not a MEWP cache file");
  if (bytes.size() < kCacheHeaderBytes) throw Error(Errc::TruncatedFile, "cache header truncated");
  const std::uint32_t version = r.u32();
  if (version != kCacheVersion) {
    throw Error(Errc::VersionMismatch, "cache version " + std::to_string(version) + ", expected " +
                                           std::to_string(kCacheVersion));
  }
  PrecomputedFeatures pf;
  const std::uint64_t n = r.u64();
  const std::uint64_t f = r.u64();
  pf.hops = static_cast<int>(r.u32());
  pf.seed = r.u64();
  pf.flags = r.u32();
  if (bytes.size() < cache_file_size(n, f, static_cast<std::uint32_t>(pf.hops))) {
    throw Error(Errc::TruncatedFile, "cache payload truncated");
  }
  for (auto* branch : {&pf.voronoi_hops, &pf.celltype_hops}) {
    branch->reserve(static_cast<std::size_t>(pf.hops) + 1);
    for (int k = 0; k <= pf.hops; ++k) {
      Matrix m(n, f);
      for (auto& v : m.values()) v = static_cast<double>(r.f32());
      branch->push_back(std::move(m));
    }
  }
  return pf;
}

void write_cache(const std::filesystem::path& path, const PrecomputedFeatures& pf) {
  binio::write_file(path.string(), encode_cache(pf));
}

PrecomputedFeatures read_cache(const std::filesystem::path& path) {
  return decode_cache(binio::read_file(path.string()));
}

}  // namespace mew
