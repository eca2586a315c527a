#include "mew/precompute.hpp"

#include "mew/error.hpp"
#include "mew/kernels.hpp"

#include <algorithm>

namespace mew {

SparseMatrix normalize_adjacency(std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                 std::size_t n) {
  std::vector<std::vector<std::uint32_t>> rows(n);
  for (std::size_t r = 0; r < n; ++r) rows[r].push_back(static_cast<std::uint32_t>(r));
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) {
      throw Error(Errc::IndexOutOfRange, "edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                             ") out of range for n=" + std::to_string(n));
    }
    if (i == j) continue;
    rows[i].push_back(j);
    rows[j].push_back(i);
  }
  SparseMatrix s;
  s.n = n;
  s.row_offsets.assign(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    auto& row = rows[r];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    s.row_offsets[r + 1] = s.row_offsets[r] + row.size();
  }
  s.columns.reserve(s.row_offsets[n]);
  for (const auto& row : rows) s.columns.insert(s.columns.end(), row.begin(), row.end());
  s.values.resize(s.columns.size());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e) {
      s.values[e] = normalized_weight(rows[r].size(), rows[s.columns[e]].size());
    }
  }
  return s;
}

SparseMatrix normalize_adjacency(const EdgeList& edges, std::size_t n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(edges.size());
  for (const auto& e : edges) pairs.emplace_back(e.i, e.j);
  return normalize_adjacency(pairs, n);
}

Matrix spmm(const SparseMatrix& s, const Matrix& x) {
  if (x.rows() != s.n) {
    throw Error(Errc::DimMismatch, "spmm: matrix is " + std::to_string(s.n) + "x" + std::to_string(s.n) +
                                       ", features have " + std::to_string(x.rows()) + " rows");
  }
  Matrix y(x.rows(), x.cols());
  kernels::spmm(s, x.view(), y.view());
  return y;
}

DistanceKeepProbability celltype_keep_probability(const MultiplexGraph& g, double floor) {
  DistanceKeepProbability keep;
  keep.positions = g.positions;
  keep.floor = floor;
  for (const auto& group : g.celltype.groups()) {
    keep.d_max = std::max(keep.d_max, max_pair_distance(g.positions, group));
  }
  return keep;
}

SparseMatrix clique_adjacency(const CellTypePairs& pairs) {
  Rng unused(0);
  return sample_celltype_adjacency(pairs, [](std::uint32_t, std::uint32_t) { return 1.0; }, unused);
}

Matrix clique_aggregate(const CellTypePairs& pairs, const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  std::vector<double> mean(x.cols());
  for (const auto& group : pairs.groups()) {
    if (group.empty()) continue;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (auto i : group) {
      for (std::size_t c = 0; c < x.cols(); ++c) mean[c] += x(i, c);
    }
    const double inv = 1.0 / static_cast<double>(group.size());
    for (auto& v : mean) v *= inv;
    for (auto i : group) std::copy(mean.begin(), mean.end(), y.row(i));
  }
  return y;
}

std::vector<Matrix> precompute_voronoi_hops(const MultiplexGraph& g, const Matrix& x, int hops) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(hops) + 1);
  out.push_back(x);
  const SparseMatrix a = normalize_adjacency(g.voronoi, g.n);
  for (int k = 1; k <= hops; ++k) out.push_back(spmm(a, out.back()));
  return out;
}

std::vector<Matrix> precompute_celltype_hops(const MultiplexGraph& g, const Matrix& x,
                                             const PrecomputeOptions& opt) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(opt.hops) + 1);
  out.push_back(x);
  const bool small = g.celltype.pair_count() <= opt.pair_cap;
  if (!opt.stochastic) {
    if (small) {
      const SparseMatrix a = clique_adjacency(g.celltype);
      for (int k = 1; k <= opt.hops; ++k) out.push_back(spmm(a, out.back()));
    } else {
      for (int k = 1; k <= opt.hops; ++k) out.push_back(clique_aggregate(g.celltype, out.back()));
    }
    return out;
  }
  const DistanceKeepProbability keep = celltype_keep_probability(g, opt.keep_floor);
  Rng rng(derive_seed(opt.seed, 0x5eed));
  for (int k = 1; k <= opt.hops; ++k) {
    if (small) {
      const SparseMatrix a = sample_celltype_adjacency(g.celltype, keep, rng);
      out.push_back(spmm(a, out.back()));
    } else {
      out.push_back(sample_and_aggregate(g.celltype, keep, rng, out.back()));
    }
  }
  return out;
}

PrecomputedFeatures precompute_image(const MultiplexGraph& g, const PrecomputeOptions& opt) {
  if (opt.hops < 1) throw Error(Errc::InvalidConfig, "hops must be >= 1");
  if (g.features.rows() != g.n) throw Error(Errc::DimMismatch, "feature rows differ from node count");
  PrecomputedFeatures pf;
  pf.hops = opt.hops;
  pf.seed = opt.seed;
  pf.flags = opt.flags();
  pf.voronoi_hops = precompute_voronoi_hops(g, g.features, opt.hops);
  pf.celltype_hops = precompute_celltype_hops(g, g.features, opt);
  return pf;
}

}  // namespace mew
