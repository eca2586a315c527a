#pragma once

#include "mew/geometry.hpp"
#include "mew/matrix.hpp"
#include "mew/multiplex.hpp"
#include "mew/rng.hpp"
#include "mew/sparse.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace mew {

/// 1 / sqrt(d_i d_j); exact whenever d_i d_j is a perfect square.
inline double normalized_weight(std::uint64_t degree_i, std::uint64_t degree_j) {
  return 1.0 / std::sqrt(static_cast<double>(degree_i) * static_cast<double>(degree_j));
}

/// D^-1/2 (A + I) D^-1/2 for an undirected simple graph. Self pairs and
/// repeated pairs are ignored. Throws IndexOutOfRange.
SparseMatrix normalize_adjacency(std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                 std::size_t n);
SparseMatrix normalize_adjacency(const EdgeList& edges, std::size_t n);

/// Y = S X. Throws DimMismatch.
Matrix spmm(const SparseMatrix& s, const Matrix& x);

/// Keep probability of a same-type pair: max(1 - d_ij / d_max, floor).
struct DistanceKeepProbability {
  std::span<const Point> positions;
  double d_max = 0.0;
  double floor = kKeepFloor;

  double operator()(std::uint32_t i, std::uint32_t j) const {
    if (d_max <= 0.0) return 1.0;
    return keep_probability(distance(positions[i], positions[j]) / d_max, floor);
  }
};

/// d_max is the largest distance over all same-type pairs of the image.
DistanceKeepProbability celltype_keep_probability(const MultiplexGraph& g, double floor = kKeepFloor);

/// Retains each same-type pair independently with probability keep(i, j),
/// then normalizes like the Voronoi layer. Two passes over the same random
/// stream build the compressed rows directly; no pair list is stored.
template <class KeepFn>
SparseMatrix sample_celltype_adjacency(const CellTypePairs& pairs, KeepFn&& keep, Rng& rng) {
  const std::size_t n = pairs.node_count();
  std::vector<std::uint32_t> lower(n, 0), upper(n, 0);
  Rng replay = rng;
  pairs.for_each([&](std::uint32_t i, std::uint32_t j) {
    if (bernoulli(rng, keep(i, j))) {
      ++upper[i];
      ++lower[j];
    }
  });

  SparseMatrix s;
  s.n = n;
  s.row_offsets.assign(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) s.row_offsets[r + 1] = s.row_offsets[r] + lower[r] + upper[r] + 1;
  s.columns.resize(s.row_offsets[n]);
  s.values.resize(s.row_offsets[n]);
  std::vector<std::size_t> lo(n), hi(n);
  for (std::size_t r = 0; r < n; ++r) {
    lo[r] = s.row_offsets[r];
    hi[r] = s.row_offsets[r] + lower[r] + 1;
    s.columns[s.row_offsets[r] + lower[r]] = static_cast<std::uint32_t>(r);
  }
  // Groups list members in node order and i < j, so every row fills its
  // lower part and its upper part in ascending column order.
  pairs.for_each([&](std::uint32_t i, std::uint32_t j) {
    if (bernoulli(replay, keep(i, j))) {
      s.columns[hi[i]++] = j;
      s.columns[lo[j]++] = i;
    }
  });
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t e = s.row_offsets[r]; e < s.row_offsets[r + 1]; ++e) {
      const std::uint32_t c = s.columns[e];
      s.values[e] = normalized_weight(lower[r] + upper[r] + 1, lower[c] + upper[c] + 1);
    }
  }
  return s;
}

/// Same random draws as sample_celltype_adjacency, but applies the sampled
/// normalized adjacency to x on the fly in O(n) extra memory.
template <class KeepFn>
Matrix sample_and_aggregate(const CellTypePairs& pairs, KeepFn&& keep, Rng& rng, const Matrix& x) {
  const std::size_t n = pairs.node_count(), f = x.cols();
  std::vector<std::uint32_t> degree(n, 1);
  Rng replay = rng;
  pairs.for_each([&](std::uint32_t i, std::uint32_t j) {
    if (bernoulli(rng, keep(i, j))) {
      ++degree[i];
      ++degree[j];
    }
  });
  Matrix y(n, f);
  for (std::size_t r = 0; r < n; ++r) {
    const double w = 1.0 / static_cast<double>(degree[r]);
    for (std::size_t c = 0; c < f; ++c) y(r, c) = w * x(r, c);
  }
  pairs.for_each([&](std::uint32_t i, std::uint32_t j) {
    if (bernoulli(replay, keep(i, j))) {
      const double w = normalized_weight(degree[i], degree[j]);
      double* yi = y.row(i);
      double* yj = y.row(j);
      const double* xi = x.row(i);
      const double* xj = x.row(j);
      for (std::size_t c = 0; c < f; ++c) {
        yi[c] += w * xj[c];
        yj[c] += w * xi[c];
      }
    }
  });
  return y;
}

/// Normalized adjacency of the full cell-type layer (one clique per type).
SparseMatrix clique_adjacency(const CellTypePairs& pairs);

/// Applies the normalized clique adjacency without building it: every node
/// receives the mean of its type group.
Matrix clique_aggregate(const CellTypePairs& pairs, const Matrix& x);

enum PrecomputeFlags : std::uint32_t {
  kFlagStochastic = 1u << 0,
  kFlagResampleEachEpoch = 1u << 1,
};

struct PrecomputeOptions {
  int hops = 3;
  std::uint64_t seed = 0;
  bool stochastic = true;
  bool resample_each_epoch = false;
  /// Above this many same-type pairs the cell-type layer is never stored
  /// as a sparse matrix.
  std::uint64_t pair_cap = 2'000'000;
  double keep_floor = kKeepFloor;

  std::uint32_t flags() const {
    return (stochastic ? kFlagStochastic : 0u) | (resample_each_epoch ? kFlagResampleEachEpoch : 0u);
  }
};

/// K-hop inputs of both branches. Matrix 0 of each branch is X itself.
struct PrecomputedFeatures {
  std::vector<Matrix> voronoi_hops;
  std::vector<Matrix> celltype_hops;
  int hops = 0;
  std::uint64_t seed = 0;
  std::uint32_t flags = 0;

  std::size_t n() const { return voronoi_hops.empty() ? 0 : voronoi_hops.front().rows(); }
  std::size_t feature_dim() const { return voronoi_hops.empty() ? 0 : voronoi_hops.front().cols(); }
};

/// [X, A X, ..., A^K X] for the Voronoi layer.
std::vector<Matrix> precompute_voronoi_hops(const MultiplexGraph& g, const Matrix& x, int hops);

/// [X, A'_1 X, A'_2 A'_1 X, ...] for the cell-type layer, with a freshly
/// sampled A'_k per hop when stochastic.
std::vector<Matrix> precompute_celltype_hops(const MultiplexGraph& g, const Matrix& x,
                                             const PrecomputeOptions& options);

PrecomputedFeatures precompute_image(const MultiplexGraph& g, const PrecomputeOptions& options);

}  // namespace mew
