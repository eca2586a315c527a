#pragma once

#include "mew/cell_data.hpp"
#include "mew/geometry.hpp"
#include "mew/matrix.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mew {

/// Implicit edge set of the cell-type layer: every unordered pair of
/// distinct nodes that share a type. Pairs are never stored; they are
/// enumerated group by group (type code order), members in node order.
class CellTypePairs {
 public:
  CellTypePairs() = default;
  /// Throws UntypedNode for a negative code.
  explicit CellTypePairs(std::span<const int> type_codes);

  std::size_t node_count() const { return n_; }
  std::uint64_t pair_count() const { return pairs_; }
  const std::vector<std::vector<std::uint32_t>>& groups() const { return groups_; }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (const auto& g : groups_) {
      for (std::size_t a = 0; a < g.size(); ++a) {
        for (std::size_t b = a + 1; b < g.size(); ++b) fn(g[a], g[b]);
      }
    }
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> materialize() const;

 private:
  std::size_t n_ = 0;
  std::uint64_t pairs_ = 0;
  std::vector<std::vector<std::uint32_t>> groups_;
};

/// Two layers over one node set: Voronoi (geometric) and cell-type.
struct MultiplexGraph {
  std::string image_id;
  std::size_t n = 0;
  Matrix features;               // n x F, biomarkers then size
  std::vector<Point> positions;  // centroids, µm
  EdgeList voronoi;
  std::vector<int> type_codes;
  CellTypePairs celltype;
};

CellTypePairs build_celltype_pairs(std::span<const int> type_codes);

/// Assembles the multiplex graph from a fully typed table. Type codes come
/// from `book` (extended on first sight).
MultiplexGraph assemble_multiplex(const CellTable& table, const EdgeList& voronoi, TypeCodebook& book);
MultiplexGraph assemble_multiplex(const CellTable& table, const EdgeList& voronoi);

/// Fraction of edges whose endpoints share a type. Throws EmptyEdgeList.
double homophily_ratio(const EdgeList& edges, std::span<const int> type_codes);

}  // namespace mew
