#include "mew/multiplex.hpp"

#include "mew/error.hpp"

namespace mew {

CellTypePairs::CellTypePairs(std::span<const int> type_codes) : n_(type_codes.size()) {
  for (std::size_t i = 0; i < type_codes.size(); ++i) {
    const int c = type_codes[i];
    if (c < 0) throw Error(Errc::UntypedNode, "node " + std::to_string(i) + " has no cell type");
    if (static_cast<std::size_t>(c) >= groups_.size()) groups_.resize(static_cast<std::size_t>(c) + 1);
    groups_[static_cast<std::size_t>(c)].push_back(static_cast<std::uint32_t>(i));
  }
  for (const auto& g : groups_) {
    const std::uint64_t m = g.size();
    pairs_ += m * (m - (m > 0 ? 1 : 0)) / 2;
  }
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> CellTypePairs::materialize() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(pairs_);
  for_each([&](std::uint32_t i, std::uint32_t j) { out.emplace_back(i, j); });
  return out;
}

CellTypePairs build_celltype_pairs(std::span<const int> type_codes) { return CellTypePairs(type_codes); }

MultiplexGraph assemble_multiplex(const CellTable& table, const EdgeList& voronoi, TypeCodebook& book) {
  MultiplexGraph g;
  g.image_id = table.image_id;
  g.n = table.size_n();
  g.features = table.features();
  g.positions = table.points();
  for (const auto& e : voronoi) {
    if (e.i >= g.n || e.j >= g.n) throw Error(Errc::IndexOutOfRange, "Voronoi edge beyond cell count");
  }
  g.voronoi = voronoi;
  g.type_codes = encode_cell_types(table, book);
  g.celltype = CellTypePairs(g.type_codes);
  return g;
}

MultiplexGraph assemble_multiplex(const CellTable& table, const EdgeList& voronoi) {
  TypeCodebook book;
  return assemble_multiplex(table, voronoi, book);
}

double homophily_ratio(const EdgeList& edges, std::span<const int> type_codes) {
  if (edges.empty()) throw Error(Errc::EmptyEdgeList, "homophily of an empty edge list");
  std::size_t same = 0;
  for (const auto& e : edges) {
    if (e.i >= type_codes.size() || e.j >= type_codes.size()) {
      throw Error(Errc::IndexOutOfRange, "edge index beyond type vector");
    }
    if (type_codes[e.i] == type_codes[e.j]) ++same;
  }
  return static_cast<double>(same) / static_cast<double>(edges.size());
}

}  // namespace mew
