#include "mew/cell_data.hpp"

#include "mew/error.hpp"

#include <cmath>

namespace mew {

CellTable propagate_labels(const CellTable& table, const EdgeList& edges, int max_iter, double tol) {
  const std::size_t n = table.size_n();
  TypeCodebook book;
  const std::vector<int> seeds = encode_cell_types(table, book);
  const std::size_t labels = book.size();
  if (labels == 0) throw Error(Errc::NoSeedLabels, "image " + table.image_id + " has no labeled cells");

  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const auto& e : edges) {
    if (e.i >= n || e.j >= n) throw Error(Errc::IndexOutOfRange, "edge index beyond cell count");
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }

  Matrix dist(n, labels);
  for (std::size_t i = 0; i < n; ++i) {
    if (seeds[i] >= 0) dist(i, static_cast<std::size_t>(seeds[i])) = 1.0;
  }
  Matrix next(n, labels);
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double* out = next.row(i);
      if (seeds[i] >= 0) {
        std::copy(dist.row(i), dist.row(i) + labels, out);
        continue;
      }
      std::fill(out, out + labels, 0.0);
      if (adj[i].empty()) continue;
      const double w = 1.0 / static_cast<double>(adj[i].size());
      for (auto j : adj[i]) {
        for (std::size_t c = 0; c < labels; ++c) out[c] += w * dist(j, c);
      }
      for (std::size_t c = 0; c < labels; ++c) change = std::max(change, std::fabs(out[c] - dist(i, c)));
    }
    std::swap(dist, next);
    if (change < tol) break;
  }

  CellTable out = table;
  out.cell_type.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (seeds[i] >= 0) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < labels; ++c) {
      if (dist(i, c) > dist(i, best)) best = c;
    }
    out.cell_type[i] = book.name(static_cast<int>(best));
  }
  return out;
}

}  // namespace mew
