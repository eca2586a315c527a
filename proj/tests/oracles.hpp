#pragma once

// Independent reference implementations used as test oracles: dense Eigen
// linear algebra and brute-force enumeration, written without reusing the
// library's kernels.

#include "mew/geometry.hpp"
#include "mew/matrix.hpp"
#include "mew/model.hpp"
#include "mew/multiplex.hpp"
#include "mew/rng.hpp"
#include "mew/sparse.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd to_eigen(const mew::Matrix& m) {
  MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

inline MatrixXd to_eigen(const mew::SparseMatrix& s) {
  MatrixXd e = MatrixXd::Zero(s.n, s.n);
  for (std::size_t r = 0; r < s.n; ++r)
    for (std::size_t k = s.row_offsets[r]; k < s.row_offsets[r + 1]; ++k) e(r, s.columns[k]) += s.values[k];
  return e;
}

inline double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

/// D^-1/2 (A + I) D^-1/2 from a dense 0/1 adjacency.
inline MatrixXd normalized(const MatrixXd& adjacency) {
  const auto n = adjacency.rows();
  MatrixXd a = adjacency + MatrixXd::Identity(n, n);
  VectorXd d = a.rowwise().sum();
  VectorXd s = d.array().rsqrt();
  return s.asDiagonal() * a * s.asDiagonal();
}

inline MatrixXd dense_adjacency(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges, std::size_t n) {
  MatrixXd a = MatrixXd::Zero(n, n);
  for (auto [i, j] : edges) {
    if (i == j) continue;
    a(i, j) = 1.0;
    a(j, i) = 1.0;
  }
  return a;
}

inline MatrixXd dense_adjacency(const mew::EdgeList& edges, std::size_t n) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> p;
  for (const auto& e : edges) p.emplace_back(e.i, e.j);
  return dense_adjacency(p, n);
}

/// Same-type clique adjacency.
inline MatrixXd clique_adjacency(const std::vector<int>& types) {
  const auto n = static_cast<Eigen::Index>(types.size());
  MatrixXd a = MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && types[static_cast<std::size_t>(i)] == types[static_cast<std::size_t>(j)]) a(i, j) = 1.0;
  return a;
}

/// [X, S X, ..., S^K X].
inline std::vector<MatrixXd> hops(const MatrixXd& s, const MatrixXd& x, int k) {
  std::vector<MatrixXd> out{x};
  for (int i = 1; i <= k; ++i) out.push_back(s * out.back());
  return out;
}

/// Delaunay edges by the empty-circumcircle criterion, O(n^4). Valid for
/// point sets in general position (no four co-circular points).
inline std::set<std::pair<std::uint32_t, std::uint32_t>> brute_delaunay(const std::vector<mew::Point>& p) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  const auto n = static_cast<std::uint32_t>(p.size());
  for (std::uint32_t a = 0; a < n; ++a)
    for (std::uint32_t b = a + 1; b < n; ++b)
      for (std::uint32_t c = b + 1; c < n; ++c) {
        const int o = mew::orient(p[a], p[b], p[c]);
        if (o == 0) continue;
        const auto& [x, y, z] = o > 0 ? std::tuple{a, b, c} : std::tuple{a, c, b};
        bool empty = true;
        for (std::uint32_t d = 0; d < n && empty; ++d) {
          if (d == a || d == b || d == c) continue;
          if (mew::incircle(p[x], p[y], p[z], p[d]) > 0) empty = false;
        }
        if (empty) {
          edges.insert({a, b});
          edges.insert({a, c});
          edges.insert({b, c});
        }
      }
  return edges;
}

inline double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return num / pairs;
}

inline double brute_c_index(const std::vector<double>& r, const std::vector<double>& t, const std::vector<int>& e) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (!(t[i] < t[j]) || e[i] != 1) continue;
      pairs += 1.0;
      num += r[i] > r[j] ? 1.0 : r[i] == r[j] ? 0.5 : 0.0;
    }
  return num / pairs;
}

inline MatrixXd block(const mew::ModelParams& p, const mew::Slot& s) {
  MatrixXd m(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) m(i, j) = p.values()[s.offset + i * s.cols + j];
  return m;
}

inline MatrixXd act(const MatrixXd& u, mew::Activation a, double slope) {
  switch (a) {
    case mew::Activation::Relu: return u.cwiseMax(0.0);
    case mew::Activation::Prelu: return u.unaryExpr([slope](double v) { return v > 0 ? v : slope * v; });
    case mew::Activation::Identity: return u;
  }
  return u;
}

inline MatrixXd add_row(MatrixXd m, const MatrixXd& bias) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) += bias.row(0);
  return m;
}

/// Branch output Z = xi(H Wz + bz) with the explicitly concatenated H.
inline MatrixXd branch(const mew::ModelParams& p, int b, const std::vector<MatrixXd>& x) {
  const auto& c = p.config();
  const auto& l = p.layout();
  const double s1 = c.activation == mew::Activation::Prelu ? p.values()[l.sigma_slope[b].offset] : 0.0;
  const double s2 = c.activation == mew::Activation::Prelu ? p.values()[l.xi_slope[b].offset] : 0.0;
  const auto n = x[0].rows();
  const auto d = static_cast<Eigen::Index>(c.hidden_dim);
  MatrixXd h(n, d * (c.hops + 1));
  for (int k = 0; k <= c.hops; ++k) {
    h.block(0, k * d, n, d) =
        act(add_row(x[static_cast<std::size_t>(k)] * block(p, l.hop_w[b][static_cast<std::size_t>(k)]),
                    block(p, l.hop_b[b][static_cast<std::size_t>(k)])),
            c.activation, s1);
  }
  return act(add_row(h * block(p, l.comb_w[b]), block(p, l.comb_b[b])), c.activation, s2);
}

/// Pooled outputs per task, computed densely with mean/max/sum pooling.
inline std::vector<VectorXd> forward(const mew::ModelParams& p, const std::vector<MatrixXd>& xv,
                                     const std::vector<MatrixXd>& xc, double* mean_alpha = nullptr) {
  const auto& c = p.config();
  const auto& l = p.layout();
  MatrixXd zv, zc, z;
  if (c.uses_voronoi()) zv = branch(p, mew::kVoronoi, xv);
  if (c.uses_celltype()) zc = branch(p, mew::kCelltype, xc);
  const auto n = c.uses_voronoi() ? zv.rows() : zc.rows();
  switch (c.fusion) {
    case mew::Fusion::Attention: {
      const VectorXd a = block(p, l.attention).col(0);
      z.resize(zv.rows(), zv.cols());
      double sum = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        auto lrelu = [](double v) { return v > 0 ? v : 0.3 * v; };
        const double ev = std::exp(lrelu(zv.row(i).dot(a)));
        const double ec = std::exp(lrelu(zc.row(i).dot(a)));
        const double av = ev / (ev + ec);
        sum += av;
        z.row(i) = av * zv.row(i) + (ec / (ev + ec)) * zc.row(i);
      }
      if (mean_alpha) *mean_alpha = sum / static_cast<double>(n);
      break;
    }
    case mew::Fusion::Sum: z = zv + zc; break;
    case mew::Fusion::Concat: {
      MatrixXd cat(n, zv.cols() * 2);
      cat << zv, zc;
      z = add_row(cat * block(p, l.concat_w), block(p, l.concat_b));
      break;
    }
    case mew::Fusion::VoronoiOnly: z = zv; break;
    case mew::Fusion::CelltypeOnly: z = zc; break;
  }
  std::vector<VectorXd> out;
  for (const auto& h : l.heads) {
    MatrixXd a1 = add_row(z * block(p, h.w1), block(p, h.b1)).cwiseMax(0.0);
    MatrixXd a2 = add_row(a1 * block(p, h.w2), block(p, h.b2)).cwiseMax(0.0);
    MatrixXd o = add_row(a2 * block(p, h.w3), block(p, h.b3));
    switch (c.pooling) {
      case mew::Pooling::Mean: out.push_back(o.colwise().mean().transpose()); break;
      case mew::Pooling::Sum: out.push_back(o.colwise().sum().transpose()); break;
      case mew::Pooling::Max: out.push_back(o.colwise().maxCoeff().transpose()); break;
    }
  }
  return out;
}

/// Random multiplex graph: uniform points, random types, Gaussian features.
inline mew::MultiplexGraph random_graph(mew::Rng& rng, std::size_t n, std::size_t f, int types) {
  mew::MultiplexGraph g;
  g.n = n;
  g.features = mew::Matrix(n, f);
  for (double& v : g.features.values()) v = mew::standard_normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    g.positions.push_back({mew::uniform(rng, 0.0, 100.0), mew::uniform(rng, 0.0, 100.0)});
    g.type_codes.push_back(static_cast<int>(mew::uniform_index(rng, static_cast<std::uint64_t>(types))));
  }
  g.voronoi = mew::delaunay_adjacency(g.positions);
  g.celltype = mew::CellTypePairs(g.type_codes);
  return g;
}

}  // namespace oracle
