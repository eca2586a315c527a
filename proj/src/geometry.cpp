#include "mew/geometry.hpp"

#include "mew/error.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

namespace mew {

namespace {

using Exact = boost::multiprecision::cpp_rational;

constexpr double kEps = 0x1.0p-53;
constexpr double kOrientBound = (3.0 + 16.0 * kEps) * kEps;
constexpr double kInCircleBound = (10.0 + 96.0 * kEps) * kEps;

template <class T>
int sign_of(const T& v) {
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

int orient_exact(const Point& a, const Point& b, const Point& c) {
  const Exact acx = Exact(a.x) - Exact(c.x), bcx = Exact(b.x) - Exact(c.x);
  const Exact acy = Exact(a.y) - Exact(c.y), bcy = Exact(b.y) - Exact(c.y);
  return sign_of(Exact(acx * bcy - acy * bcx));
}

int incircle_exact(const Point& a, const Point& b, const Point& c, const Point& d) {
  const Exact adx = Exact(a.x) - Exact(d.x), ady = Exact(a.y) - Exact(d.y);
  const Exact bdx = Exact(b.x) - Exact(d.x), bdy = Exact(b.y) - Exact(d.y);
  const Exact cdx = Exact(c.x) - Exact(d.x), cdy = Exact(c.y) - Exact(d.y);
  const Exact alift = adx * adx + ady * ady;
  const Exact blift = bdx * bdx + bdy * bdy;
  const Exact clift = cdx * cdx + cdy * cdy;
  const Exact det = alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) +
                    clift * (adx * bdy - bdx * ady);
  return sign_of(det);
}

constexpr std::uint32_t kGhost = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

struct Triangle {
  std::uint32_t v[3];    // counter-clockwise; a ghost vertex is always v[2]
  std::uint32_t nbr[3];  // nbr[k] lies across the edge opposite v[k]
  bool alive = true;

  bool ghost() const { return v[2] == kGhost; }
};

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b) {
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
  const std::uint32_t n = 1u << order;
  std::uint64_t d = 0;
  for (std::uint32_t s = n / 2; s > 0; s /= 2) {
    const std::uint32_t rx = (x & s) ? 1 : 0;
    const std::uint32_t ry = (y & s) ? 1 : 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = n - 1 - x;
        y = n - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

class Triangulator {
 public:
  explicit Triangulator(std::span<const Point> pts) : pts_(pts) {}

  void run() {
    const auto order = insertion_order();
    make_initial(order[0], order[1], order[2]);
    for (std::size_t k = 3; k < order.size(); ++k) insert(order[k]);
  }

  EdgeList edges() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(tris_.size() * 3 / 2);
    for (const auto& t : tris_) {
      if (!t.alive || t.ghost()) continue;
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t a = t.v[(k + 1) % 3], b = t.v[(k + 2) % 3];
        keys.push_back(edge_key(std::min(a, b), std::max(a, b)));
      }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    EdgeList out;
    out.reserve(keys.size());
    for (auto key : keys) {
      const auto i = static_cast<std::uint32_t>(key >> 32);
      const auto j = static_cast<std::uint32_t>(key & 0xffffffffu);
      out.push_back({i, j, distance(pts_[i], pts_[j])});
    }
    return out;
  }

 private:
  // First three non-collinear points, then the rest along a Hilbert curve so
  // the point-location walk stays short.
  std::vector<std::uint32_t> insertion_order() const {
    const std::size_t n = pts_.size();
    double minx = pts_[0].x, maxx = minx, miny = pts_[0].y, maxy = miny;
    for (const auto& p : pts_) {
      minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1e-300});
    constexpr int kOrder = 16;
    const double scale = ((1u << kOrder) - 1) / span;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto hx = static_cast<std::uint32_t>((pts_[i].x - minx) * scale);
      const auto hy = static_cast<std::uint32_t>((pts_[i].y - miny) * scale);
      keyed[i] = {hilbert_index(hx, hy, kOrder), i};
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::uint32_t> order(n);
    for (std::size_t k = 0; k < n; ++k) order[k] = keyed[k].second;

    // Find a non-degenerate seed triangle.
    std::size_t third = n;
    for (std::size_t k = 2; k < n; ++k) {
      if (orient(pts_[order[0]], pts_[order[1]], pts_[order[k]]) != 0) {
        third = k;
        break;
      }
    }
    if (third == n) throw Error(Errc::DegenerateInput, "all points are collinear");
    std::rotate(order.begin() + 2, order.begin() + third, order.begin() + third + 1);
    return order;
  }

  std::uint32_t add(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    // keep the ghost vertex in slot 2
    if (a == kGhost) {
      std::tie(a, b, c) = std::tuple{b, c, a};
    } else if (b == kGhost) {
      std::tie(a, b, c) = std::tuple{c, a, b};
    }
    Triangle t{{a, b, c}, {kNone, kNone, kNone}, true};
    if (!free_.empty()) {
      const std::uint32_t id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    return static_cast<std::uint32_t>(tris_.size() - 1);
  }

  static int slot_of_edge(const Triangle& t, std::uint32_t a, std::uint32_t b) {
    for (int k = 0; k < 3; ++k) {
      if (t.v[(k + 1) % 3] == a && t.v[(k + 2) % 3] == b) return k;
    }
    return -1;
  }

  void make_initial(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
    if (orient(pts_[a], pts_[b], pts_[c]) < 0) std::swap(b, c);
    const std::uint32_t t0 = add(a, b, c);
    const std::uint32_t g0 = add(b, a, kGhost);
    const std::uint32_t g1 = add(c, b, kGhost);
    const std::uint32_t g2 = add(a, c, kGhost);
    link_all({t0, g0, g1, g2}, {});
    last_ = t0;
  }

  // Connects every edge of the given triangles with its reverse, either
  // among themselves or to the recorded outside neighbours.
  void link_all(const std::vector<std::uint32_t>& created,
                const std::unordered_map<std::uint64_t, std::uint32_t>& outside) {
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, int>> by_edge;
    by_edge.reserve(created.size() * 3);
    for (auto id : created) {
      for (int k = 0; k < 3; ++k) {
        by_edge[edge_key(tris_[id].v[(k + 1) % 3], tris_[id].v[(k + 2) % 3])] = {id, k};
      }
    }
    for (auto id : created) {
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t a = tris_[id].v[(k + 1) % 3], b = tris_[id].v[(k + 2) % 3];
        if (auto it = by_edge.find(edge_key(b, a)); it != by_edge.end()) {
          tris_[id].nbr[k] = it->second.first;
        } else {
          const std::uint32_t other = outside.at(edge_key(a, b));
          tris_[id].nbr[k] = other;
          Triangle& o = tris_[other];
          o.nbr[slot_of_edge(o, b, a)] = id;
        }
      }
    }
  }

  bool in_conflict(const Triangle& t, const Point& p) const {
    if (!t.ghost()) return incircle(pts_[t.v[0]], pts_[t.v[1]], pts_[t.v[2]], p) > 0;
    const Point& a = pts_[t.v[0]];
    const Point& b = pts_[t.v[1]];
    const int o = orient(a, b, p);
    if (o != 0) return o > 0;
    // on the hull line: conflict only strictly inside the segment
    const double t_ = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
    const double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
    return t_ > 0.0 && t_ < len2;
  }

  std::uint32_t locate(const Point& p) {
    std::uint32_t cur = last_;
    if (!tris_[cur].alive || tris_[cur].ghost()) {
      for (std::uint32_t i = 0; i < tris_.size(); ++i) {
        if (tris_[i].alive && !tris_[i].ghost()) {
          cur = i;
          break;
        }
      }
    }
    unsigned rot = 0;
    std::size_t steps = 0;
    while (true) {
      const Triangle& t = tris_[cur];
      if (t.ghost()) return cur;
      bool moved = false;
      ++rot;
      for (int s = 0; s < 3; ++s) {
        const int k = static_cast<int>((rot + s) % 3);
        if (orient(pts_[t.v[(k + 1) % 3]], pts_[t.v[(k + 2) % 3]], p) < 0) {
          cur = t.nbr[k];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
      if (++steps > 4 * tris_.size() + 16) break;
    }
    // Walk failed to terminate; fall back to a scan.
    for (std::uint32_t i = 0; i < tris_.size(); ++i) {
      if (tris_[i].alive && in_conflict(tris_[i], p)) return i;
    }
    throw Error(Errc::DegenerateInput, "point location failed");
  }

  void insert(std::uint32_t pi) {
    const Point& p = pts_[pi];
    const std::uint32_t start = locate(p);

    std::vector<std::uint32_t> dead{start};
    std::vector<std::uint32_t> stack{start};
    tris_[start].alive = false;
    // directed boundary edge (a, b) of the cavity -> triangle outside it
    std::unordered_map<std::uint64_t, std::uint32_t> outside;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> boundary;
    while (!stack.empty()) {
      const std::uint32_t id = stack.back();
      stack.pop_back();
      for (int k = 0; k < 3; ++k) {
        const std::uint32_t nb = tris_[id].nbr[k];
        if (!tris_[nb].alive) continue;  // already in the cavity
        if (in_conflict(tris_[nb], p)) {
          tris_[nb].alive = false;
          dead.push_back(nb);
          stack.push_back(nb);
        } else {
          const std::uint32_t a = tris_[id].v[(k + 1) % 3], b = tris_[id].v[(k + 2) % 3];
          outside[edge_key(a, b)] = nb;
          boundary.emplace_back(a, b);
        }
      }
    }

    std::vector<std::uint32_t> created;
    created.reserve(boundary.size());
    // Free the dead slots only after the new triangles claim fresh indices
    // from them; the outside map never refers to a dead triangle.
    for (auto id : dead) free_.push_back(id);
    for (auto [a, b] : boundary) created.push_back(add(a, b, pi));
    link_all(created, outside);
    for (auto id : created) {
      if (!tris_[id].ghost()) last_ = id;
    }
  }

  std::span<const Point> pts_;
  std::vector<Triangle> tris_;
  std::vector<std::uint32_t> free_;
  std::uint32_t last_ = 0;
};

void check_duplicates(std::span<const Point> points) {
  std::vector<std::uint32_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return points[a].x < points[b].x; });
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const Point& p = points[idx[a]];
      const Point& q = points[idx[b]];
      if (q.x - p.x > kDuplicateTolerance) break;
      if (distance(p, q) <= kDuplicateTolerance) {
        throw Error(Errc::DegenerateInput, "duplicate centroids at indices " +
                                               std::to_string(std::min(idx[a], idx[b])) + " and " +
                                               std::to_string(std::max(idx[a], idx[b])));
      }
    }
  }
}

}  // namespace

double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

int orient(const Point& a, const Point& b, const Point& c) {
  const double detleft = (a.x - c.x) * (b.y - c.y);
  const double detright = (a.y - c.y) * (b.x - c.x);
  const double det = detleft - detright;
  const double bound = kOrientBound * (std::fabs(detleft) + std::fabs(detright));
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return orient_exact(a, b, c);
}

int incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det =
      alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * alift +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * blift +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * clift;
  const double bound = kInCircleBound * permanent;
  if (det > bound) return 1;
  if (-det > bound) return -1;
  return incircle_exact(a, b, c, d);
}

EdgeList delaunay_adjacency(std::span<const Point> points) {
  if (points.size() < 3) {
    throw Error(Errc::DegenerateInput,
                "need at least 3 points, got " + std::to_string(points.size()));
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
      throw Error(Errc::DegenerateInput, "non-finite centroid at index " + std::to_string(i));
    }
  }
  check_duplicates(points);
  Triangulator tri(points);
  tri.run();
  return tri.edges();
}

std::vector<double> NormalizedDistances::keep_probabilities(double floor) const {
  std::vector<double> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(),
                 [floor](double v) { return keep_probability(v, floor); });
  return out;
}

NormalizedDistances normalize_distances(const EdgeList& edges) {
  if (edges.empty()) throw Error(Errc::EmptyEdgeList, "cannot normalize an empty edge list");
  NormalizedDistances out;
  for (const auto& e : edges) out.d_max = std::max(out.d_max, e.d);
  out.p.reserve(edges.size());
  for (const auto& e : edges) out.p.push_back(out.d_max > 0.0 ? e.d / out.d_max : 0.0);
  return out;
}

double max_pair_distance(std::span<const Point> points, std::span<const std::uint32_t> subset) {
  if (subset.size() < 2) return 0.0;
  // Andrew's monotone chain, then brute force over hull vertices.
  std::vector<std::uint32_t> idx(subset.begin(), subset.end());
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) {
    return points[a].x < points[b].x || (points[a].x == points[b].x && points[a].y < points[b].y);
  });
  std::vector<std::uint32_t> hull(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    while (k >= 2 && orient(points[hull[k - 2]], points[hull[k - 1]], points[idx[i]]) <= 0) --k;
    hull[k++] = idx[i];
  }
  for (std::size_t i = idx.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient(points[hull[k - 2]], points[hull[k - 1]], points[idx[i]]) <= 0) --k;
    hull[k++] = idx[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  if (hull.size() < 2) hull = {idx.front(), idx.back()};
  double best = 0.0;
  for (std::size_t a = 0; a < hull.size(); ++a) {
    for (std::size_t b = a + 1; b < hull.size(); ++b) {
      best = std::max(best, distance(points[hull[a]], points[hull[b]]));
    }
  }
  return best;
}

}  // namespace mew
