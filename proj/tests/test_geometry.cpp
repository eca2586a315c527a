#include "oracles.hpp"
#include "helpers.hpp"

#include "mew/error.hpp"
#include "mew/geometry.hpp"

#include <doctest.h>

#include <set>

using namespace mew;

namespace {

std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set(const EdgeList& edges) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> s;
  for (const auto& e : edges) s.insert({e.i, e.j});
  return s;
}

// Every edge of a valid Delaunay triangulation has some circle through its
// endpoints with no point strictly inside. For an edge of a triangulation,
// one of its adjacent triangles' circumcircles works; we check the weaker
// closed-sense criterion that some third point gives an empty circle.
bool has_empty_circle(const std::vector<Point>& p, std::uint32_t a, std::uint32_t b) {
  for (std::uint32_t c = 0; c < p.size(); ++c) {
    if (c == a || c == b) continue;
    const int o = orient(p[a], p[b], p[c]);
    if (o == 0) continue;
    const auto [x, y] = o > 0 ? std::pair{a, b} : std::pair{b, a};
    bool empty = true;
    for (std::uint32_t d = 0; d < p.size() && empty; ++d) {
      if (d == a || d == b || d == c) continue;
      if (incircle(p[x], p[y], p[c], p[d]) > 0) empty = false;
    }
    if (empty) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("triangle gives three edges with lengths") {
  const std::vector<Point> p{{0, 0}, {3, 0}, {0, 4}};
  const auto e = delaunay_adjacency(p);
  REQUIRE(e.size() == 3);
  for (const auto& x : e) CHECK(x.i < x.j);
  std::set<double> lengths;
  for (const auto& x : e) lengths.insert(x.d);
  CHECK(lengths == std::set<double>{3.0, 4.0, 5.0});
}

TEST_CASE("unit square has four sides and one diagonal") {
  const std::vector<Point> p{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const auto e = edge_set(delaunay_adjacency(p));
  CHECK(e.size() == 5);
  for (auto s : {std::pair<std::uint32_t, std::uint32_t>{0, 1}, {1, 2}, {2, 3}, {0, 3}}) CHECK(e.count(s) == 1);
  CHECK((e.count({0, 2}) + e.count({1, 3})) == 1);
  // The brute-force oracle lists both diagonals for co-circular corners.
  CHECK(oracle::brute_delaunay(p).size() == 6);
}

TEST_CASE("random points match the brute-force triangulation") {
  Rng rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Point> p(50);
    for (auto& q : p) q = {uniform(rng, 0, 100), uniform(rng, 0, 100)};
    CHECK(edge_set(delaunay_adjacency(p)) == oracle::brute_delaunay(p));
  }
}

TEST_CASE("grid input yields a valid triangulation") {
  std::vector<Point> p;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) p.push_back({static_cast<double>(i), static_cast<double>(j)});
  const auto e = delaunay_adjacency(p);
  // A triangulation of an a x b grid has (a-1)(b-1) squares, each split once.
  const std::size_t sides = 2 * 6 * 5;
  CHECK(e.size() == sides + 25);
  for (const auto& x : e) CHECK(has_empty_circle(p, x.i, x.j));
}

TEST_CASE("degenerate point sets are rejected") {
  auto code = [](const std::vector<Point>& p) { return helpers::error_of([&] { delaunay_adjacency(p); }); };
  CHECK(code({{0, 0}, {1, 1}}) == Errc::DegenerateInput);
  CHECK(code({{0, 0}, {1, 1}, {2, 2}, {3, 3}}) == Errc::DegenerateInput);
  CHECK(code({{0, 0}, {1, 0}, {0, 1}, {1, 0}}) == Errc::DegenerateInput);
}

TEST_CASE("near-collinear points still triangulate") {
  std::vector<Point> p;
  for (int i = 0; i < 20; ++i) p.push_back({static_cast<double>(i), 1e-12 * (i % 3)});
  p.push_back({10, 5});
  const auto e = delaunay_adjacency(p);
  CHECK(edge_set(e) == oracle::brute_delaunay(p));
}

TEST_CASE("normalize_distances") {
  const EdgeList e{{0, 1, 1.0}, {1, 2, 2.0}, {0, 2, 4.0}};
  const auto nd = normalize_distances(e);
  CHECK(nd.d_max == 4.0);
  CHECK(nd.p == std::vector<double>{0.25, 0.5, 1.0});
  CHECK(nd.keep_probabilities() == std::vector<double>{0.75, 0.5, kKeepFloor});

  const auto single = normalize_distances(EdgeList{{0, 1, 7.0}});
  CHECK(single.p == std::vector<double>{1.0});
  // 1 - p is 0 here; the floor keeps the pair sampleable.
  CHECK(single.keep_probabilities()[0] == kKeepFloor);

  const auto equal = normalize_distances(EdgeList{{0, 1, 2.0}, {1, 2, 2.0}});
  CHECK(equal.p == std::vector<double>{1.0, 1.0});

  CHECK_THROWS_AS(normalize_distances(EdgeList{}), Error);
}

TEST_CASE("max_pair_distance matches brute force") {
  Rng rng(3);
  std::vector<Point> p(80);
  for (auto& q : p) q = {uniform(rng, -5, 5), uniform(rng, -5, 5)};
  std::vector<std::uint32_t> subset;
  for (std::uint32_t i = 0; i < p.size(); i += 2) subset.push_back(i);
  double best = 0.0;
  for (auto a : subset)
    for (auto b : subset) best = std::max(best, distance(p[a], p[b]));
  CHECK(max_pair_distance(p, subset) == doctest::Approx(best).epsilon(1e-15));
  CHECK(max_pair_distance(p, std::vector<std::uint32_t>{4}) == 0.0);
}
