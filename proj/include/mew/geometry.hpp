#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mew {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Undirected edge with i < j and the Euclidean length d (µm).
struct Edge {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  double d = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeList = std::vector<Edge>;

/// Floor on the keep probability of the farthest pairs.
inline constexpr double kKeepFloor = 0.01;

/// Tolerance under which two centroids count as the same point.
inline constexpr double kDuplicateTolerance = 1e-9;

struct NormalizedDistances {
  std::vector<double> p;  // d / d_max, aligned with the edge list
  double d_max = 0.0;

  /// max(1 - p, floor) per edge.
  std::vector<double> keep_probabilities(double floor = kKeepFloor) const;
};

inline double keep_probability(double normalized_distance, double floor = kKeepFloor) {
  const double keep = 1.0 - normalized_distance;
  return keep > floor ? keep : floor;
}

/// Sign-exact orientation of (a, b, c): > 0 counter-clockwise, < 0 clockwise.
int orient(const Point& a, const Point& b, const Point& c);

/// Sign-exact in-circle test: > 0 when d lies strictly inside the circle
/// through the counter-clockwise triangle (a, b, c).
int incircle(const Point& a, const Point& b, const Point& c, const Point& d);

/// Delaunay edges of a planar point set (incremental Bowyer-Watson).
/// Throws DegenerateInput for fewer than 3 points, all-collinear input or
/// duplicate centroids.
EdgeList delaunay_adjacency(std::span<const Point> points);

/// p = d / d_max over the given edges. Throws EmptyEdgeList.
NormalizedDistances normalize_distances(const EdgeList& edges);

/// Largest distance between any two of the selected points (convex hull
/// diameter); 0 for fewer than two points.
double max_pair_distance(std::span<const Point> points, std::span<const std::uint32_t> subset);

double distance(const Point& a, const Point& b);

}  // namespace mew
