#include "mew/cell_data.hpp"

#include "mew/error.hpp"
#include "mew/rng.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mew {

namespace {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

// Nearest centroid; ties go to the lowest index.
std::size_t nearest(const double* x, const Matrix& centroids, double& best) {
  std::size_t arg = 0;
  best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c), centroids.cols());
    if (d < best) {
      best = d;
      arg = c;
    }
  }
  return arg;
}

}  // namespace

KMeansResult kmeans_celltype(const std::vector<CellTable>& tables, const KMeansOptions& opt) {
  if (opt.k < 2) throw Error(Errc::InvalidConfig, "k-means needs k >= 2");
  if (opt.max_iter < 1) throw Error(Errc::InvalidConfig, "k-means needs max_iter >= 1");
  std::size_t total = 0;
  std::size_t dim = tables.empty() ? 0 : tables.front().biomarker_dim();
  for (const auto& t : tables) {
    if (t.biomarker_dim() != dim) throw Error(Errc::DimMismatch, "biomarker dimension differs across images");
    total += t.size_n();
  }
  const auto k = static_cast<std::size_t>(opt.k);
  if (total < k) {
    throw Error(Errc::TooFewCells, "k-means with k=" + std::to_string(k) + " on " +
                                       std::to_string(total) + " cells");
  }

  KMeansResult res;
  Matrix data(total, dim);
  {
    std::size_t r = 0;
    for (const auto& t : tables) {
      for (std::size_t i = 0; i < t.size_n(); ++i, ++r) {
        std::copy(t.biomarkers.row(i), t.biomarkers.row(i) + dim, data.row(r));
      }
    }
  }
  res.column_mean.assign(dim, 0.0);
  res.column_scale.assign(dim, 1.0);
  if (opt.standardize) {
    for (std::size_t j = 0; j < dim; ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < total; ++r) mean += data(r, j);
      mean /= static_cast<double>(total);
      double var = 0.0;
      for (std::size_t r = 0; r < total; ++r) var += (data(r, j) - mean) * (data(r, j) - mean);
      var /= static_cast<double>(total);
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      res.column_mean[j] = mean;
      res.column_scale[j] = sd;
      for (std::size_t r = 0; r < total; ++r) data(r, j) = (data(r, j) - mean) / sd;
    }
  }

  // k-means++ seeding
  Rng rng(opt.seed);
  Matrix centroids(k, dim);
  std::vector<double> d2(total, std::numeric_limits<double>::infinity());
  std::size_t pick = uniform_index(rng, total);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(data.row(pick), data.row(pick) + dim, centroids.row(c));
    if (c + 1 == k) break;
    double sum = 0.0;
    for (std::size_t r = 0; r < total; ++r) {
      d2[r] = std::min(d2[r], squared_distance(data.row(r), centroids.row(c), dim));
      sum += d2[r];
    }
    if (sum <= 0.0) {
      // every point coincides with a centroid; take the first unused index
      pick = (pick + 1) % total;
      continue;
    }
    double target = uniform01(rng) * sum;
    pick = total - 1;
    for (std::size_t r = 0; r < total; ++r) {
      target -= d2[r];
      if (target < 0.0 && d2[r] > 0.0) {
        pick = r;
        break;
      }
    }
  }

  std::vector<std::size_t> assign(total, k);
  std::vector<double> dist(total);
  auto assign_step = [&]() {
    bool changed = false;
    double obj = 0.0;
    for (std::size_t r = 0; r < total; ++r) {
      const std::size_t c = nearest(data.row(r), centroids, dist[r]);
      changed |= c != assign[r];
      assign[r] = c;
      obj += dist[r];
    }
    res.objective.push_back(obj);
    return changed;
  };

  assign_step();
  for (int it = 0; it < opt.max_iter; ++it) {
    Matrix sums(k, dim);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t r = 0; r < total; ++r) {
      ++counts[assign[r]];
      for (std::size_t j = 0; j < dim; ++j) sums(assign[r], j) += data(r, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // re-seed an empty cluster at the worst-served point
        std::size_t far = 0;
        for (std::size_t r = 1; r < total; ++r) {
          if (dist[r] > dist[far]) far = r;
        }
        std::copy(data.row(far), data.row(far) + dim, centroids.row(c));
        dist[far] = 0.0;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j) centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
    }
    res.iterations = it + 1;
    if (!assign_step()) break;
  }

  res.centroids = centroids;
  res.tables = tables;
  std::size_t r = 0;
  for (auto& t : res.tables) {
    t.cell_type.assign(t.size_n(), std::nullopt);
    for (std::size_t i = 0; i < t.size_n(); ++i, ++r) t.cell_type[i] = std::to_string(assign[r]);
  }
  return res;
}

}  // namespace mew
