#pragma once

// Dataset-level plumbing: loading and typing tables, feature
// standardization, cache building, and the train / eval / predict flows
// used by the command-line tool.

#include "mew/cache.hpp"
#include "mew/cell_data.hpp"
#include "mew/checkpoint.hpp"
#include "mew/manifest.hpp"
#include "mew/multiplex.hpp"
#include "mew/precompute.hpp"
#include "mew/training.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mew {

/// Per-column z-scoring of node features, fitted on training cells.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  bool empty() const { return mean.empty(); }
  void apply(Matrix& features) const;
  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
};

Standardizer fit_standardizer(const std::vector<const CellTable*>& tables);

/// Cluster centroids used to type cells when no table carries types.
struct CentroidTyping {
  Matrix centroids;  // in standardized biomarker space
  std::vector<double> column_mean;
  std::vector<double> column_scale;

  nlohmann::json to_json() const;
  static CentroidTyping from_json(const nlohmann::json& j);
};

/// Labels every cell with its nearest centroid index.
CellTable assign_centroid_types(const CellTable& table, const CentroidTyping& typing);

struct BuildOptions {
  int hops = 3;
  std::uint64_t seed = 0;
  bool stochastic = true;
  bool resample_each_epoch = false;
  bool standardize = true;
  int kmeans_k = 8;
  int workers = 0;  // 0: MEW_THREADS or the OpenMP default
  std::uint64_t pair_cap = 2'000'000;
};

/// Everything needed to turn a raw cell table into model inputs the same
/// way the cache builder did. Stored in the cache index and in checkpoints.
struct BuildInfo {
  BuildOptions options;
  std::string typing;  // "given", "propagation" or "kmeans"
  std::optional<CentroidTyping> centroids;
  Standardizer standardizer;
  ColumnMapping columns;
  std::size_t feature_dim = 0;

  nlohmann::json to_json() const;
  static BuildInfo from_json(const nlohmann::json& j);
};

/// Fills missing cell types the way `info` prescribes: nothing for a fully
/// typed table, nearest centroid for an untyped table when centroids exist,
/// label propagation otherwise.
CellTable type_table(const CellTable& table, const BuildInfo& info);

struct PreparedDataset {
  DatasetManifest manifest;
  std::vector<CellTable> tables;  // fully typed
  BuildInfo info;                 // standardizer empty when standardization is off
};

/// Loads and validates every table; fills missing types (k-means when no
/// table has any type, label propagation when some cells lack one) and
/// fits the feature standardizer on the training split.
PreparedDataset prepare_dataset(const std::filesystem::path& manifest_path, const BuildOptions& options);

/// Delaunay adjacency, type codes and (standardized) features of one table.
MultiplexGraph build_graph(const CellTable& typed, const Standardizer& standardizer);

std::uint64_t image_seed(std::uint64_t seed, const std::string& image_id);

PrecomputeOptions precompute_options(const BuildOptions& options, const std::string& image_id);

struct BuildReport {
  nlohmann::json index;
  double seconds = 0.0;
};

/// Writes <cache_dir>/<image_id>.mewp for every image plus index.json.
BuildReport build_caches(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                         const BuildOptions& options);

struct CacheIndex {
  std::filesystem::path dir;
  BuildInfo info;
  std::map<std::string, std::pair<std::string, std::string>> entries;  // image -> (file, hash)

  std::filesystem::path path_of(const std::string& image_id) const;  // throws MissingCache
};

CacheIndex load_cache_index(const std::filesystem::path& cache_dir);

std::string hash_hex(std::string_view bytes);

/// Cached features and labels of every image in the split. Throws
/// MissingCache or HashMismatch.
std::vector<Example> load_examples(const DatasetManifest& manifest, const CacheIndex& index, Split split);

/// The same examples recomputed from the cell tables.
std::vector<Example> recompute_examples(const DatasetManifest& manifest, const BuildInfo& info, Split split);

struct TrainOutcome {
  TrainResult result;
  ModelConfig model;
  nlohmann::json checkpoint_metadata;
};

TrainOutcome train_from_cache(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                              const TrainConfig& config);

struct EvalTimings {
  double load_seconds = 0.0;
  double forward_seconds = 0.0;
  double total_seconds = 0.0;
};

struct EvalReport {
  std::string split;
  std::vector<TaskMetric> metrics;
  std::vector<std::string> image_ids;
  std::vector<Prediction> predictions;
  EvalTimings timings;
  double mean_alpha_voronoi = 0.5;

  nlohmann::json to_json() const;
  std::string scores_csv(const ModelConfig& config) const;
};

EvalReport evaluate_split(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                          const Checkpoint& checkpoint, Split split, bool recompute);

/// Per-task scores and mean attention split of a single cell table.
nlohmann::json predict_table(const Checkpoint& checkpoint, const std::filesystem::path& cells_path);

struct Diagnostics {
  nlohmann::json report;
  std::vector<double> homophily;
  std::vector<double> cell_counts;
};

Diagnostics diagnose_dataset(const std::filesystem::path& manifest_path, int kmeans_k,
                             const std::filesystem::path& edge_dump_dir = {});

/// Simple SVG histogram.
std::string histogram_svg(const std::vector<double>& values, int bins, const std::string& title,
                          const std::string& x_label);

}  // namespace mew
