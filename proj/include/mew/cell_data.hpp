#pragma once

#include "mew/geometry.hpp"
#include "mew/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace mew {

/// Which CSV columns hold which cell attribute. An empty biomarker list means
/// "every column not mapped to anything else".
struct ColumnMapping {
  std::string id = "cell_id";
  std::string x = "x";
  std::string y = "y";
  std::string size = "size";
  std::vector<std::string> biomarkers;
  std::string cell_type = "cell_type";  // optional in the file
};

/// Segmented cells of one image, stored column-wise.
struct CellTable {
  std::string image_id;
  std::vector<std::int64_t> cell_ids;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> size;
  std::vector<std::string> biomarker_names;
  Matrix biomarkers;  // n x Fb
  /// Empty when the table carries no cell-type column; otherwise one entry
  /// per cell, std::nullopt for unlabeled cells.
  std::vector<std::optional<std::string>> cell_type;

  std::size_t size_n() const { return cell_ids.size(); }
  std::size_t biomarker_dim() const { return biomarkers.cols(); }
  std::size_t feature_dim() const { return biomarkers.cols() + 1; }
  bool has_cell_type_column() const { return !cell_type.empty(); }
  /// True when every cell carries a label.
  bool fully_typed() const;

  /// Node features: biomarkers followed by size (n x (Fb + 1)).
  Matrix features() const;
  std::vector<Point> points() const;
};

/// Checks the table invariants; throws the matching Errc.
void validate_cell_table(const CellTable& table);

CellTable parse_cell_table(std::istream& in, const ColumnMapping& schema, std::string image_id);
CellTable load_cell_table(const std::filesystem::path& path, const ColumnMapping& schema,
                          std::string image_id = {});
void write_cell_table(const std::filesystem::path& path, const CellTable& table);

/// Dense integer codes for opaque cell-type strings, assigned in order of
/// first appearance.
class TypeCodebook {
 public:
  int code(const std::string& name);
  int find(const std::string& name) const;  // -1 when unknown
  const std::string& name(int code) const { return names_.at(static_cast<std::size_t>(code)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

/// Type codes for every cell (-1 for unlabeled cells).
std::vector<int> encode_cell_types(const CellTable& table, TypeCodebook& book);

struct KMeansOptions {
  int k = 8;
  std::uint64_t seed = 0;
  int max_iter = 100;
  bool standardize = true;
};

struct KMeansResult {
  std::vector<CellTable> tables;  // copies with cell_type = cluster index
  Matrix centroids;               // k x Fb in the (possibly standardized) space
  std::vector<double> column_mean;
  std::vector<double> column_scale;
  std::vector<double> objective;  // within-cluster sum of squares per iteration
  int iterations = 0;
};

/// Clusters biomarker vectors pooled over all tables (k-means++ seeding,
/// Lloyd iterations until assignments are stable) and writes the cluster
/// index into cell_type.
KMeansResult kmeans_celltype(const std::vector<CellTable>& tables, const KMeansOptions& options);

/// Fills unlabeled cells by label propagation over the given adjacency.
/// Seed labels are clamped; ties go to the label that appears first.
CellTable propagate_labels(const CellTable& table, const EdgeList& voronoi_edges, int max_iter,
                           double tol);

}  // namespace mew
