#pragma once

#include "mew/cell_data.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mew {

enum class TaskKind { Binary, Hazard };
enum class Split { Train, Val, Test };

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::Binary;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

/// Label of one image for one task; binary uses `value`, hazard uses
/// `time` and `event` (event = 0 means censored).
struct Label {
  bool present = false;
  int value = 0;
  double time = 0.0;
  int event = 0;

  static Label binary(int v) { return {true, v, 0.0, 0}; }
  static Label hazard(double t, int e) { return {true, 0, t, e}; }
};

struct ImageEntry {
  std::string image_id;
  std::string path;  // relative to the manifest directory unless absolute
  std::string group_id;
};

struct DatasetManifest {
  std::vector<ImageEntry> images;
  std::map<std::string, Split> splits;  // group_id -> split
  std::vector<TaskSpec> tasks;
  std::vector<std::vector<Label>> labels;  // [image][task]
  ColumnMapping columns;
  std::filesystem::path base_dir;

  Split split_of(std::size_t image) const;
  std::vector<std::size_t> images_in(Split split) const;
  std::filesystem::path table_path(std::size_t image) const;
  int task_index(const std::string& name) const;  // -1 if absent
};

std::string_view split_name(Split s);
Split parse_split(const std::string& s);
std::string_view task_kind_name(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

/// Checks manifest invariants; throws InvalidManifest.
void validate_manifest(const DatasetManifest& manifest);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

nlohmann::json columns_to_json(const ColumnMapping& c);
ColumnMapping columns_from_json(const nlohmann::json& j);

}  // namespace mew
