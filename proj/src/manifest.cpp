#include "mew/manifest.hpp"

#include "mew/error.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace mew {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::InvalidManifest, what); }

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  bad("unknown split \"" + s + "\"");
}

std::string_view task_kind_name(TaskKind k) { return k == TaskKind::Binary ? "binary" : "hazard"; }

TaskKind parse_task_kind(const std::string& s) {
  if (s == "binary") return TaskKind::Binary;
  if (s == "hazard") return TaskKind::Hazard;
  bad("unknown task kind \"" + s + "\"");
}

Split DatasetManifest::split_of(std::size_t image) const {
  auto it = splits.find(images.at(image).group_id);
  if (it == splits.end()) bad("group " + images[image].group_id + " has no split");
  return it->second;
}

std::vector<std::size_t> DatasetManifest::images_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (split_of(i) == split) out.push_back(i);
  }
  return out;
}

std::filesystem::path DatasetManifest::table_path(std::size_t image) const {
  std::filesystem::path p = images.at(image).path;
  return p.is_absolute() ? p : base_dir / p;
}

int DatasetManifest::task_index(const std::string& name) const {
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    if (tasks[t].name == name) return static_cast<int>(t);
  }
  return -1;
}

void validate_manifest(const DatasetManifest& m) {
  if (m.tasks.empty()) bad("manifest declares no tasks");
  std::set<std::string> names;
  for (const auto& t : m.tasks) {
    if (t.name.empty()) bad("task with empty name");
    if (!names.insert(t.name).second) bad("duplicate task name \"" + t.name + "\"");
  }
  std::set<std::string> ids;
  for (const auto& img : m.images) {
    if (img.image_id.empty()) bad("image with empty image_id");
    if (!ids.insert(img.image_id).second) bad("duplicate image_id \"" + img.image_id + "\"");
    if (!m.splits.count(img.group_id)) {
      bad("image " + img.image_id + ": group \"" + img.group_id + "\" has no split");
    }
  }
  if (m.labels.size() != m.images.size()) bad("label table does not match image list");
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    if (m.labels[i].size() != m.tasks.size()) bad("label row size mismatch");
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
      const Label& l = m.labels[i][t];
      if (!l.present) continue;
      const std::string where = "image " + m.images[i].image_id + ", task " + m.tasks[t].name;
      if (m.tasks[t].kind == TaskKind::Binary) {
        if (l.value != 0 && l.value != 1) bad(where + ": binary label must be 0 or 1");
      } else {
        if (!(std::isfinite(l.time) && l.time > 0.0)) bad(where + ": hazard time must be > 0");
        if (l.event != 0 && l.event != 1) bad(where + ": event must be 0 or 1");
      }
    }
  }
}

json columns_to_json(const ColumnMapping& c) {
  return json{{"id", c.id},     {"x", c.x},
              {"y", c.y},       {"size", c.size},
              {"biomarkers", c.biomarkers}, {"cell_type", c.cell_type}};
}

ColumnMapping columns_from_json(const json& j) {
  ColumnMapping c;
  c.id = j.value("id", c.id);
  c.x = j.value("x", c.x);
  c.y = j.value("y", c.y);
  c.size = j.value("size", c.size);
  c.biomarkers = j.value("biomarkers", c.biomarkers);
  c.cell_type = j.value("cell_type", c.cell_type);
  return c;
}

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["images"] = json::array();
  for (const auto& img : m.images) {
    j["images"].push_back({{"image_id", img.image_id}, {"path", img.path}, {"group_id", img.group_id}});
  }
  j["splits"] = json::object();
  for (const auto& [g, s] : m.splits) j["splits"][g] = split_name(s);
  j["tasks"] = json::array();
  for (const auto& t : m.tasks) j["tasks"].push_back({{"name", t.name}, {"kind", task_kind_name(t.kind)}});
  j["labels"] = json::object();
  for (std::size_t i = 0; i < m.images.size(); ++i) {
    json row = json::object();
    for (std::size_t t = 0; t < m.tasks.size(); ++t) {
      const Label& l = m.labels[i][t];
      if (!l.present) {
        row[m.tasks[t].name] = nullptr;
      } else if (m.tasks[t].kind == TaskKind::Binary) {
        row[m.tasks[t].name] = l.value;
      } else {
        row[m.tasks[t].name] = {{"time", l.time}, {"event", l.event}};
      }
    }
    j["labels"][m.images[i].image_id] = row;
  }
  j["columns"] = columns_to_json(m.columns);
  return j;
}

DatasetManifest manifest_from_json(const json& j, std::filesystem::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  try {
    for (const auto& img : j.at("images")) {
      m.images.push_back({img.at("image_id").get<std::string>(), img.at("path").get<std::string>(),
                          img.at("group_id").get<std::string>()});
    }
    for (const auto& [g, s] : j.at("splits").items()) m.splits[g] = parse_split(s.get<std::string>());
    for (const auto& t : j.at("tasks")) {
      m.tasks.push_back({t.at("name").get<std::string>(), parse_task_kind(t.at("kind").get<std::string>())});
    }
    if (j.contains("columns")) m.columns = columns_from_json(j.at("columns"));
    const json& labels = j.contains("labels") ? j.at("labels") : json::object();
    std::set<std::string> known;
    for (const auto& img : m.images) known.insert(img.image_id);
    for (const auto& [id, _] : labels.items()) {
      if (!known.count(id)) bad("labels for unknown image \"" + id + "\"");
    }
    m.labels.assign(m.images.size(), std::vector<Label>(m.tasks.size()));
    for (std::size_t i = 0; i < m.images.size(); ++i) {
      auto it = labels.find(m.images[i].image_id);
      if (it == labels.end()) continue;
      for (const auto& [task, value] : it->items()) {
        const int t = m.task_index(task);
        if (t < 0) bad("image " + m.images[i].image_id + ": label for unknown task \"" + task + "\"");
        if (value.is_null()) continue;
        if (m.tasks[t].kind == TaskKind::Binary) {
          if (!value.is_number_integer()) bad("image " + m.images[i].image_id + ": binary label must be an integer");
          m.labels[i][t] = Label::binary(value.get<int>());
        } else {
          m.labels[i][t] = Label::hazard(value.at("time").get<double>(), value.at("event").get<int>());
        }
      }
    }
  } catch (const json::exception& e) {
    bad(std::string("malformed manifest: ") + e.what());
  }
  validate_manifest(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    bad("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

}  // namespace mew
