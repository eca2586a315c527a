#include "mew/synth.hpp"

#include "mew/error.hpp"
#include "mew/geometry.hpp"
#include "mew/multiplex.hpp"
#include "mew/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>

namespace mew {

namespace {

std::string_view mechanism_name(Mechanism m) { return m == Mechanism::Composition ? "composition" : "geometry"; }

Mechanism parse_mechanism(const std::string& s) {
  if (s == "composition") return Mechanism::Composition;
  if (s == "geometry") return Mechanism::Geometry;
  throw Error(Errc::InvalidConfig, "unknown mechanism \"" + s + "\"");
}

void validate(const SynthConfig& c) {
  auto bad = [](const std::string& msg) { throw Error(Errc::InvalidConfig, msg); };
  if (c.images < 1) bad("images must be at least 1");
  if (c.cells_min < 3 || c.cells_max < c.cells_min) bad("need 3 <= cells_min <= cells_max");
  if (!(c.width > 0.0)) bad("width must be positive");
  if (c.num_types < 2) bad("num_types must be at least 2");
  if (c.num_biomarkers < 1) bad("num_biomarkers must be at least 1");
  if (c.domains < 1) bad("domains must be at least 1");
  if (!(c.mixing >= 0.0 && c.mixing <= 1.0)) bad("mixing must be in [0, 1]");
  if (!(c.designated_min >= 0.0 && c.designated_min <= c.designated_max && c.designated_max <= 1.0)) {
    bad("need 0 <= designated_min <= designated_max <= 1");
  }
  if (!(c.geometry_share > 0.0 && c.geometry_share < 1.0)) bad("geometry_share must be in (0, 1)");
  if (c.groups < 1 || c.val_groups < 0 || c.test_groups < 0 || c.val_groups + c.test_groups >= c.groups) {
    bad("need val_groups + test_groups < groups");
  }
  if (c.tasks.empty()) bad("at least one task is required");
  if (!(c.hazard_base_rate > 0.0) || !(c.censor_max > 0.0)) bad("hazard_base_rate and censor_max must be positive");
  if (!(c.unlabeled_fraction >= 0.0 && c.unlabeled_fraction < 1.0)) bad("unlabeled_fraction must be in [0, 1)");
}

std::size_t sample_category(std::span<const double> weights, double u) {
  double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i] / total;
    if (u < acc) return i;
  }
  return weights.size() - 1;
}

std::vector<std::vector<double>> type_means(const SynthConfig& c, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xa11));
  const auto types = static_cast<std::size_t>(c.num_types);
  const auto markers = static_cast<std::size_t>(c.num_biomarkers);
  std::vector<std::vector<double>> mu(types, std::vector<double>(markers, 0.0));
  for (std::size_t t = 1; t < types; ++t) {
    for (double& v : mu[t]) v = c.type_separation * standard_normal(rng);
  }
  // The designated type sits at the centroid of the others, and on marker 0
  // the others alternate between +separation and -separation.
  for (std::size_t b = 0; b < markers; ++b) {
    double mean = 0.0;
    for (std::size_t t = 1; t < types; ++t) mean += mu[t][b];
    mean /= static_cast<double>(types - 1);
    for (std::size_t t = 1; t < types; ++t) mu[t][b] -= mean;
  }
  if (c.mechanism == Mechanism::Geometry) {
    // Geometry images share one composition, so marker 0 simply flags the designated type.
    for (std::size_t t = 1; t < types; ++t) mu[t][0] = 0.0;
    mu[0][0] = 2.0 * c.type_separation;
    return mu;
  }
  for (std::size_t t = 1; t < types; ++t) mu[t][0] = (t % 2 == 1 ? 1.0 : -1.0) * c.type_separation;
  if ((types - 1) % 2 == 1) mu[types - 1][0] = 0.0;
  return mu;
}

/// Domain mechanism over the cells still marked -1. `weights[t]` is the
/// share of type t among those cells.
void assign_domains(const SynthConfig& c, std::span<const Point> pts, std::span<const double> weights, double mixing,
                    Rng& rng, std::vector<int>& types) {
  std::vector<Point> centers(static_cast<std::size_t>(c.domains));
  std::vector<int> domain_type(centers.size());
  for (std::size_t d = 0; d < centers.size(); ++d) {
    centers[d] = {uniform(rng, 0.0, c.width), uniform(rng, 0.0, c.width)};
    domain_type[d] = static_cast<int>(sample_category(weights, uniform01(rng)));
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    // Both draws are always taken so that images at different mixing
    // levels share their random numbers.
    const double u_mix = uniform01(rng);
    const double u_type = uniform01(rng);
    if (types[i] >= 0) continue;
    std::size_t best = 0;
    double best_d = distance(pts[i], centers[0]);
    for (std::size_t d = 1; d < centers.size(); ++d) {
      const double dd = distance(pts[i], centers[d]);
      if (dd < best_d) {
        best_d = dd;
        best = d;
      }
    }
    types[i] = u_mix < mixing ? static_cast<int>(sample_category(weights, u_type)) : domain_type[best];
  }
}

}  // namespace

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "synth config must be a JSON object");
  static const std::set<std::string> known = {
      "images", "cells_min", "cells_max", "width", "num_types", "num_biomarkers", "type_separation",
      "marker_noise", "batch_shift", "domains", "mixing", "homophily_target", "mechanism", "designated_min",
      "designated_max", "threshold", "geometry_share", "groups", "val_groups", "test_groups", "tasks",
      "hazard_base_rate", "hazard_beta", "censor_max", "unlabeled_fraction", "emit_cell_types"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw Error(Errc::InvalidConfig, "unknown synth config key \"" + key + "\"");
  }
  SynthConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("images", c.images);
    get("cells_min", c.cells_min);
    get("cells_max", c.cells_max);
    get("width", c.width);
    get("num_types", c.num_types);
    get("num_biomarkers", c.num_biomarkers);
    get("type_separation", c.type_separation);
    get("marker_noise", c.marker_noise);
    get("batch_shift", c.batch_shift);
    get("domains", c.domains);
    get("mixing", c.mixing);
    get("homophily_target", c.homophily_target);
    if (j.contains("mechanism")) c.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());
    get("designated_min", c.designated_min);
    get("designated_max", c.designated_max);
    get("threshold", c.threshold);
    get("geometry_share", c.geometry_share);
    get("groups", c.groups);
    get("val_groups", c.val_groups);
    get("test_groups", c.test_groups);
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j.at("tasks")) {
        c.tasks.push_back({t.at("name").get<std::string>(), parse_task_kind(t.at("kind").get<std::string>())});
      }
    }
    get("hazard_base_rate", c.hazard_base_rate);
    get("hazard_beta", c.hazard_beta);
    get("censor_max", c.censor_max);
    get("unlabeled_fraction", c.unlabeled_fraction);
    get("emit_cell_types", c.emit_cell_types);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("synth config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json synth_config_to_json(const SynthConfig& c) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const TaskSpec& t : c.tasks) tasks.push_back({{"name", t.name}, {"kind", task_kind_name(t.kind)}});
  return {{"images", c.images},
          {"cells_min", c.cells_min},
          {"cells_max", c.cells_max},
          {"width", c.width},
          {"num_types", c.num_types},
          {"num_biomarkers", c.num_biomarkers},
          {"type_separation", c.type_separation},
          {"marker_noise", c.marker_noise},
          {"batch_shift", c.batch_shift},
          {"domains", c.domains},
          {"mixing", c.mixing},
          {"homophily_target", c.homophily_target},
          {"mechanism", mechanism_name(c.mechanism)},
          {"designated_min", c.designated_min},
          {"designated_max", c.designated_max},
          {"threshold", c.threshold},
          {"geometry_share", c.geometry_share},
          {"groups", c.groups},
          {"val_groups", c.val_groups},
          {"test_groups", c.test_groups},
          {"tasks", tasks},
          {"hazard_base_rate", c.hazard_base_rate},
          {"hazard_beta", c.hazard_beta},
          {"censor_max", c.censor_max},
          {"unlabeled_fraction", c.unlabeled_fraction},
          {"emit_cell_types", c.emit_cell_types}};
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return synth_config_from_json(j);
}

SynthImage generate_image(const SynthConfig& c, std::uint64_t seed, int index, double mixing) {
  validate(c);
  const auto mu = type_means(c, seed);
  Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(index)));
  const std::size_t n = static_cast<std::size_t>(c.cells_min) +
                        uniform_index(rng, static_cast<std::uint64_t>(c.cells_max - c.cells_min + 1));
  const std::size_t types_n = static_cast<std::size_t>(c.num_types);

  std::vector<Point> pts(n);
  for (Point& p : pts) p = {uniform(rng, 0.0, c.width), uniform(rng, 0.0, c.width)};

  SynthImage img;
  const double share = c.mechanism == Mechanism::Composition ? uniform(rng, c.designated_min, c.designated_max)
                                                             : c.geometry_share;
  std::vector<double> weights(types_n);
  weights[0] = share;
  double rest = 0.0;
  // Gamma(4, 1) draws keep the non-designated shares from getting extreme.
  for (std::size_t t = 1; t < types_n; ++t) {
    weights[t] = 0.0;
    for (int r = 0; r < 4; ++r) weights[t] += exponential(rng, 1.0);
    rest += weights[t];
  }
  for (std::size_t t = 1; t < types_n; ++t) weights[t] *= (1.0 - share) / rest;

  std::vector<int> types(n, -1);
  if (c.mechanism == Mechanism::Geometry) {
    img.clustered = bernoulli(rng, 0.5);
    const std::size_t k = static_cast<std::size_t>(std::lround(share * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (img.clustered) {
      const Point center{uniform(rng, 0.25 * c.width, 0.75 * c.width), uniform(rng, 0.25 * c.width, 0.75 * c.width)};
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return distance(pts[a], center) < distance(pts[b], center);
      });
    } else {
      for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + uniform_index(rng, n - i)]);
    }
    for (std::size_t i = 0; i < k; ++i) types[order[i]] = 0;
    weights[0] = 0.0;
  }
  assign_domains(c, pts, weights, mixing, rng, types);

  std::vector<double> shift(static_cast<std::size_t>(c.num_biomarkers));
  for (double& s : shift) s = c.batch_shift * standard_normal(rng);

  CellTable& t = img.table;
  char id[32];
  std::snprintf(id, sizeof id, "img_%03d", index);
  t.image_id = id;
  t.biomarkers = Matrix(n, static_cast<std::size_t>(c.num_biomarkers));
  for (int b = 0; b < c.num_biomarkers; ++b) t.biomarker_names.push_back("m" + std::to_string(b));
  std::size_t designated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t.cell_ids.push_back(static_cast<std::int64_t>(i));
    t.x.push_back(pts[i].x);
    t.y.push_back(pts[i].y);
    t.size.push_back(40.0 * std::exp(0.25 * standard_normal(rng)));
    const auto& m = mu[static_cast<std::size_t>(types[i])];
    for (std::size_t b = 0; b < m.size(); ++b) t.biomarkers(i, b) = m[b] + shift[b] + c.marker_noise * standard_normal(rng);
    if (types[i] == 0) ++designated;
  }
  if (c.emit_cell_types) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool drop = c.unlabeled_fraction > 0.0 && bernoulli(rng, c.unlabeled_fraction);
      if (drop) {
        t.cell_type.emplace_back(std::nullopt);
      } else {
        t.cell_type.emplace_back("T" + std::to_string(types[i]));
      }
    }
  }
  img.types = std::move(types);
  img.designated_share = static_cast<double>(designated) / static_cast<double>(n);

  const double z = c.mechanism == Mechanism::Composition
                       ? (img.designated_share - 0.5 * (c.designated_min + c.designated_max)) /
                             std::max(c.designated_max - c.designated_min, 1e-12)
                       : (img.clustered ? 0.5 : -0.5);
  for (const TaskSpec& task : c.tasks) {
    if (task.kind == TaskKind::Binary) {
      const bool positive = c.mechanism == Mechanism::Composition ? img.designated_share > c.threshold : img.clustered;
      img.labels.push_back(Label::binary(positive ? 1 : 0));
    } else {
      const double rate = c.hazard_base_rate * std::exp(c.hazard_beta * z);
      const double event_time = exponential(rng, rate);
      const double censor_time = uniform(rng, 0.0, c.censor_max);
      img.labels.push_back(event_time <= censor_time ? Label::hazard(event_time, 1) : Label::hazard(censor_time, 0));
    }
  }
  return img;
}

double pilot_homophily(const SynthConfig& config, std::uint64_t seed, double mixing, int count) {
  double sum = 0.0;
  for (int i = 0; i < count; ++i) {
    const SynthImage img = generate_image(config, derive_seed(seed, 0x9170), i, mixing);
    const auto pts = img.table.points();
    sum += homophily_ratio(delaunay_adjacency(pts), img.types);
  }
  return sum / count;
}

double calibrate_mixing(const SynthConfig& config, std::uint64_t seed) {
  if (config.homophily_target <= 0.0) return config.mixing;
  constexpr int kPilots = 48;
  const double target = config.homophily_target;
  if (pilot_homophily(config, seed, 0.0, kPilots) <= target) return 0.0;
  if (pilot_homophily(config, seed, 1.0, kPilots) >= target) return 1.0;
  double lo = 0.0, hi = 1.0;  // homophily falls as mixing grows
  for (int it = 0; it < 16; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (pilot_homophily(config, seed, mid, kPilots) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  SynthDataset d;
  d.mixing = calibrate_mixing(config, seed);
  DatasetManifest& m = d.manifest;
  m.tasks = config.tasks;
  for (int g = 0; g < config.groups; ++g) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cs_%02d", g);
    const Split s = g < config.test_groups                       ? Split::Test
                    : g < config.test_groups + config.val_groups ? Split::Val
                                                                 : Split::Train;
    m.splits[buf] = s;
  }
  for (int i = 0; i < config.images; ++i) {
    SynthImage img = generate_image(config, seed, i, d.mixing);
    char group[32];
    std::snprintf(group, sizeof group, "cs_%02d", i % config.groups);
    m.images.push_back({img.table.image_id, "cells/" + img.table.image_id + ".csv", group});
    m.labels.push_back(img.labels);
    const auto pts = img.table.points();
    d.homophily.push_back(homophily_ratio(delaunay_adjacency(pts), img.types));
    d.images.push_back(std::move(img));
  }
  return d;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& data, const SynthConfig& config,
                   std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "cells", ec);
  if (ec) throw Error(Errc::Io, "cannot create " + (dir / "cells").string() + ": " + ec.message());
  for (const SynthImage& img : data.images) {
    write_cell_table(dir / "cells" / (img.table.image_id + ".csv"), img.table);
  }
  save_manifest(dir / "manifest.json", data.manifest);
  double mean = 0.0;
  for (double h : data.homophily) mean += h;
  mean /= static_cast<double>(std::max<std::size_t>(data.homophily.size(), 1));
  nlohmann::json report = {{"seed", seed},
                           {"mixing", data.mixing},
                           {"homophily_target", config.homophily_target},
                           {"homophily_mean", mean},
                           {"homophily", data.homophily},
                           {"config", synth_config_to_json(config)}};
  std::ofstream out(dir / "synth_report.json");
  if (!out) throw Error(Errc::Io, "cannot write synth_report.json");
  out << report.dump(2) << '\n';
}

}  // namespace mew
