#include "mew/pipeline.hpp"

#include "mew/binary_io.hpp"
#include "mew/csv.hpp"
#include "mew/error.hpp"
#include "mew/geometry.hpp"
#include "mew/kernels.hpp"
#include "mew/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>

namespace mew {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i), m.row(i) + m.cols()));
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const std::size_t rows = j.size(), cols = rows == 0 ? 0 : j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (j.at(i).size() != cols) throw Error(Errc::InvalidConfig, "ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(i, c) = j.at(i).at(c).get<double>();
  }
  return m;
}

bool has_any_label(const CellTable& t) {
  return std::any_of(t.cell_type.begin(), t.cell_type.end(), [](const auto& c) { return c.has_value(); });
}

CellTable propagate_table(const CellTable& table) {
  CellTable t = table;
  if (t.cell_type.empty()) t.cell_type.assign(t.size_n(), std::nullopt);
  const auto pts = t.points();
  return propagate_labels(t, delaunay_adjacency(pts), 1000, 1e-9);
}

std::vector<Example> examples_for(const DatasetManifest& manifest, Split split,
                                  const std::function<PrecomputedFeatures(std::size_t)>& features) {
  std::vector<Example> out;
  for (std::size_t i : manifest.images_in(split)) {
    out.push_back({manifest.images[i].image_id, features(i), manifest.labels[i]});
  }
  return out;
}

}  // namespace

void Standardizer::apply(Matrix& features) const {
  if (empty()) return;
  if (features.cols() != mean.size()) throw Error(Errc::DimMismatch, "standardizer width differs from features");
  for (std::size_t i = 0; i < features.rows(); ++i) {
    double* r = features.row(i);
    for (std::size_t j = 0; j < mean.size(); ++j) r[j] = (r[j] - mean[j]) / scale[j];
  }
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean}, {"scale", scale}}; }

Standardizer Standardizer::from_json(const nlohmann::json& j) {
  Standardizer s;
  if (j.is_null()) return s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.scale = j.at("scale").get<std::vector<double>>();
  if (s.mean.size() != s.scale.size()) throw Error(Errc::InvalidConfig, "standardizer mean/scale lengths differ");
  return s;
}

Standardizer fit_standardizer(const std::vector<const CellTable*>& tables) {
  Standardizer s;
  if (tables.empty()) return s;
  const std::size_t f = tables.front()->feature_dim();
  std::vector<double> sum(f, 0.0);
  std::size_t count = 0;
  for (const CellTable* t : tables) {
    const Matrix x = t->features();
    if (x.cols() != f) throw Error(Errc::DimMismatch, "feature dimension differs across images");
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < f; ++j) sum[j] += x(i, j);
    count += x.rows();
  }
  s.mean.resize(f);
  for (std::size_t j = 0; j < f; ++j) s.mean[j] = sum[j] / static_cast<double>(count);
  std::vector<double> sq(f, 0.0);
  for (const CellTable* t : tables) {
    const Matrix x = t->features();
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < f; ++j) sq[j] += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
  }
  s.scale.resize(f);
  for (std::size_t j = 0; j < f; ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(count));
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

nlohmann::json CentroidTyping::to_json() const {
  return {{"centroids", matrix_to_json(centroids)}, {"mean", column_mean}, {"scale", column_scale}};
}

CentroidTyping CentroidTyping::from_json(const nlohmann::json& j) {
  CentroidTyping c;
  c.centroids = matrix_from_json(j.at("centroids"));
  c.column_mean = j.at("mean").get<std::vector<double>>();
  c.column_scale = j.at("scale").get<std::vector<double>>();
  return c;
}

CellTable assign_centroid_types(const CellTable& table, const CentroidTyping& typing) {
  const std::size_t dim = table.biomarker_dim();
  if (typing.centroids.cols() != dim) throw Error(Errc::DimMismatch, "centroid width differs from biomarkers");
  CellTable t = table;
  t.cell_type.assign(t.size_n(), std::nullopt);
  std::vector<double> z(dim);
  for (std::size_t i = 0; i < t.size_n(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) z[j] = (t.biomarkers(i, j) - typing.column_mean[j]) / typing.column_scale[j];
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < typing.centroids.rows(); ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < dim; ++j) d += (z[j] - typing.centroids(c, j)) * (z[j] - typing.centroids(c, j));
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    t.cell_type[i] = std::to_string(best);
  }
  return t;
}

nlohmann::json BuildInfo::to_json() const {
  nlohmann::json j = {{"hops", options.hops},
                      {"seed", options.seed},
                      {"stochastic", options.stochastic},
                      {"resample_each_epoch", options.resample_each_epoch},
                      {"standardize", options.standardize},
                      {"kmeans_k", options.kmeans_k},
                      {"pair_cap", options.pair_cap},
                      {"typing", typing},
                      {"columns", columns_to_json(columns)},
                      {"feature_dim", feature_dim}};
  j["standardizer"] = standardizer.empty() ? nlohmann::json(nullptr) : standardizer.to_json();
  j["centroids"] = centroids ? centroids->to_json() : nlohmann::json(nullptr);
  return j;
}

BuildInfo BuildInfo::from_json(const nlohmann::json& j) {
  BuildInfo b;
  try {
    b.options.hops = j.at("hops").get<int>();
    b.options.seed = j.at("seed").get<std::uint64_t>();
    b.options.stochastic = j.at("stochastic").get<bool>();
    b.options.resample_each_epoch = j.at("resample_each_epoch").get<bool>();
    b.options.standardize = j.at("standardize").get<bool>();
    b.options.kmeans_k = j.at("kmeans_k").get<int>();
    b.options.pair_cap = j.at("pair_cap").get<std::uint64_t>();
    b.typing = j.at("typing").get<std::string>();
    b.columns = columns_from_json(j.at("columns"));
    b.feature_dim = j.at("feature_dim").get<std::size_t>();
    b.standardizer = Standardizer::from_json(j.at("standardizer"));
    if (!j.at("centroids").is_null()) b.centroids = CentroidTyping::from_json(j.at("centroids"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("build settings: ") + e.what());
  }
  return b;
}

CellTable type_table(const CellTable& table, const BuildInfo& info) {
  if (table.has_cell_type_column() && table.fully_typed()) return table;
  if (!has_any_label(table)) {
    if (info.centroids) return assign_centroid_types(table, *info.centroids);
    throw Error(Errc::NoSeedLabels, "image " + table.image_id + " has no cell-type labels");
  }
  return propagate_table(table);
}

PreparedDataset prepare_dataset(const std::filesystem::path& manifest_path, const BuildOptions& options) {
  PreparedDataset d;
  d.manifest = load_manifest(manifest_path);
  validate_manifest(d.manifest);
  d.info.options = options;
  d.info.columns = d.manifest.columns;
  for (std::size_t i = 0; i < d.manifest.images.size(); ++i) {
    CellTable t = load_cell_table(d.manifest.table_path(i), d.manifest.columns, d.manifest.images[i].image_id);
    validate_cell_table(t);
    d.tables.push_back(std::move(t));
  }
  if (d.tables.empty()) throw Error(Errc::InvalidManifest, "manifest lists no images");
  d.info.feature_dim = d.tables.front().feature_dim();
  for (const CellTable& t : d.tables) {
    if (t.feature_dim() != d.info.feature_dim) {
      throw Error(Errc::DimMismatch, "image " + t.image_id + " has a different biomarker count");
    }
  }

  const bool all_typed = std::all_of(d.tables.begin(), d.tables.end(),
                                     [](const CellTable& t) { return t.has_cell_type_column() && t.fully_typed(); });
  const bool any_label = std::any_of(d.tables.begin(), d.tables.end(), has_any_label);
  if (all_typed) {
    d.info.typing = "given";
  } else if (!any_label) {
    KMeansOptions ko;
    ko.k = options.kmeans_k;
    ko.seed = derive_seed(options.seed, 0x6b6d);
    KMeansResult km = kmeans_celltype(d.tables, ko);
    d.tables = std::move(km.tables);
    d.info.centroids = CentroidTyping{std::move(km.centroids), std::move(km.column_mean), std::move(km.column_scale)};
    d.info.typing = "kmeans";
    spdlog::info("no cell types given; clustered biomarkers into {} types", options.kmeans_k);
  } else {
    for (CellTable& t : d.tables) {
      if (!(t.has_cell_type_column() && t.fully_typed())) t = propagate_table(t);
    }
    d.info.typing = "propagation";
  }

  if (options.standardize) {
    std::vector<const CellTable*> fit;
    for (std::size_t i : d.manifest.images_in(Split::Train)) fit.push_back(&d.tables[i]);
    if (fit.empty()) {
      for (const CellTable& t : d.tables) fit.push_back(&t);
    }
    d.info.standardizer = fit_standardizer(fit);
  }
  return d;
}

MultiplexGraph build_graph(const CellTable& typed, const Standardizer& standardizer) {
  const auto pts = typed.points();
  MultiplexGraph g = assemble_multiplex(typed, delaunay_adjacency(pts));
  standardizer.apply(g.features);
  return g;
}

std::uint64_t image_seed(std::uint64_t seed, const std::string& image_id) { return derive_seed(seed, fnv1a(image_id)); }

PrecomputeOptions precompute_options(const BuildOptions& options, const std::string& image_id) {
  PrecomputeOptions p;
  p.hops = options.hops;
  p.seed = image_seed(options.seed, image_id);
  p.stochastic = options.stochastic;
  p.resample_each_epoch = options.resample_each_epoch;
  p.pair_cap = options.pair_cap;
  return p;
}

std::string hash_hex(std::string_view bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
  return buf;
}

BuildReport build_caches(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                         const BuildOptions& options) {
  const auto t0 = Clock::now();
  if (options.hops < 1) throw Error(Errc::InvalidConfig, "hops must be at least 1");
  const PreparedDataset d = prepare_dataset(manifest_path, options);
  std::error_code ec;
  std::filesystem::create_directories(cache_dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + cache_dir.string() + ": " + ec.message());

  const std::size_t n = d.tables.size();
  std::vector<std::string> hashes(n);
  std::vector<std::exception_ptr> errors(n);
  const int workers = options.workers > 0 ? options.workers : kernels::thread_count();
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      const std::string& id = d.manifest.images[i].image_id;
      const MultiplexGraph g = build_graph(d.tables[i], d.info.standardizer);
      const std::string bytes = encode_cache(precompute_image(g, precompute_options(options, id)));
      binio::write_file((cache_dir / (id + ".mewp")).string(), bytes);
      hashes[i] = hash_hex(bytes);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  BuildReport r;
  r.index = d.info.to_json();
  r.index["format"] = kCacheVersion;
  nlohmann::json images = nlohmann::json::object();
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& id = d.manifest.images[i].image_id;
    images[id] = {{"path", id + ".mewp"}, {"hash", hashes[i]}};
  }
  r.index["images"] = images;
  std::ofstream out(cache_dir / "index.json");
  if (!out) throw Error(Errc::Io, "cannot write " + (cache_dir / "index.json").string());
  out << r.index.dump(2) << '\n';
  r.seconds = seconds_since(t0);
  return r;
}

CacheIndex load_cache_index(const std::filesystem::path& cache_dir) {
  const auto path = cache_dir / "index.json";
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingCache, "no cache index at " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
  CacheIndex idx;
  idx.dir = cache_dir;
  idx.info = BuildInfo::from_json(j);
  try {
    for (const auto& [id, e] : j.at("images").items()) {
      idx.entries[id] = {e.at("path").get<std::string>(), e.at("hash").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::Io, path.string() + ": " + e.what());
  }
  return idx;
}

std::filesystem::path CacheIndex::path_of(const std::string& image_id) const {
  auto it = entries.find(image_id);
  if (it == entries.end()) throw Error(Errc::MissingCache, "no cache entry for image " + image_id);
  return dir / it->second.first;
}

std::vector<Example> load_examples(const DatasetManifest& manifest, const CacheIndex& index, Split split) {
  return examples_for(manifest, split, [&](std::size_t i) {
    const std::string& id = manifest.images[i].image_id;
    const auto path = index.path_of(id);
    if (!std::filesystem::exists(path)) throw Error(Errc::MissingCache, "missing cache file " + path.string());
    const std::string bytes = binio::read_file(path.string());
    if (hash_hex(bytes) != index.entries.at(id).second) {
      throw Error(Errc::HashMismatch, "cache file " + path.string() + " does not match its recorded hash");
    }
    return decode_cache(bytes);
  });
}

std::vector<Example> recompute_examples(const DatasetManifest& manifest, const BuildInfo& info, Split split) {
  return examples_for(manifest, split, [&](std::size_t i) {
    const std::string& id = manifest.images[i].image_id;
    CellTable t = load_cell_table(manifest.table_path(i), info.columns, id);
    validate_cell_table(t);
    const MultiplexGraph g = build_graph(type_table(t, info), info.standardizer);
    return precompute_image(g, precompute_options(info.options, id));
  });
}

TrainOutcome train_from_cache(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                              const TrainConfig& config) {
  validate_train_config(config);
  const DatasetManifest manifest = load_manifest(manifest_path);
  validate_manifest(manifest);
  const CacheIndex index = load_cache_index(cache_dir);
  if (config.hops > index.info.options.hops) {
    throw Error(Errc::InvalidConfig, "config asks for " + std::to_string(config.hops) + " hops but the cache holds " +
                                         std::to_string(index.info.options.hops));
  }
  std::vector<Example> train_set = load_examples(manifest, index, Split::Train);
  const std::vector<Example> val_set = load_examples(manifest, index, Split::Val);

  TrainOutcome out;
  out.model = make_model_config(config, index.info.feature_dim, manifest.tasks);

  Resampler resample;
  std::vector<MultiplexGraph> graphs;
  if (index.info.options.resample_each_epoch && index.info.options.stochastic) {
    for (std::size_t i : manifest.images_in(Split::Train)) {
      CellTable t = load_cell_table(manifest.table_path(i), index.info.columns, manifest.images[i].image_id);
      validate_cell_table(t);
      graphs.push_back(build_graph(type_table(t, index.info), index.info.standardizer));
    }
    resample = [&](int epoch, std::vector<Example>& train) {
      for (std::size_t k = 0; k < train.size(); ++k) {
        PrecomputeOptions p = precompute_options(index.info.options, train[k].image_id);
        p.seed = derive_seed(p.seed, static_cast<std::uint64_t>(epoch));
        train[k].features.celltype_hops = precompute_celltype_hops(graphs[k], graphs[k].features, p);
      }
    };
  }
  out.result = train(config, out.model, train_set, val_set, resample);
  out.checkpoint_metadata = {{"build", index.info.to_json()},
                             {"train", train_config_to_json(config)},
                             {"best_epoch", out.result.best_epoch}};
  return out;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json metrics_json = nlohmann::json::array();
  for (const TaskMetric& m : metrics) {
    metrics_json.push_back({{"task", m.task},
                            {"metric", m.metric},
                            {"value", m.defined ? nlohmann::json(m.value) : nlohmann::json(nullptr)},
                            {"labeled", m.labeled},
                            {"comparable_pairs", m.comparable_pairs},
                            {"tied_pairs", m.tied_pairs}});
  }
  return {{"split", split},
          {"images", image_ids.size()},
          {"metrics", metrics_json},
          {"mean_alpha_voronoi", mean_alpha_voronoi},
          {"mean_alpha_celltype", 1.0 - mean_alpha_voronoi},
          {"timings", {{"load_seconds", timings.load_seconds},
                       {"forward_seconds", timings.forward_seconds},
                       {"total_seconds", timings.total_seconds}}}};
}

std::string EvalReport::scores_csv(const ModelConfig& config) const {
  std::ostringstream out;
  out << "image_id";
  for (const TaskSpec& t : config.tasks) out << ',' << t.name;
  out << ",mean_alpha_voronoi\n";
  for (std::size_t i = 0; i < image_ids.size(); ++i) {
    out << image_ids[i];
    for (double s : predictions[i].scores) out << ',' << csv::format_double(s);
    out << ',' << csv::format_double(predictions[i].mean_alpha_voronoi) << '\n';
  }
  return out.str();
}

EvalReport evaluate_split(const std::filesystem::path& manifest_path, const std::filesystem::path& cache_dir,
                          const Checkpoint& checkpoint, Split split, bool recompute) {
  const auto t0 = Clock::now();
  const DatasetManifest manifest = load_manifest(manifest_path);
  validate_manifest(manifest);
  if (manifest.tasks != checkpoint.params.config().tasks) {
    throw Error(Errc::InvalidConfig, "checkpoint tasks differ from the manifest tasks");
  }
  std::vector<Example> examples;
  if (recompute) {
    examples = recompute_examples(manifest, BuildInfo::from_json(checkpoint.metadata.at("build")), split);
  } else {
    examples = load_examples(manifest, load_cache_index(cache_dir), split);
  }
  EvalReport r;
  r.split = std::string(split_name(split));
  r.timings.load_seconds = seconds_since(t0);
  const auto t1 = Clock::now();
  double alpha_sum = 0.0;
  for (const Example& ex : examples) {
    r.image_ids.push_back(ex.image_id);
    r.predictions.push_back(predict(checkpoint.params, ex.features));
    alpha_sum += r.predictions.back().mean_alpha_voronoi;
  }
  r.timings.forward_seconds = seconds_since(t1);
  r.metrics = evaluate_predictions(checkpoint.params.config(), examples, r.predictions);
  r.mean_alpha_voronoi = examples.empty() ? 0.5 : alpha_sum / static_cast<double>(examples.size());
  r.timings.total_seconds = seconds_since(t0);
  return r;
}

nlohmann::json predict_table(const Checkpoint& checkpoint, const std::filesystem::path& cells_path) {
  const BuildInfo info = BuildInfo::from_json(checkpoint.metadata.at("build"));
  const std::string id = cells_path.stem().string();
  CellTable t = load_cell_table(cells_path, info.columns, id);
  validate_cell_table(t);
  const MultiplexGraph g = build_graph(type_table(t, info), info.standardizer);
  const PrecomputedFeatures pf = precompute_image(g, precompute_options(info.options, id));
  const ForwardTrace trace = full_forward(checkpoint.params, pf, Mode::Eval);
  const ModelConfig& c = checkpoint.params.config();
  nlohmann::json tasks = nlohmann::json::object();
  for (std::size_t k = 0; k < c.tasks.size(); ++k) {
    tasks[c.tasks[k].name] = {{"kind", task_kind_name(c.tasks[k].kind)},
                              {"score", task_score(c, k, trace.heads[k].pooled)},
                              {"pooled", trace.heads[k].pooled}};
  }
  return {{"image_id", id},
          {"cells", g.n},
          {"tasks", tasks},
          {"mean_alpha_voronoi", trace.mean_alpha_voronoi()},
          {"mean_alpha_celltype", trace.mean_alpha_celltype()}};
}

Diagnostics diagnose_dataset(const std::filesystem::path& manifest_path, int kmeans_k,
                             const std::filesystem::path& edge_dump_dir) {
  BuildOptions bo;
  bo.standardize = false;
  bo.kmeans_k = kmeans_k;
  const PreparedDataset d = prepare_dataset(manifest_path, bo);
  if (!edge_dump_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(edge_dump_dir, ec);
    if (ec) throw Error(Errc::Io, "cannot create " + edge_dump_dir.string());
  }
  Diagnostics out;
  nlohmann::json images = nlohmann::json::array();
  for (std::size_t i = 0; i < d.tables.size(); ++i) {
    const MultiplexGraph g = build_graph(d.tables[i], Standardizer{});
    const double h = homophily_ratio(g.voronoi, g.type_codes);
    out.homophily.push_back(h);
    out.cell_counts.push_back(static_cast<double>(g.n));
    std::size_t types = 0;
    for (const auto& grp : g.celltype.groups()) types += grp.empty() ? 0 : 1;
    images.push_back({{"image_id", g.image_id},
                      {"cells", g.n},
                      {"voronoi_edges", g.voronoi.size()},
                      {"homophily", h},
                      {"cell_types", types},
                      {"celltype_pairs", g.celltype.pair_count()}});
    if (!edge_dump_dir.empty()) {
      std::ofstream e(edge_dump_dir / (g.image_id + "_edges.csv"));
      if (!e) throw Error(Errc::Io, "cannot write edge dump for " + g.image_id);
      e << "i,j,distance\n";
      for (const Edge& edge : g.voronoi) e << edge.i << ',' << edge.j << ',' << csv::format_double(edge.d) << '\n';
    }
  }
  auto summary = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return nlohmann::json{{"mean", s / static_cast<double>(v.size())},
                          {"min", *std::min_element(v.begin(), v.end())},
                          {"max", *std::max_element(v.begin(), v.end())}};
  };
  out.report = {{"images", images},
                {"typing", d.info.typing},
                {"homophily", summary(out.homophily)},
                {"cells", summary(out.cell_counts)}};
  return out;
}

std::string histogram_svg(const std::vector<double>& values, int bins, const std::string& title,
                          const std::string& x_label) {
  const int w = 480, h = 320, left = 50, right = 20, top = 40, bottom = 50;
  double lo = values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
  double hi = values.empty() ? 1.0 : *std::max_element(values.begin(), values.end());
  if (hi <= lo) hi = lo + 1.0;
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / (hi - lo) * bins);
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  const int peak = std::max(1, *std::max_element(counts.begin(), counts.end()));
  const double bw = static_cast<double>(w - left - right) / bins;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  s << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
  for (int b = 0; b < bins; ++b) {
    const double bh = static_cast<double>(h - top - bottom) * counts[static_cast<std::size_t>(b)] / peak;
    s << "<rect x=\"" << left + b * bw << "\" y=\"" << h - bottom - bh << "\" width=\"" << bw - 1 << "\" height=\""
      << bh << "\" fill=\"#4c72b0\"/>\n";
  }
  s << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
    << "\" stroke=\"black\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", lo);
  s << "<text x=\"" << left << "\" y=\"" << h - bottom + 16 << "\" font-family=\"sans-serif\" font-size=\"11\">"
    << buf << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.3g", hi);
  s << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 16
    << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << buf << "</text>\n";
  s << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
    << "font-size=\"12\">" << x_label << "</text>\n";
  s << "<text x=\"14\" y=\"" << top + 10 << "\" font-family=\"sans-serif\" font-size=\"11\">max " << peak
    << "</text>\n</svg>\n";
  return s.str();
}

}  // namespace mew
