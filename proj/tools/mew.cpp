// mew: command-line front end for the multiplex cell-graph pipeline.
//
// Exit codes: 0 ok, 2 invalid input or configuration, 3 runtime failure.
// Errors are reported as one JSON object on stderr.

#include "mew/binary_io.hpp"
#include "mew/checkpoint.hpp"
#include "mew/error.hpp"
#include "mew/kernels.hpp"
#include "mew/pipeline.hpp"
#include "mew/synth.hpp"
#include "mew/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

using Clock = std::chrono::steady_clock;

std::optional<int> env_threads() {
  if (const char* env = std::getenv("MEW_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::nullopt;
}

std::string file_hash(const fs::path& p) { return mew::hash_hex(mew::binio::read_file(p.string())); }

/// Record of one invocation: resolved settings, seeds, input hashes and
/// per-stage wall-clock times.
class RunManifest {
 public:
  explicit RunManifest(std::string command) : command_(std::move(command)), start_(Clock::now()) {}

  void set(const std::string& key, json value) { config_[key] = std::move(value); }
  void seed(const std::string& key, std::uint64_t value) { seeds_[key] = value; }
  void input(const fs::path& p) { inputs_[p.string()] = file_hash(p); }

  template <class Fn>
  auto stage(const std::string& name, Fn&& fn) {
    const auto t0 = Clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings_[name] = std::chrono::duration<double>(Clock::now() - t0).count();
    } else {
      auto r = fn();
      timings_[name] = std::chrono::duration<double>(Clock::now() - t0).count();
      return r;
    }
  }

  json to_json() const {
    json t = timings_;
    t["total"] = std::chrono::duration<double>(Clock::now() - start_).count();
    return {{"command", command_},  {"tool_version", kVersion},
            {"config", config_},    {"seeds", seeds_},
            {"inputs", inputs_},    {"timings", t},
            {"threads", mew::kernels::thread_count()}};
  }

  void write(const fs::path& p) const {
    std::ofstream out(p);
    if (!out) throw mew::Error(mew::Errc::Io, "cannot write " + p.string());
    out << to_json().dump(2) << '\n';
  }

 private:
  std::string command_;
  Clock::time_point start_;
  json config_ = json::object();
  json seeds_ = json::object();
  json inputs_ = json::object();
  json timings_ = json::object();
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw mew::Error(mew::Errc::Io, "cannot write " + p.string());
  out << text;
}

fs::path parent_or_cwd(const fs::path& p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

// ---------------------------------------------------------------- commands

struct SynthArgs {
  std::string config, out;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a) {
  RunManifest run("synth");
  mew::SynthConfig cfg;
  if (!a.config.empty()) {
    cfg = mew::load_synth_config(a.config);
    run.input(a.config);
  }
  run.set("config", mew::synth_config_to_json(cfg));
  run.set("out", a.out);
  run.seed("seed", a.seed);
  const mew::SynthDataset data = run.stage("generate", [&] { return mew::generate_dataset(cfg, a.seed); });
  run.stage("write", [&] { mew::write_dataset(a.out, data, cfg, a.seed); });
  run.set("mixing", data.mixing);
  run.write(fs::path(a.out) / "run_synth.json");
  double mean = 0.0;
  for (double h : data.homophily) mean += h;
  std::cout << json{{"images", data.images.size()},
                    {"mixing", data.mixing},
                    {"homophily_mean", mean / static_cast<double>(data.homophily.size())},
                    {"manifest", (fs::path(a.out) / "manifest.json").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

int run_ingest(const std::string& manifest_path) {
  RunManifest run("ingest");
  run.input(manifest_path);
  const mew::DatasetManifest m = mew::load_manifest(manifest_path);
  mew::validate_manifest(m);
  json images = json::array();
  json errors = json::array();
  std::size_t cells = 0;
  run.stage("validate", [&] {
    for (std::size_t i = 0; i < m.images.size(); ++i) {
      try {
        const mew::CellTable t = mew::load_cell_table(m.table_path(i), m.columns, m.images[i].image_id);
        mew::validate_cell_table(t);
        std::size_t typed = 0;
        for (const auto& c : t.cell_type) typed += c.has_value() ? 1 : 0;
        cells += t.size_n();
        images.push_back({{"image_id", t.image_id},
                          {"cells", t.size_n()},
                          {"biomarkers", t.biomarker_dim()},
                          {"typed_cells", typed}});
      } catch (const mew::Error& e) {
        errors.push_back({{"image_id", m.images[i].image_id},
                          {"error", mew::errc_name(e.code())},
                          {"message", e.what()}});
      }
    }
  });
  json report = {{"images", images}, {"errors", errors}, {"total_cells", cells}, {"run", run.to_json()}};
  std::cout << report.dump(2) << '\n';
  return errors.empty() ? 0 : 2;
}

struct BuildArgs {
  std::string manifest, cache;
  int hops = 3;
  std::uint64_t seed = 0;
  bool no_stochastic = false;
  bool resample = false;
  bool no_standardize = false;
  int kmeans_k = 8;
  int workers = 0;
};

int run_build(const BuildArgs& a) {
  RunManifest run("build");
  run.input(a.manifest);
  mew::BuildOptions o;
  o.hops = a.hops;
  o.seed = a.seed;
  o.stochastic = !a.no_stochastic;
  o.resample_each_epoch = a.resample;
  o.standardize = !a.no_standardize;
  o.kmeans_k = a.kmeans_k;
  o.workers = env_threads().value_or(a.workers);
  run.set("hops", o.hops);
  run.set("stochastic", o.stochastic);
  run.set("resample_each_epoch", o.resample_each_epoch);
  run.set("standardize", o.standardize);
  run.set("workers", o.workers);
  run.set("cache", a.cache);
  run.seed("seed", o.seed);
  const mew::BuildReport r = run.stage("precompute", [&] { return mew::build_caches(a.manifest, a.cache, o); });
  run.write(fs::path(a.cache) / "run_build.json");
  std::cout << json{{"images", r.index.at("images").size()},
                    {"typing", r.index.at("typing")},
                    {"seconds", r.seconds},
                    {"index", (fs::path(a.cache) / "index.json").string()}}
                   .dump(2)
            << '\n';
  return 0;
}

struct TrainArgs {
  std::string manifest, cache, config, out, history;
};

mew::TrainConfig load_config(const std::string& path, RunManifest& run) {
  if (path.empty()) return {};
  run.input(path);
  return mew::load_train_config(path);
}

fs::path history_path_for(const fs::path& ckpt, const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  return parent_or_cwd(ckpt) / "history.csv";
}

mew::TrainOutcome train_and_save(const std::string& manifest, const std::string& cache, const mew::TrainConfig& cfg,
                                 const fs::path& ckpt, const fs::path& history, RunManifest& run) {
  mew::TrainOutcome o = run.stage("train", [&] { return mew::train_from_cache(manifest, cache, cfg); });
  run.stage("save", [&] {
    fs::create_directories(parent_or_cwd(ckpt));
    fs::create_directories(parent_or_cwd(history));
    mew::write_checkpoint(ckpt, o.result.params, o.checkpoint_metadata);
    mew::write_history_csv(history, o.model.tasks, o.result.history);
  });
  return o;
}

int run_train(const TrainArgs& a) {
  RunManifest run("train");
  run.input(a.manifest);
  run.input(fs::path(a.cache) / "index.json");
  const mew::TrainConfig cfg = load_config(a.config, run);
  run.set("train_config", mew::train_config_to_json(cfg));
  run.seed("seed", cfg.seed);
  const fs::path history = history_path_for(a.out, a.history);
  const mew::TrainOutcome o = train_and_save(a.manifest, a.cache, cfg, a.out, history, run);
  run.set("best_epoch", o.result.best_epoch);
  run.write(fs::path(a.out).string() + ".run.json");
  const auto& best = o.result.history.at(static_cast<std::size_t>(o.result.best_epoch - 1));
  std::cout << json{{"checkpoint", a.out},
                    {"history", history.string()},
                    {"best_epoch", o.result.best_epoch},
                    {"best_selection", std::isnan(best.selection) ? json(nullptr) : json(best.selection)}}
                   .dump(2)
            << '\n';
  return 0;
}

struct EvalArgs {
  std::string manifest, cache, ckpt, split = "test", report, scores;
  bool time = false;
  bool recompute = false;
};

int run_eval(const EvalArgs& a) {
  RunManifest run("eval");
  run.input(a.manifest);
  run.input(a.ckpt);
  run.set("split", a.split);
  run.set("recompute_on_the_fly", a.recompute);
  const mew::Checkpoint ck = mew::read_checkpoint(a.ckpt);
  const mew::EvalReport r = run.stage("evaluate", [&] {
    return mew::evaluate_split(a.manifest, a.cache, ck, mew::parse_split(a.split), a.recompute);
  });
  json out = r.to_json();
  if (!a.time) out.erase("timings");
  out["run"] = run.to_json();
  if (!a.report.empty()) write_text(a.report, out.dump(2) + "\n");
  if (!a.scores.empty()) write_text(a.scores, r.scores_csv(ck.params.config()));
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct DiagnoseArgs {
  std::string manifest, out, edges;
  int kmeans_k = 8;
  int bins = 20;
};

int run_diagnose(const DiagnoseArgs& a) {
  RunManifest run("diagnose");
  run.input(a.manifest);
  const mew::Diagnostics d =
      run.stage("diagnose", [&] { return mew::diagnose_dataset(a.manifest, a.kmeans_k, a.edges); });
  json report = d.report;
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "homophily.svg",
               mew::histogram_svg(d.homophily, a.bins, "Voronoi homophily ratio", "homophily"));
    write_text(fs::path(a.out) / "cells.svg",
               mew::histogram_svg(d.cell_counts, a.bins, "Cells per image", "cells"));
    write_text(fs::path(a.out) / "diagnostics.json", report.dump(2) + "\n");
    run.write(fs::path(a.out) / "run_diagnose.json");
  }
  report["run"] = run.to_json();
  std::cout << report.dump(2) << '\n';
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& cells) {
  RunManifest run("predict");
  run.input(ckpt_path);
  run.input(cells);
  const mew::Checkpoint ck = mew::read_checkpoint(ckpt_path);
  json out = run.stage("predict", [&] { return mew::predict_table(ck, cells); });
  out["run"] = run.to_json();
  std::cout << out.dump(2) << '\n';
  return 0;
}

struct AblateArgs {
  std::string manifest, cache, config, out, variant = "all", split = "test";
};

int run_ablate(const AblateArgs& a) {
  RunManifest run("ablate");
  run.input(a.manifest);
  const mew::TrainConfig base = load_config(a.config, run);
  std::vector<mew::Fusion> variants;
  if (a.variant == "all") {
    variants = {mew::Fusion::VoronoiOnly, mew::Fusion::CelltypeOnly, mew::Fusion::Sum, mew::Fusion::Concat,
                mew::Fusion::Attention};
  } else {
    variants = {mew::parse_fusion(a.variant)};
  }
  fs::create_directories(a.out);
  run.set("train_config", mew::train_config_to_json(base));
  run.seed("seed", base.seed);
  json results = json::object();
  for (mew::Fusion f : variants) {
    const std::string name(mew::fusion_name(f));
    mew::TrainConfig cfg = base;
    cfg.fusion = f;
    const fs::path ckpt = fs::path(a.out) / (name + ".mew");
    train_and_save(a.manifest, a.cache, cfg, ckpt, fs::path(a.out) / (name + "_history.csv"), run);
    const mew::Checkpoint ck = mew::read_checkpoint(ckpt);
    const mew::EvalReport r = run.stage("eval_" + name, [&] {
      return mew::evaluate_split(a.manifest, a.cache, ck, mew::parse_split(a.split), false);
    });
    json entry = r.to_json();
    entry.erase("timings");
    results[name] = entry;
  }
  json out = {{"split", a.split}, {"variants", results}};
  write_text(fs::path(a.out) / "ablation.json", out.dump(2) + "\n");
  run.write(fs::path(a.out) / "run_ablate.json");
  std::cout << out.dump(2) << '\n';
  return 0;
}

int report_error(const std::string& code, const std::string& message, int exit_code) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplex cell-graph pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", sa.config, "Synth config JSON");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--seed", sa.seed, "Random seed");

  std::string ingest_manifest;
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset manifest and its cell tables");
  ingest->add_option("--manifest", ingest_manifest, "Dataset manifest JSON")->required();

  BuildArgs ba;
  auto* build = app.add_subcommand("build", "Precompute hop features into a cache");
  build->add_option("--manifest", ba.manifest, "Dataset manifest JSON")->required();
  build->add_option("--cache", ba.cache, "Cache directory")->required();
  build->add_option("--hops", ba.hops, "Number of hops K")->check(CLI::PositiveNumber);
  build->add_option("--seed", ba.seed, "Sampling seed");
  build->add_flag("--no-stochastic", ba.no_stochastic, "Use the full cell-type layer");
  build->add_flag("--resample-each-epoch", ba.resample, "Resample the cell-type layer every epoch");
  build->add_flag("--no-standardize", ba.no_standardize, "Keep raw feature scales");
  build->add_option("--kmeans-k", ba.kmeans_k, "Clusters when no cell types are given")->check(CLI::Range(2, 1000));
  build->add_option("--workers", ba.workers, "Parallel images (MEW_THREADS overrides)");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model on cached features");
  train->add_option("--manifest", ta.manifest, "Dataset manifest JSON")->required();
  train->add_option("--cache", ta.cache, "Cache directory")->required();
  train->add_option("--config", ta.config, "Train config JSON");
  train->add_option("--out", ta.out, "Checkpoint path")->required();
  train->add_option("--history", ta.history, "History CSV path (default: history.csv next to the checkpoint)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  eval->add_option("--manifest", ea.manifest, "Dataset manifest JSON")->required();
  eval->add_option("--cache", ea.cache, "Cache directory");
  eval->add_option("--ckpt", ea.ckpt, "Checkpoint")->required();
  eval->add_option("--split", ea.split, "train, val or test");
  eval->add_option("--report", ea.report, "Write the report JSON here");
  eval->add_option("--scores", ea.scores, "Write per-image scores CSV here");
  eval->add_flag("--time", ea.time, "Include per-stage wall-clock times");
  eval->add_flag("--recompute-on-the-fly", ea.recompute, "Recompute hop features instead of reading the cache");

  DiagnoseArgs da;
  auto* diagnose = app.add_subcommand("diagnose", "Homophily and cell-count statistics");
  diagnose->add_option("--manifest", da.manifest, "Dataset manifest JSON")->required();
  diagnose->add_option("--out", da.out, "Directory for JSON and SVG histograms");
  diagnose->add_option("--dump-edges", da.edges, "Directory for per-image Voronoi edge CSVs");
  diagnose->add_option("--kmeans-k", da.kmeans_k, "Clusters when no cell types are given");
  diagnose->add_option("--bins", da.bins, "Histogram bins")->check(CLI::PositiveNumber);

  std::string pred_ckpt, pred_cells;
  auto* predict = app.add_subcommand("predict", "Score one cell table");
  predict->add_option("--ckpt", pred_ckpt, "Checkpoint")->required();
  predict->add_option("--cells", pred_cells, "Cell table CSV")->required();

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Train and evaluate fusion variants");
  ablate->add_option("--variant", aa.variant, "voronoi, celltype, sum, concat, attention or all")
      ->check(CLI::IsMember({"voronoi", "celltype", "sum", "concat", "attention", "all"}));
  ablate->add_option("--manifest", aa.manifest, "Dataset manifest JSON")->required();
  ablate->add_option("--cache", aa.cache, "Cache directory")->required();
  ablate->add_option("--config", aa.config, "Train config JSON");
  ablate->add_option("--out", aa.out, "Output directory")->required();
  ablate->add_option("--split", aa.split, "Split to evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("UsageError", e.what(), 2);
  }

  spdlog::set_default_logger(spdlog::stderr_color_mt("mew"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  if (!build->parsed()) mew::kernels::set_thread_count(env_threads().value_or(1));

  try {
    if (synth->parsed()) return run_synth(sa);
    if (ingest->parsed()) return run_ingest(ingest_manifest);
    if (build->parsed()) return run_build(ba);
    if (train->parsed()) return run_train(ta);
    if (eval->parsed()) {
      if (ea.cache.empty() && !ea.recompute) return report_error("UsageError", "--cache is required", 2);
      return run_eval(ea);
    }
    if (diagnose->parsed()) return run_diagnose(da);
    if (predict->parsed()) return run_predict(pred_ckpt, pred_cells);
    if (ablate->parsed()) return run_ablate(aa);
  } catch (const mew::Error& e) {
    return report_error(std::string(mew::errc_name(e.code())), e.what(), mew::is_validation_error(e.code()) ? 2 : 3);
  } catch (const std::exception& e) {
    return report_error("RuntimeError", e.what(), 3);
  }
  return 0;
}
