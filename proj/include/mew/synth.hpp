#pragma once

// Synthetic multiplexed-imaging datasets with a controllable label
// mechanism.
//
// Cells are scattered uniformly over a square field. The field is cut into
// spatial domains (nearest of a few random centers); every domain gets a
// dominant type drawn from the image composition, and each cell takes the
// domain type with probability 1 - mixing, otherwise a type drawn from the
// composition. `mixing` is either given or calibrated by bisection so that
// pilot images hit a target Voronoi homophily ratio.
//
// Type 0 is the designated type. Its mean biomarker vector is the centroid
// of the other types' means, so no linear per-cell statistic tracks its
// share. In geometry datasets marker 0 marks it instead (2 x separation,
// 0 for every other type). Per-cell noise is heavy: single cells are hard to type, whole
// type groups are easy to tell apart.
//
//   composition: the designated type's share varies per image; binary
//                labels threshold the realised share, hazard rates grow
//                with it.
//   geometry:    the designated share is fixed; half of the images pack
//                the designated cells into one compact blob, the others
//                scatter them. Labels follow the arrangement.

#include "mew/cell_data.hpp"
#include "mew/manifest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mew {

enum class Mechanism { Composition, Geometry };

struct SynthConfig {
  int images = 60;
  int cells_min = 400;
  int cells_max = 600;
  double width = 1000.0;  // µm
  int num_types = 7;
  int num_biomarkers = 8;
  double type_separation = 1.0;  // sd of the type-mean entries
  double marker_noise = 1.5;     // per-cell noise sd
  double batch_shift = 0.0;      // per-image additive marker shift sd
  int domains = 20;
  double mixing = 0.5;            // used when homophily_target <= 0
  double homophily_target = 0.29;
  Mechanism mechanism = Mechanism::Composition;
  double designated_min = 0.05;  // composition: share range of type 0
  double designated_max = 0.35;
  double threshold = 0.2;         // composition: binary label cut
  double geometry_share = 0.2;    // geometry: fixed share of type 0
  int groups = 12;
  int val_groups = 2;
  int test_groups = 2;
  std::vector<TaskSpec> tasks = {{"response", TaskKind::Binary}};
  double hazard_base_rate = 1.0;
  double hazard_beta = 2.0;
  double censor_max = 3.0;        // censoring times uniform on [0, censor_max]
  double unlabeled_fraction = 0.0;
  bool emit_cell_types = true;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig load_synth_config(const std::filesystem::path& path);

struct SynthImage {
  CellTable table;
  std::vector<int> types;        // true types, before any label removal
  double designated_share = 0.0;
  bool clustered = false;
  std::vector<Label> labels;     // per task
};

/// One image with the given mixing level. Deterministic in (config, seed, index).
SynthImage generate_image(const SynthConfig& config, std::uint64_t seed, int index, double mixing);

/// Mean Voronoi homophily of `count` pilot images at the given mixing.
double pilot_homophily(const SynthConfig& config, std::uint64_t seed, double mixing, int count);

/// Mixing level whose pilot homophily matches config.homophily_target
/// (clamped to [0, 1]).
double calibrate_mixing(const SynthConfig& config, std::uint64_t seed);

struct SynthDataset {
  DatasetManifest manifest;
  std::vector<SynthImage> images;
  double mixing = 0.0;
  std::vector<double> homophily;  // per image, true types
};

SynthDataset generate_dataset(const SynthConfig& config, std::uint64_t seed);

/// Writes cells/<image>.csv, manifest.json and synth_report.json under dir.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& data, const SynthConfig& config,
                   std::uint64_t seed);

}  // namespace mew
