#include "gradcheck.hpp"
#include "helpers.hpp"

#include "mew/checkpoint.hpp"
#include "mew/pipeline.hpp"
#include "mew/synth.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace mew;

namespace {

SynthConfig small_synth() {
  SynthConfig c;
  c.images = 12;
  c.cells_min = 100;
  c.cells_max = 150;
  c.num_types = 4;
  c.num_biomarkers = 4;
  c.homophily_target = 0.0;
  c.mixing = 0.3;
  c.groups = 6;
  c.val_groups = 1;
  c.test_groups = 1;
  c.tasks = {{"response", TaskKind::Binary}, {"os", TaskKind::Hazard}};
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("checkpoint round trip and corruption") {
  ModelConfig c;
  c.feature_dim = 4;
  c.hidden_dim = 5;
  c.hops = 2;
  c.fusion = Fusion::Concat;
  c.activation = Activation::Prelu;
  c.pooling = Pooling::Max;
  c.shared_weights = false;
  c.tasks = {{"a", TaskKind::Binary}, {"b", TaskKind::Hazard}};
  ModelParams p(c);
  p.initialize(3);
  const std::string bytes = encode_checkpoint(p, {{"note", "x"}});
  const auto ck = decode_checkpoint(bytes);
  CHECK(ck.metadata.at("note") == "x");
  CHECK(ck.params.config().fusion == Fusion::Concat);
  CHECK(ck.params.config().tasks == c.tasks);
  REQUIRE(ck.params.size() == p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(ck.params.values()[i] == static_cast<double>(static_cast<float>(p.values()[i])));
  CHECK(encode_checkpoint(ck.params, {{"note", "x"}}) == bytes);

  std::string bad = bytes;
  bad[0] = 'Z';
  CHECK(helpers::error_of([&] { decode_checkpoint(bad); }) == Errc::BadMagic);
  bad = bytes;
  bad[4] = 2;
  CHECK(helpers::error_of([&] { decode_checkpoint(bad); }) == Errc::VersionMismatch);
  bad = bytes;
  bad[bytes.size() - 20] ^= 1;
  CHECK(helpers::error_of([&] { decode_checkpoint(bad); }) == Errc::HashMismatch);
  CHECK(helpers::error_of([&] { decode_checkpoint(std::string_view(bytes).substr(0, 30)); }) == Errc::TruncatedFile);
}

TEST_CASE("synthetic datasets") {
  auto c = small_synth();
  c.images = 10;
  c.num_types = 3;
  c.cells_max = 200;
  c.mixing = 0.2;
  c.tasks = {{"response", TaskKind::Binary}};
  const auto a = generate_dataset(c, 7);
  CHECK(a.manifest.images.size() == 10);
  for (const auto& img : a.images) {
    CHECK(img.table.size_n() >= 100);
    CHECK(img.table.size_n() <= 200);
    CHECK((img.labels[0].value == 0 || img.labels[0].value == 1));
  }
  validate_manifest(a.manifest);

  const auto d1 = helpers::scratch_dir("synth_a"), d2 = helpers::scratch_dir("synth_b");
  write_dataset(d1, a, c, 7);
  write_dataset(d2, generate_dataset(c, 7), c, 7);
  CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
  CHECK(slurp(d1 / "cells" / "img_003.csv") == slurp(d2 / "cells" / "img_003.csv"));
  CHECK(slurp(d1 / "cells" / "img_003.csv") != slurp(helpers::scratch_dir("synth_c") / "none"));
  const auto other = generate_dataset(c, 8);
  CHECK(other.images[0].table.x != a.images[0].table.x);
}

TEST_CASE("homophily falls as mixing grows") {
  auto c = small_synth();
  c.cells_min = 100;
  c.cells_max = 200;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const double low = pilot_homophily(c, seed, 0.1, 50);
    const double mid = pilot_homophily(c, seed, 0.5, 50);
    const double high = pilot_homophily(c, seed, 0.9, 50);
    CHECK(low > mid);
    CHECK(mid > high);
  }
}

TEST_CASE("synth config validation") {
  CHECK(helpers::error_of([] { synth_config_from_json({{"images", 0}}); }) == Errc::InvalidConfig);
  CHECK(helpers::error_of([] { synth_config_from_json({{"bogus", 1}}); }) == Errc::InvalidConfig);
  const auto j = synth_config_to_json(small_synth());
  CHECK(synth_config_to_json(synth_config_from_json(j)) == j);
}

TEST_CASE("cache, train, evaluate end to end") {
  const auto dir = helpers::scratch_dir("pipeline");
  const auto c = small_synth();
  write_dataset(dir / "data", generate_dataset(c, 3), c, 3);
  const auto manifest = dir / "data" / "manifest.json";

  BuildOptions bo;
  bo.hops = 2;
  bo.seed = 5;
  build_caches(manifest, dir / "cache", bo);
  const auto index = load_cache_index(dir / "cache");
  CHECK(index.entries.size() == 12);
  CHECK(index.info.typing == "given");

  TrainConfig tc;
  tc.epochs = 3;
  tc.hops = 2;
  tc.hidden_dim = 8;
  tc.batch_size = 4;
  tc.learning_rate = 0.01;
  const auto out = train_from_cache(manifest, dir / "cache", tc);
  CHECK(out.result.history.size() == 3);
  write_checkpoint(dir / "model.mew", out.result.params, out.checkpoint_metadata);
  const auto ck = read_checkpoint(dir / "model.mew");

  const auto cached = evaluate_split(manifest, dir / "cache", ck, Split::Test, false);
  const auto fresh = evaluate_split(manifest, dir / "cache", ck, Split::Test, true);
  REQUIRE(cached.predictions.size() == fresh.predictions.size());
  CHECK(cached.image_ids == fresh.image_ids);
  for (std::size_t i = 0; i < cached.predictions.size(); ++i)
    for (std::size_t t = 0; t < 2; ++t)
      CHECK(cached.predictions[i].scores[t] == doctest::Approx(fresh.predictions[i].scores[t]).epsilon(1e-4));

  const auto pred = predict_table(ck, dir / "data" / "cells" / "img_000.csv");
  REQUIRE(fresh.image_ids[0] == "img_000");
  CHECK(pred.at("tasks").at("response").at("score").get<double>() == fresh.predictions[0].scores[0]);
  CHECK(pred.at("mean_alpha_voronoi").get<double>() + pred.at("mean_alpha_celltype").get<double>() ==
        doctest::Approx(1.0));

  // Too many hops for the cache.
  tc.hops = 3;
  CHECK(helpers::error_of([&] { train_from_cache(manifest, dir / "cache", tc); }) == Errc::InvalidConfig);

  // Tampered and missing cache files.
  const auto victim = index.path_of(cached.image_ids[0]);
  {
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(60);
    f.put('\x7f');
  }
  CHECK(helpers::error_of([&] { evaluate_split(manifest, dir / "cache", ck, Split::Test, false); }) ==
        Errc::HashMismatch);
  std::filesystem::remove(victim);
  CHECK(helpers::error_of([&] { evaluate_split(manifest, dir / "cache", ck, Split::Test, false); }) ==
        Errc::MissingCache);
  CHECK(helpers::error_of([&] { load_cache_index(dir / "nowhere"); }) == Errc::MissingCache);
}

TEST_CASE("untyped and partly typed datasets get types") {
  const auto dir = helpers::scratch_dir("typing");
  auto c = small_synth();
  c.images = 6;
  c.groups = 3;
  c.emit_cell_types = false;
  write_dataset(dir / "untyped", generate_dataset(c, 1), c, 1);
  BuildOptions bo;
  bo.hops = 1;
  bo.kmeans_k = 3;
  const auto p = prepare_dataset(dir / "untyped" / "manifest.json", bo);
  CHECK(p.info.typing == "kmeans");
  for (const auto& t : p.tables) CHECK(t.fully_typed());

  c.emit_cell_types = true;
  c.unlabeled_fraction = 0.3;
  write_dataset(dir / "partial", generate_dataset(c, 1), c, 1);
  const auto q = prepare_dataset(dir / "partial" / "manifest.json", bo);
  CHECK(q.info.typing == "propagation");
  for (const auto& t : q.tables) CHECK(t.fully_typed());
}
