#include "gradcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include "mew/model.hpp"

#include <doctest.h>

using namespace mew;

namespace {

ModelConfig small_config(std::size_t f, Fusion fusion = Fusion::Attention) {
  ModelConfig c;
  c.feature_dim = f;
  c.hidden_dim = 6;
  c.hops = 2;
  c.fusion = fusion;
  c.tasks = {{"response", TaskKind::Binary}, {"survival", TaskKind::Hazard}};
  return c;
}

std::vector<Eigen::MatrixXd> eig_hops(const std::vector<Matrix>& hops, int k) {
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i <= k; ++i) out.push_back(oracle::to_eigen(hops[static_cast<std::size_t>(i)]));
  return out;
}

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

/// Copies every parameter of `from` into the matching slot of `to`; the two
/// layouts may differ only in weight sharing.
void copy_params(const ModelParams& from, ModelParams& to) {
  const auto& a = from.layout();
  const auto& b = to.layout();
  auto copy = [&](const Slot& s, const Slot& t) {
    std::copy_n(from.values().begin() + static_cast<std::ptrdiff_t>(s.offset), s.size(),
                to.values().begin() + static_cast<std::ptrdiff_t>(t.offset));
  };
  for (int br = 0; br < 2; ++br) {
    for (std::size_t k = 0; k < a.hop_w[br].size(); ++k) {
      copy(a.hop_w[br][k], b.hop_w[br][k]);
      copy(a.hop_b[br][k], b.hop_b[br][k]);
    }
    copy(a.comb_w[br], b.comb_w[br]);
    copy(a.comb_b[br], b.comb_b[br]);
    copy(a.sigma_slope[br], b.sigma_slope[br]);
    copy(a.xi_slope[br], b.xi_slope[br]);
  }
  copy(a.attention, b.attention);
  copy(a.concat_w, b.concat_w);
  copy(a.concat_b, b.concat_b);
  for (std::size_t h = 0; h < a.heads.size(); ++h) {
    copy(a.heads[h].w1, b.heads[h].w1);
    copy(a.heads[h].b1, b.heads[h].b1);
    copy(a.heads[h].w2, b.heads[h].w2);
    copy(a.heads[h].b2, b.heads[h].b2);
    copy(a.heads[h].w3, b.heads[h].w3);
    copy(a.heads[h].b3, b.heads[h].b3);
  }
}

}  // namespace

TEST_CASE("attention LeakyReLU slope") {
  CHECK(leaky_relu(-1.0) == doctest::Approx(-0.3).epsilon(1e-15));
  CHECK(leaky_relu(2.0) == 2.0);
}

TEST_CASE("attention weights for a worked example") {
  const auto f = attention_fuse(rows_of({{2, 0}}), rows_of({{0, 0}}), std::vector<double>{1, 0});
  CHECK(f.score_voronoi[0] == 2.0);
  CHECK(f.score_celltype[0] == 0.0);
  const double e2 = std::exp(2.0);
  CHECK(f.alpha_voronoi[0] == doctest::Approx(e2 / (e2 + 1.0)).epsilon(1e-15));
  CHECK(f.alpha_voronoi[0] == doctest::Approx(0.88080).epsilon(1e-5));
  CHECK(f.z(0, 0) == doctest::Approx(2.0 * e2 / (e2 + 1.0)));
}

TEST_CASE("identical branch embeddings split attention evenly") {
  const Matrix z = rows_of({{1, -2, 3}, {0.5, 0.5, 0}});
  const auto f = attention_fuse(z, z, std::vector<double>{0.3, -1, 2});
  for (double a : f.alpha_voronoi) CHECK(a == 0.5);
  CHECK(f.z == z);
}

TEST_CASE("pooling") {
  CHECK(pool(rows_of({{3, -1}}), Pooling::Mean) == std::vector<double>{3, -1});
  CHECK(pool(rows_of({{0, 2}, {2, 0}}), Pooling::Mean) == std::vector<double>{1, 1});
  CHECK(pool(rows_of({{0, 2}, {2, 0}}), Pooling::Max) == std::vector<double>{2, 2});
  CHECK(pool(rows_of({{0, 2}, {2, 0}}), Pooling::Sum) == std::vector<double>{2, 2});
  CHECK(pool(rows_of({{1, 5}, {4, 2}, {7, 3}}), Pooling::Mean) == pool(rows_of({{7, 3}, {1, 5}, {4, 2}}), Pooling::Mean));
  CHECK(helpers::error_of([] { pool(Matrix(0, 2), Pooling::Mean); }) == Errc::EmptyGraph);
}

TEST_CASE("zero inputs give a zero embedding") {
  auto c = small_config(3);
  ModelParams p(c);
  p.initialize(4);
  std::vector<Matrix> hops(3, Matrix(5, 3));
  const auto t = branch_forward(p, kVoronoi, hops, Mode::Eval, nullptr);
  for (double v : t.z.values()) CHECK(v == 0.0);
}

TEST_CASE("identity maps pass nonnegative features through") {
  ModelConfig c;
  c.feature_dim = 3;
  c.hidden_dim = 3;
  c.hops = 0;
  c.tasks = {{"r", TaskKind::Binary}};
  ModelParams p(c);
  p.initialize(1);
  const auto& l = p.layout();
  auto set_identity = [&](const Slot& s) {
    auto v = p.view(s);
    for (std::size_t i = 0; i < s.rows; ++i)
      for (std::size_t j = 0; j < s.cols; ++j) v(i, j) = i == j ? 1.0 : 0.0;
  };
  set_identity(l.hop_w[kVoronoi][0]);
  set_identity(l.comb_w[kVoronoi]);
  const Matrix x = rows_of({{0, 1, 2}, {3, 0.5, 0}});
  const auto t = branch_forward(p, kVoronoi, std::vector<Matrix>{x}, Mode::Eval, nullptr);
  CHECK(t.z == x);
}

TEST_CASE("forward matches a dense re-implementation") {
  Rng rng(100);
  int instance = 0;
  for (Fusion fusion : {Fusion::Attention, Fusion::Sum, Fusion::Concat, Fusion::VoronoiOnly, Fusion::CelltypeOnly})
    for (Pooling pooling : {Pooling::Mean, Pooling::Max, Pooling::Sum})
      for (Activation act : {Activation::Relu, Activation::Prelu, Activation::Identity})
        for (bool shared : {true, false}) {
          CAPTURE(instance++);
          auto c = small_config(4, fusion);
          c.pooling = pooling;
          c.activation = act;
          c.shared_weights = shared;
          ModelParams p(c);
          p.initialize(rng());
          const auto pf = gradcheck::random_features(rng, 20, 4, 2);
          double mean_alpha = 0.5;
          const auto want = oracle::forward(p, eig_hops(pf.voronoi_hops, 2), eig_hops(pf.celltype_hops, 2), &mean_alpha);
          const auto got = full_forward(p, pf, Mode::Eval);
          for (std::size_t t = 0; t < want.size(); ++t) {
            REQUIRE(got.heads[t].pooled.size() == static_cast<std::size_t>(want[t].size()));
            for (std::size_t i = 0; i < got.heads[t].pooled.size(); ++i)
              CHECK(std::fabs(got.heads[t].pooled[i] - want[t](static_cast<Eigen::Index>(i))) <= 1e-10);
          }
          if (fusion == Fusion::Attention) CHECK(std::fabs(got.mean_alpha_voronoi() - mean_alpha) <= 1e-12);
          if (c.uses_voronoi()) {
            const auto zv = oracle::branch(p, kVoronoi, eig_hops(pf.voronoi_hops, 2));
            CHECK(oracle::max_abs_diff(oracle::to_eigen(got.voronoi.z), zv) <= 1e-12);
          }
        }
}

TEST_CASE("node order does not matter") {
  Rng rng(7);
  auto c = small_config(3);
  ModelParams p(c);
  p.initialize(9);
  const auto pf = gradcheck::random_features(rng, 25, 3, 2);
  std::vector<std::size_t> perm(25);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[11]);
  PrecomputedFeatures q = pf;
  for (auto* hops : {&q.voronoi_hops, &q.celltype_hops})
    for (auto& m : *hops) {
      Matrix src = m;
      for (std::size_t i = 0; i < 25; ++i) std::copy_n(src.row(perm[i]), src.cols(), m.row(i));
    }
  const auto a = full_forward(p, pf, Mode::Eval), b = full_forward(p, q, Mode::Eval);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t i = 0; i < a.heads[t].pooled.size(); ++i)
      CHECK(a.heads[t].pooled[i] == doctest::Approx(b.heads[t].pooled[i]).epsilon(1e-12));
}

TEST_CASE("eval mode is deterministic; train mode needs a generator for dropout") {
  Rng rng(3);
  auto c = small_config(3);
  c.dropout = 0.5;
  ModelParams p(c);
  p.initialize(2);
  const auto pf = gradcheck::random_features(rng, 15, 3, 2);
  const auto a = full_forward(p, pf, Mode::Eval), b = full_forward(p, pf, Mode::Eval);
  CHECK(a.fused == b.fused);
  CHECK(a.heads[0].out == b.heads[0].out);
  CHECK(helpers::error_of([&] { full_forward(p, pf, Mode::Train); }) == Errc::InvalidConfig);
  Rng d(5);
  const auto t = full_forward(p, pf, Mode::Train, &d);
  for (const auto& m : t.voronoi.mask)
    for (double v : m.values()) CHECK((v == 0.0 || v == 2.0));
}

TEST_CASE("dimension checks") {
  Rng rng(1);
  auto c = small_config(3);
  ModelParams p(c);
  p.initialize(0);
  CHECK(helpers::error_of([&] { full_forward(p, gradcheck::random_features(rng, 10, 3, 1), Mode::Eval); }) ==
        Errc::DimMismatch);
  CHECK(helpers::error_of([&] { full_forward(p, gradcheck::random_features(rng, 10, 4, 2), Mode::Eval); }) ==
        Errc::DimMismatch);
  // More hops than the model uses is fine.
  CHECK_NOTHROW(full_forward(p, gradcheck::random_features(rng, 10, 3, 4), Mode::Eval));
}

TEST_CASE("empty cell-type layer still runs") {
  MultiplexGraph g;
  Rng rng(2);
  g.n = 6;
  g.features = Matrix(6, 3);
  for (double& v : g.features.values()) v = standard_normal(rng);
  for (std::size_t i = 0; i < 6; ++i) {
    g.positions.push_back({uniform(rng, 0, 10), uniform(rng, 0, 10)});
    g.type_codes.push_back(static_cast<int>(i));
  }
  g.voronoi = delaunay_adjacency(g.positions);
  g.celltype = CellTypePairs(g.type_codes);
  const auto pf = precompute_image(g, PrecomputeOptions{.hops = 2});
  for (const auto& h : pf.celltype_hops) CHECK(h == g.features);
  ModelParams p(small_config(3));
  p.initialize(1);
  const auto t = full_forward(p, pf, Mode::Eval);
  CHECK(std::isfinite(t.heads[0].pooled[0]));
}

TEST_CASE("shared hop weights alias and sum both branches' gradients") {
  auto c = small_config(3);
  ModelParams shared(c);
  shared.initialize(11);
  const auto& l = shared.layout();
  for (std::size_t k = 0; k <= 2; ++k) CHECK(l.hop_w[0][k].offset == l.hop_w[1][k].offset);
  CHECK(l.comb_w[0].offset != l.comb_w[1].offset);

  c.shared_weights = false;
  ModelParams split(c);
  split.initialize(0);
  copy_params(shared, split);
  CHECK(split.size() > shared.size());

  Rng rng(12);
  const auto examples = gradcheck::random_examples(rng, 4, 12, 3, 2, c.tasks);
  std::vector<const Example*> batch;
  for (const auto& e : examples) batch.push_back(&e);
  TrainConfig tc;
  std::vector<double> gs(shared.size()), gu(split.size());
  const double ls = batch_loss_and_grad(shared, batch, tc, Mode::Eval, nullptr, gs).loss;
  const double lu = batch_loss_and_grad(split, batch, tc, Mode::Eval, nullptr, gu).loss;
  CHECK(ls == doctest::Approx(lu).epsilon(1e-14));
  const auto& lu_layout = split.layout();
  for (std::size_t k = 0; k <= 2; ++k) {
    const Slot& s = l.hop_w[0][k];
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double want = gu[lu_layout.hop_w[0][k].offset + i] + gu[lu_layout.hop_w[1][k].offset + i];
      CHECK(gs[s.offset + i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
  Rng rng(4);
  auto c = small_config(3);
  ModelParams p(c);
  p.initialize(3);
  const auto pf = gradcheck::random_features(rng, 10, 3, 2);
  const auto t = full_forward(p, pf, Mode::Eval);
  std::vector<double> g(p.size(), 0.0);
  const std::vector<std::vector<double>> zero{{0.0, 0.0}, {0.0}};
  backward(p, pf, t, zero, g);
  CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("gradients match finite differences across model variants") {
  Rng rng(2025);
  struct Variant {
    Fusion fusion;
    Activation act;
    Pooling pool;
    bool shared;
  };
  const std::vector<Variant> variants{{Fusion::Attention, Activation::Relu, Pooling::Mean, true},
                                      {Fusion::Attention, Activation::Prelu, Pooling::Mean, false},
                                      {Fusion::Concat, Activation::Relu, Pooling::Max, true},
                                      {Fusion::Sum, Activation::Identity, Pooling::Sum, true},
                                      {Fusion::VoronoiOnly, Activation::Prelu, Pooling::Mean, true},
                                      {Fusion::CelltypeOnly, Activation::Relu, Pooling::Mean, false}};
  for (const auto& v : variants) {
    auto c = small_config(4, v.fusion);
    c.activation = v.act;
    c.pooling = v.pool;
    c.shared_weights = v.shared;
    ModelParams p(c);
    p.initialize(rng());
    const auto examples = gradcheck::random_examples(rng, 4, 15, 4, 2, c.tasks);
    TrainConfig tc;
    tc.task_weights = {{"survival", 0.7}};
    const auto r = gradcheck::check(p, examples, tc, 60, 1e-5, rng);
    CAPTURE(fusion_name(v.fusion));
    CHECK(r.compared == 60);
    CHECK(r.max_rel_error <= 1e-4);
  }
}
