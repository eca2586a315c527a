#include "oracles.hpp"
#include "helpers.hpp"

#include "mew/cache.hpp"
#include "mew/error.hpp"
#include "mew/kernels.hpp"
#include "mew/precompute.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <doctest.h>

#include <filesystem>

using namespace mew;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (double& v : m.values()) v = standard_normal(rng);
  return m;
}

Eigen::MatrixXd eig(const Matrix& m) { return oracle::to_eigen(m); }

}  // namespace

TEST_CASE("normalize_adjacency small cases") {
  const auto one = normalize_adjacency(std::vector<std::pair<std::uint32_t, std::uint32_t>>{}, 1);
  CHECK(oracle::to_eigen(one) == Eigen::MatrixXd::Ones(1, 1));

  const auto two = normalize_adjacency(std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}}, 2);
  CHECK(oracle::max_abs_diff(oracle::to_eigen(two), Eigen::MatrixXd::Constant(2, 2, 0.5)) == 0.0);

  Matrix x(2, 1);
  x(0, 0) = 1;
  x(1, 0) = 3;
  const Matrix y = spmm(two, x);
  CHECK(y(0, 0) == 2.0);
  CHECK(y(1, 0) == 2.0);

  const auto iso = normalize_adjacency(std::vector<std::pair<std::uint32_t, std::uint32_t>>{}, 4);
  Rng rng(1);
  const Matrix z = random_matrix(rng, 4, 3);
  CHECK(spmm(iso, z) == z);

  CHECK_THROWS_AS(normalize_adjacency(std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 5}}, 3), Error);
  CHECK_THROWS_AS(spmm(two, z), Error);
}

TEST_CASE("normalize_adjacency ignores self pairs and repeats") {
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> e{{0, 1}, {1, 0}, {2, 2}, {0, 1}};
  const auto s = normalize_adjacency(e, 3);
  CHECK(s.nnz() == 5);
  CHECK(oracle::max_abs_diff(oracle::to_eigen(s), oracle::normalized(oracle::dense_adjacency(e, 3))) <= 1e-15);
}

TEST_CASE("random graphs match dense oracles") {
  Rng rng(11);
  const auto g = oracle::random_graph(rng, 30, 4, 3);
  const auto s = normalize_adjacency(g.voronoi, g.n);
  const Eigen::MatrixXd dense = oracle::normalized(oracle::dense_adjacency(g.voronoi, g.n));
  CHECK(oracle::max_abs_diff(oracle::to_eigen(s), dense) <= 1e-12);

  Rng rng2(12);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> e;
  for (std::uint32_t i = 0; i < 50; ++i)
    for (std::uint32_t j = i + 1; j < 50; ++j)
      if (bernoulli(rng2, 0.1)) e.emplace_back(i, j);
  const auto s50 = normalize_adjacency(e, 50);
  const Matrix x = random_matrix(rng2, 50, 8);
  CHECK(oracle::max_abs_diff(eig(spmm(s50, x)), oracle::normalized(oracle::dense_adjacency(e, 50)) * eig(x)) <=
        1e-12);
}

TEST_CASE("deterministic hops match dense powers") {
  Rng rng(5);
  auto g = oracle::random_graph(rng, 20, 3, 4);
  PrecomputeOptions opt;
  opt.hops = 2;
  opt.stochastic = false;
  const auto pf = precompute_image(g, opt);
  REQUIRE(pf.voronoi_hops.size() == 3);
  const auto sv = oracle::normalized(oracle::dense_adjacency(g.voronoi, g.n));
  const auto sc = oracle::normalized(oracle::clique_adjacency(g.type_codes));
  const auto hv = oracle::hops(sv, eig(g.features), 2);
  const auto hc = oracle::hops(sc, eig(g.features), 2);
  for (std::size_t k = 0; k <= 2; ++k) {
    CHECK(oracle::max_abs_diff(eig(pf.voronoi_hops[k]), hv[k]) <= 1e-10);
    CHECK(oracle::max_abs_diff(eig(pf.celltype_hops[k]), hc[k]) <= 1e-10);
  }
}

TEST_CASE("isolated Voronoi layer leaves features unchanged") {
  MultiplexGraph g;
  g.n = 3;
  Rng rng(2);
  g.features = random_matrix(rng, 3, 2);
  g.type_codes = {0, 1, 2};
  g.celltype = CellTypePairs(g.type_codes);
  const auto hops = precompute_voronoi_hops(g, g.features, 3);
  for (const auto& h : hops) CHECK(h == g.features);
  // All-distinct types: the cell-type branch is self-loop only as well.
  PrecomputeOptions opt;
  for (const auto& h : precompute_celltype_hops(g, g.features, opt)) CHECK(h == g.features);
}

TEST_CASE("clique aggregation without materializing") {
  Rng rng(8);
  const auto g = oracle::random_graph(rng, 40, 5, 3);
  const Matrix x = g.features;
  CHECK(oracle::max_abs_diff(eig(clique_aggregate(g.celltype, x)), eig(spmm(clique_adjacency(g.celltype), x))) <=
        1e-12);
  PrecomputeOptions small, big;
  small.stochastic = big.stochastic = false;
  big.pair_cap = 0;
  const auto a = precompute_celltype_hops(g, x, small);
  const auto b = precompute_celltype_hops(g, x, big);
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(oracle::max_abs_diff(eig(a[k]), eig(b[k])) <= 1e-12);
}

TEST_CASE("edge sampling") {
  const CellTypePairs pairs(std::vector<int>(6, 0));
  auto always = [](std::uint32_t, std::uint32_t) { return 1.0; };
  Rng rng(1);
  CHECK(sample_celltype_adjacency(pairs, always, rng).nnz() == 36);

  const CellTypePairs three(std::vector<int>{0, 0, 0});
  auto rare = [](std::uint32_t, std::uint32_t) { return 0.01; };
  Rng r1(99), r2(99);
  const auto a = sample_celltype_adjacency(three, rare, r1);
  const auto b = sample_celltype_adjacency(three, rare, r2);
  CHECK(a.columns == b.columns);
  CHECK(a.values == b.values);
  CHECK(r1() == r2());
}

TEST_CASE("two-pass and streaming sampling agree") {
  Rng rng(21);
  const auto g = oracle::random_graph(rng, 60, 4, 3);
  const auto keep = celltype_keep_probability(g);
  CHECK(keep.d_max > 0.0);
  Rng r1(7), r2(7);
  const Matrix viaMatrix = spmm(sample_celltype_adjacency(g.celltype, keep, r1), g.features);
  const Matrix streamed = sample_and_aggregate(g.celltype, keep, r2, g.features);
  CHECK(oracle::max_abs_diff(eig(viaMatrix), eig(streamed)) <= 1e-12);
  CHECK(r1() == r2());

  PrecomputeOptions opt;
  opt.seed = 3;
  PrecomputeOptions streaming = opt;
  streaming.pair_cap = 0;
  const auto h1 = precompute_celltype_hops(g, g.features, opt);
  const auto h2 = precompute_celltype_hops(g, g.features, streaming);
  for (std::size_t k = 0; k < h1.size(); ++k) CHECK(oracle::max_abs_diff(eig(h1[k]), eig(h2[k])) <= 1e-12);
}

TEST_CASE("sampled count lies in the binomial interval") {
  // 142 nodes of one type: 10011 pairs.
  const CellTypePairs pairs(std::vector<int>(142, 0));
  auto half = [](std::uint32_t, std::uint32_t) { return 0.5; };
  Rng rng(2024);
  const auto s = sample_celltype_adjacency(pairs, half, rng);
  const double kept = static_cast<double>(s.nnz() - 142) / 2.0;
  const boost::math::binomial_distribution<double> dist(static_cast<double>(pairs.pair_count()), 0.5);
  CHECK(kept >= boost::math::quantile(dist, 0.005));
  CHECK(kept <= boost::math::quantile(dist, 0.995));
}

TEST_CASE("stochastic precompute is reproducible per seed") {
  Rng rng(31);
  const auto g = oracle::random_graph(rng, 50, 3, 2);
  PrecomputeOptions opt;
  opt.seed = 5;
  const auto a = precompute_image(g, opt);
  const auto b = precompute_image(g, opt);
  CHECK(a.celltype_hops == b.celltype_hops);
  opt.seed = 6;
  const auto c = precompute_image(g, opt);
  CHECK(a.celltype_hops[1] != c.celltype_hops[1]);
  CHECK(a.voronoi_hops == c.voronoi_hops);
  CHECK_THROWS_AS(precompute_image(g, PrecomputeOptions{.hops = 0}), Error);
}

TEST_CASE("cache round trip") {
  Rng rng(4);
  const auto g = oracle::random_graph(rng, 25, 3, 3);
  PrecomputeOptions opt;
  opt.seed = 77;
  opt.resample_each_epoch = true;
  const auto pf = precompute_image(g, opt);
  const std::string bytes = encode_cache(pf);
  CHECK(bytes.size() == cache_file_size(25, 3, 3));
  const auto back = decode_cache(bytes);
  CHECK(back.hops == 3);
  CHECK(back.seed == 77);
  CHECK(back.flags == (kFlagStochastic | kFlagResampleEachEpoch));
  for (std::size_t k = 0; k <= 3; ++k)
    for (std::size_t i = 0; i < pf.voronoi_hops[k].size(); ++i) {
      CHECK(back.voronoi_hops[k].values()[i] == static_cast<double>(static_cast<float>(pf.voronoi_hops[k].values()[i])));
      CHECK(back.celltype_hops[k].values()[i] ==
            static_cast<double>(static_cast<float>(pf.celltype_hops[k].values()[i])));
    }
  CHECK(encode_cache(back) == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK(helpers::error_of([&] { decode_cache(bad); }) == Errc::BadMagic);
  bad = bytes;
  bad[4] = 9;
  CHECK(helpers::error_of([&] { decode_cache(bad); }) == Errc::VersionMismatch);
  CHECK(helpers::error_of([&] { decode_cache(std::string_view(bytes).substr(0, bytes.size() - 1)); }) ==
        Errc::TruncatedFile);
}

TEST_CASE("cache file size for a large image") {
  const std::size_t n = 10000, f = 40;
  PrecomputedFeatures pf;
  pf.hops = 3;
  for (int k = 0; k <= 3; ++k) {
    pf.voronoi_hops.emplace_back(n, f, 0.5);
    pf.celltype_hops.emplace_back(n, f, 0.25);
  }
  const auto path = std::filesystem::temp_directory_path() / "mew_large.mewp";
  write_cache(path, pf);
  CHECK(std::filesystem::file_size(path) == 40 + 2 * 4 * n * f * 4);
  const auto back = read_cache(path);
  CHECK(back.celltype_hops[3] == pf.celltype_hops[3]);
  std::filesystem::remove(path);
}

TEST_CASE("parallel kernels are bit-identical to serial") {
  Rng rng(9);
  const Matrix a = random_matrix(rng, 37, 19), b = random_matrix(rng, 19, 23), bt = random_matrix(rng, 23, 19),
               c = random_matrix(rng, 37, 23);
  const auto g = oracle::random_graph(rng, 37, 2, 3);
  const auto s = normalize_adjacency(g.voronoi, g.n);
  const int saved = kernels::thread_count();
  for (int threads : {1, 2, 3, 4}) {
    kernels::set_thread_count(threads);
    Matrix p1(37, 23), p2(37, 23);
    kernels::matmul(a, b, p1.view());
    kernels::serial::matmul(a, b, p2.view());
    CHECK(p1 == p2);
    kernels::matmul(a, b, p1.view(), true);
    kernels::serial::matmul(a, b, p2.view(), true);
    CHECK(p1 == p2);

    Matrix t1(19, 23), t2(19, 23);
    kernels::matmul_tn_acc(a, c, t1.view());
    kernels::serial::matmul_tn_acc(a, c, t2.view());
    CHECK(t1 == t2);

    Matrix n1(37, 23), n2(37, 23);
    kernels::matmul_nt(a, bt, n1.view());
    kernels::serial::matmul_nt(a, bt, n2.view());
    CHECK(n1 == n2);

    std::vector<double> s1(19, 1.0), s2(19, 1.0);
    kernels::column_sums_acc(a, s1);
    kernels::serial::column_sums_acc(a, s2);
    CHECK(s1 == s2);

    Matrix y1(37, 19), y2(37, 19);
    kernels::spmm(s, a, y1.view());
    kernels::serial::spmm(s, a, y2.view());
    CHECK(y1 == y2);
  }
  kernels::set_thread_count(saved);

  const Eigen::MatrixXd ref = eig(a) * eig(b);
  Matrix p(37, 23);
  kernels::matmul(a, b, p.view());
  CHECK(oracle::max_abs_diff(eig(p), ref) <= 1e-12);
  Matrix t(19, 23);
  kernels::matmul_tn_acc(a, c, t.view());
  CHECK(oracle::max_abs_diff(eig(t), eig(a).transpose() * eig(c)) <= 1e-12);
  Matrix n(37, 23);
  kernels::matmul_nt(a, bt, n.view());
  CHECK(oracle::max_abs_diff(eig(n), eig(a) * eig(bt).transpose()) <= 1e-12);
}
