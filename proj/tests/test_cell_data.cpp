#include "oracles.hpp"
#include "helpers.hpp"

#include "mew/cell_data.hpp"
#include "mew/error.hpp"
#include "mew/multiplex.hpp"

#include <doctest.h>

#include <sstream>

using namespace mew;

namespace {

using helpers::error_of;

CellTable parse(const std::string& text) {
  std::istringstream in(text);
  return parse_cell_table(in, ColumnMapping{}, "img");
}

CellTable table_from(const std::vector<std::vector<double>>& bio) {
  CellTable t;
  t.image_id = "t";
  t.biomarkers = Matrix(bio.size(), bio.empty() ? 0 : bio[0].size());
  for (std::size_t i = 0; i < bio.size(); ++i) {
    t.cell_ids.push_back(static_cast<std::int64_t>(i));
    t.x.push_back(static_cast<double>(i));
    t.y.push_back(static_cast<double>(i * i % 7));
    t.size.push_back(1.0);
    for (std::size_t j = 0; j < bio[i].size(); ++j) t.biomarkers(i, j) = bio[i][j];
  }
  return t;
}

}  // namespace

TEST_CASE("parse a small table") {
  const auto t = parse("cell_id,x,y,size,b1,b2\n1,0,0,10,0.5,1\n2,1,0,12,0.25,2\n3,0,1,9,1,3\n");
  CHECK(t.size_n() == 3);
  CHECK(t.feature_dim() == 3);
  CHECK(t.biomarker_names == std::vector<std::string>{"b1", "b2"});
  CHECK(!t.has_cell_type_column());
  const Matrix f = t.features();
  CHECK(f(1, 0) == 0.25);
  CHECK(f(1, 2) == 12.0);
}

TEST_CASE("cell-type column with blanks") {
  const auto t = parse("cell_id,x,y,size,b1,cell_type\n1,0,0,10,0.5,T\n2,1,0,12,0.25,\n");
  REQUIRE(t.has_cell_type_column());
  CHECK(t.cell_type[0] == std::optional<std::string>("T"));
  CHECK(!t.cell_type[1].has_value());
  CHECK(!t.fully_typed());
}

TEST_CASE("table errors") {
  CHECK(error_of([] { parse("cell_id,x,y,size,b1\n7,0,0,1,1\n7,1,1,1,1\n"); }) == Errc::DuplicateCellId);
  try {
    parse("cell_id,x,y,size,b1,b2\n1,0,0,1,1,1\n2,0,1,1,1,1\n3,1,0,1,1,1\n4,1,1,1,1,1\n5,2,2,1,1,nan\n");
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonFiniteValue);
    const std::string what = e.what();
    CHECK(what.find("row 5") != std::string::npos);
    CHECK(what.find("\"b2\"") != std::string::npos);
  }
  CHECK(error_of([] { parse("cell_id,x,size,b1\n1,0,1,1\n"); }) == Errc::MissingColumn);
  CHECK(error_of([] { parse("cell_id,x,y,size,b1\n"); }) == Errc::EmptyTable);
  CHECK(error_of([] { parse("cell_id,x,y,size,b1\n1,0,0,0,1\n"); }) == Errc::InvalidValue);
}

TEST_CASE("write and reload round trip") {
  auto t = parse("cell_id,x,y,size,b1,cell_type\n1,0.1,0.2,10,0.3333333333333333,A\n2,1,0,12,-1e-300,B\n");
  const auto path = std::filesystem::temp_directory_path() / "mew_roundtrip.csv";
  write_cell_table(path, t);
  const auto u = load_cell_table(path, ColumnMapping{}, "img");
  CHECK(u.x == t.x);
  CHECK(u.biomarkers == t.biomarkers);
  CHECK(u.cell_type == t.cell_type);
  std::filesystem::remove(path);
}

TEST_CASE("k-means on two obvious clusters") {
  const auto t = table_from({{0, 0}, {0.1, 0}, {5, 5}, {5.1, 5}});
  const auto r = kmeans_celltype({t}, {.k = 2, .seed = 1, .max_iter = 100, .standardize = false});
  const auto& ty = r.tables[0].cell_type;
  CHECK(ty[0] == ty[1]);
  CHECK(ty[2] == ty[3]);
  CHECK(ty[0] != ty[2]);

  // Brute force over every 2-partition for the minimum within-cluster SS.
  const std::vector<std::array<double, 2>> x{{0, 0}, {0.1, 0}, {5, 5}, {5.1, 5}};
  double best = INFINITY;
  int best_mask = 0;
  for (int mask = 1; mask < 15; ++mask) {
    double ss = 0.0;
    for (int side = 0; side < 2; ++side) {
      std::array<double, 2> c{0, 0};
      int m = 0;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == side) c[0] += x[i][0], c[1] += x[i][1], ++m;
      if (m == 0) continue;
      c[0] /= m, c[1] /= m;
      for (int i = 0; i < 4; ++i)
        if (((mask >> i) & 1) == side) ss += std::pow(x[i][0] - c[0], 2) + std::pow(x[i][1] - c[1], 2);
    }
    if (ss < best) best = ss, best_mask = mask;
  }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK((ty[i] == ty[j]) == (((best_mask >> i) & 1) == ((best_mask >> j) & 1)));
  CHECK(r.objective.back() == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("k-means with k equal to the cell count") {
  const auto t = table_from({{0, 1}, {2, 3}, {4, 7}, {-1, 0}, {3, 3}});
  const auto r = kmeans_celltype({t}, {.k = 5, .seed = 4});
  std::set<std::string> labels;
  for (const auto& c : r.tables[0].cell_type) labels.insert(*c);
  CHECK(labels.size() == 5);
  CHECK(r.objective.back() == 0.0);
}

TEST_CASE("k-means needs enough cells") {
  const auto t = table_from({{1, 2}});
  CHECK(error_of([&] { kmeans_celltype({t}, {.k = 2}); }) == Errc::TooFewCells);
}

TEST_CASE("label propagation leaves a typed table alone") {
  auto t = table_from({{0}, {1}, {2}});
  t.cell_type = {"A", "B", "A"};
  const auto u = propagate_labels(t, delaunay_adjacency(t.points()), 100, 1e-9);
  CHECK(u.cell_type == t.cell_type);
}

TEST_CASE("label propagation tie goes to the first label") {
  auto t = table_from({{0}, {1}, {2}});
  t.cell_type = {"t1", std::nullopt, "t2"};
  const EdgeList path{{0, 1, 1.0}, {1, 2, 1.0}};
  CHECK(propagate_labels(t, path, 100, 1e-12).cell_type[1] == std::optional<std::string>("t1"));
  t.cell_type = {"t2", std::nullopt, "t1"};
  CHECK(propagate_labels(t, path, 100, 1e-12).cell_type[1] == std::optional<std::string>("t2"));
}

TEST_CASE("label propagation without seeds") {
  auto t = table_from({{0}, {1}, {2}});
  t.cell_type = {std::nullopt, std::nullopt, std::nullopt};
  CHECK(error_of([&] { propagate_labels(t, EdgeList{{0, 1, 1.0}}, 10, 1e-9); }) == Errc::NoSeedLabels);
}

TEST_CASE("label propagation agrees with a dense power iteration") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    std::vector<std::vector<double>> bio(10, std::vector<double>{0.0});
    auto t = table_from(bio);
    for (std::size_t i = 0; i < 10; ++i) {
      t.x[i] = uniform(rng, 0, 10);
      t.y[i] = uniform(rng, 0, 10);
    }
    const std::vector<std::string> names{"a", "b", "c"};
    for (std::size_t i = 0; i < 10; ++i) {
      if (i < 4)
        t.cell_type.emplace_back(names[i % 3]);
      else
        t.cell_type.emplace_back(std::nullopt);
    }
    const auto edges = delaunay_adjacency(t.points());
    const auto u = propagate_labels(t, edges, 10000, 1e-15);

    // F <- D^-1 A F on unlabeled rows, seed rows clamped.
    const Eigen::MatrixXd a = oracle::dense_adjacency(edges, 10);
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(10, 3);
    for (int i = 0; i < 4; ++i) f(i, i % 3) = 1.0;
    for (int it = 0; it < 10000; ++it) {
      Eigen::MatrixXd g = f;
      for (int i = 4; i < 10; ++i) g.row(i) = a.row(i) * f / a.row(i).sum();
      f = g;
    }
    for (int i = 4; i < 10; ++i) {
      Eigen::Index best;
      f.row(i).maxCoeff(&best);
      CHECK(u.cell_type[static_cast<std::size_t>(i)] == std::optional<std::string>(names[static_cast<std::size_t>(best)]));
    }
  }
}

TEST_CASE("cell-type pairs") {
  CHECK(CellTypePairs(std::vector<int>{0, 0, 1}).materialize() ==
        std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 1}});
  CHECK(CellTypePairs(std::vector<int>{0, 1, 2}).pair_count() == 0);
  CHECK(CellTypePairs(std::vector<int>{0, 1, 0, 1, 1, 0, 1}).pair_count() == 9);
  CHECK(error_of([] { CellTypePairs(std::vector<int>{0, -1}); }) == Errc::UntypedNode);
}

TEST_CASE("assemble a three-cell multiplex") {
  auto t = table_from({{1}, {2}, {3}});
  t.x = {0, 1, 0};
  t.y = {0, 0, 1};
  t.cell_type = {"A", "A", "B"};
  const auto g = assemble_multiplex(t, delaunay_adjacency(t.points()));
  CHECK(g.n == 3);
  CHECK(g.voronoi.size() == 3);
  CHECK(g.celltype.pair_count() == 1);
  CHECK(g.features.cols() == 2);
  CHECK(homophily_ratio(g.voronoi, g.type_codes) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("single-type image gives a complete cell-type layer") {
  const std::vector<int> types(12, 0);
  CHECK(CellTypePairs(types).pair_count() == 66);
}

TEST_CASE("homophily") {
  CHECK(homophily_ratio(EdgeList{{0, 1, 1.0}}, std::vector<int>{3, 3}) == 1.0);
  CHECK_THROWS_AS(homophily_ratio(EdgeList{}, std::vector<int>{}), Error);
}
