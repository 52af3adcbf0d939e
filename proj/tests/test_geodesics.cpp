#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "prisomap/error.hpp"
#include "prisomap/geodesics.hpp"
#include "support.hpp"

using namespace prisomap;

namespace {

Matrix line_points(std::initializer_list<double> xs) {
  Matrix m(static_cast<Index>(xs.size()), 1);
  Index i = 0;
  for (double v : xs) m(i++, 0) = v;
  return m;
}

// Treats NaN as +inf.
double as_length(double d) { return std::isnan(d) ? std::numeric_limits<double>::infinity() : d; }

double max_deviation(const GeodesicMatrix& a, const GeodesicMatrix& b) {
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < a.size(); ++j) {
      if (a.reachable(i, j) != b.reachable(i, j)) return std::numeric_limits<double>::infinity();
      if (a.reachable(i, j)) worst = std::max(worst, std::abs(a.matrix()(i, j) - b.matrix()(i, j)));
    }
  return worst;
}

}  // namespace

TEST_CASE("dijkstra_from: unit path graph") {
  const NeighborGraph g = graph_from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
  const ShortestPaths sp = dijkstra_from(g, 0);
  CHECK(sp.distance == std::vector<double>{0, 1, 2});
  CHECK(sp.parent == std::vector<Index>{kNoParent, 0, 1});
}

TEST_CASE("dijkstra_from: unreachable vertex keeps the sentinel") {
  const NeighborGraph g = knn_graph(line_points({0, 1, 3}), 1, 1.5);
  const ShortestPaths sp = dijkstra_from(g, 0);
  CHECK(std::isnan(sp.distance[2]));
  CHECK(sp.parent[2] == kNoParent);
}

TEST_CASE("dijkstra_from: equal-length paths prefer the smaller parent") {
  const NeighborGraph g = graph_from_edges(4, {{0, 2, 1.0}, {0, 1, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}});
  CHECK(dijkstra_from(g, 0).parent[3] == 1);
  CHECK(dijkstra_from(g, 3).parent[0] == 1);
}

TEST_CASE("dijkstra_from: random connected graph matches Floyd-Warshall") {
  const Matrix x = test::random_points(50, 3, 123);
  const NeighborGraph g = knn_graph(x, 6, kUnboundedWindow);
  REQUIRE(components(g).count == 1);
  const GeodesicMatrix fw = floyd_warshall_oracle(g);
  for (Index s = 0; s < 50; ++s) {
    const ShortestPaths sp = dijkstra_from(g, s);
    for (Index t = 0; t < 50; ++t) CHECK(std::abs(sp.distance[static_cast<std::size_t>(t)] - fw.matrix()(s, t)) <= 1e-9);
    // Parents trace back to the source along shortest paths.
    for (Index t = 0; t < 50; ++t) {
      if (t == s) continue;
      const Index p = sp.parent[static_cast<std::size_t>(t)];
      REQUIRE(p != kNoParent);
      double w = 0;
      for (const Edge& e : g.uniform_neighbors(p))
        if (e.target == t) w = e.weight;
      CHECK(w > 0);
      CHECK(sp.distance[static_cast<std::size_t>(p)] + w == doctest::Approx(sp.distance[static_cast<std::size_t>(t)]));
    }
  }
}

TEST_CASE("all_pairs: three collinear points") {
  const Matrix x = line_points({0, 1, 3});
  const GeodesicMatrix full = all_pairs(knn_graph(x, 2, kUnboundedWindow));
  CHECK(full.matrix()(0, 2) == 3.0);
  CHECK(full.finite_fraction() == 1.0);
  const GeodesicMatrix capped = all_pairs(knn_graph(x, 2, 1.5));
  CHECK_FALSE(capped.reachable(0, 2));
  CHECK_FALSE(capped.at(0, 2).has_value());
  CHECK(capped.at(0, 1) == 1.0);
  CHECK(capped.finite_fraction() == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("all_pairs: single vertex") {
  const GeodesicMatrix g = all_pairs(graph_from_edges(1, {}));
  CHECK(g.size() == 1);
  CHECK(g.matrix()(0, 0) == 0.0);
}

TEST_CASE("all_pairs: rejects edges beyond the graph window") {
  const NeighborGraph g = graph_from_edges(3, {{0, 1, 1.0}, {1, 2, 2.0}}, 1, 1.5);
  try {
    all_pairs(g);
    FAIL("expected InvalidGraph");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidGraph);
  }
}

TEST_CASE("floyd_warshall_oracle: trivial graphs and size guard") {
  const GeodesicMatrix none = floyd_warshall_oracle(graph_from_edges(3, {}));
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) CHECK(none.reachable(i, j) == (i == j));
  const GeodesicMatrix one = floyd_warshall_oracle(graph_from_edges(3, {{0, 1, 2.5}}));
  CHECK(one.matrix()(0, 1) == 2.5);
  CHECK_FALSE(one.reachable(0, 2));
  CHECK_FALSE(one.reachable(1, 2));
  try {
    floyd_warshall_oracle(graph_from_edges(kFloydWarshallLimit + 1, {}));
    FAIL("expected TooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooLarge);
  }
}

TEST_CASE("all_pairs: oracle equivalence on 100 random capped graphs") {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(99));
    const Index d = 1 + static_cast<Index>(rng.below(4));
    const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min<Index>(n - 1, 12))));
    const Matrix x = test::random_points(n, d, 1000 + static_cast<std::uint64_t>(trial));
    const double h = rng.uniform() < 0.2 ? kUnboundedWindow : 0.2 + 1.8 * rng.uniform();
    const NeighborGraph g = knn_graph(x, k, h);
    worst = std::max(worst, max_deviation(all_pairs(g), floyd_warshall_oracle(g)));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("all_pairs: metric invariants and local agreement") {
  const Matrix x = test::random_points(90, 3, 55);
  const NeighborGraph g = knn_graph(x, 5, 1.0);
  const GeodesicMatrix geo = all_pairs(g);
  const Matrix& d = geo.matrix();
  const Matrix euclid = test::brute_distances(x);
  for (Index i = 0; i < 90; ++i) {
    CHECK(d(i, i) == 0.0);
    for (Index j = 0; j < 90; ++j) {
      CHECK(std::memcmp(&d(i, j), &d(j, i), sizeof(double)) == 0);
      if (!geo.reachable(i, j)) continue;
      CHECK(d(i, j) >= euclid(i, j) - 1e-9);
      for (Index m = 0; m < 90; ++m)
        if (geo.reachable(i, m) && geo.reachable(m, j)) CHECK(d(i, j) <= d(i, m) + d(m, j) + 1e-9);
    }
    for (const Edge& e : g.uniform_neighbors(i)) {
      CHECK(d(i, e.target) <= e.weight);
      CHECK(d(i, e.target) >= e.weight - 1e-9);
    }
  }
}

TEST_CASE("all_pairs: tighter caps never shorten paths") {
  const Matrix x = test::random_points(100, 2, 66);
  const KnnCandidates cand = knn_candidates(x, 7);
  Matrix previous;
  for (double h : {1.5, 0.8, 0.5, 0.3}) {
    const GeodesicMatrix geo = all_pairs(knn_graph(cand, h));
    if (previous.size() > 0) {
      for (Index i = 0; i < 100; ++i)
        for (Index j = 0; j < 100; ++j) CHECK(as_length(geo.matrix()(i, j)) >= as_length(previous(i, j)));
    }
    previous = geo.matrix();
  }
}

TEST_CASE("geodesic block: round trip with sentinels and fingerprint") {
  auto dir = test::scratch_dir("geoblock");
  const Matrix x = test::random_points(30, 2, 12);
  const GraphFingerprint fp{hash_data(x), 4, 0.6};
  const GeodesicMatrix geo = all_pairs(knn_graph(x, 4, 0.6), fp);
  REQUIRE(geo.finite_fraction() < 1.0);
  write_geodesic_block(dir / "g.bin", geo);
  const GeodesicMatrix back = read_geodesic_block(dir / "g.bin");
  CHECK(back.fingerprint() == fp);
  CHECK(back.finite_fraction() == geo.finite_fraction());
  CHECK(std::memcmp(back.matrix().data(), geo.matrix().data(), sizeof(double) * 900) == 0);

  std::ofstream(dir / "bad.bin", std::ios::binary) << "NOTGEO01xxxxxxxxxxxxxxxx";
  try {
    read_geodesic_block(dir / "bad.bin");
    FAIL("expected BadMagic");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadMagic);
  }
  std::filesystem::resize_file(dir / "g.bin", 200);
  CHECK_THROWS_AS(read_geodesic_block(dir / "g.bin"), Error);
}

TEST_CASE("hash_data: sensitive to content and shape") {
  Matrix a = test::random_points(4, 3, 1);
  Matrix b = a;
  CHECK(hash_data(a) == hash_data(b));
  b(3, 2) = std::nextafter(b(3, 2), 10.0);
  CHECK(hash_data(a) != hash_data(b));
  const Matrix c = Eigen::Map<const Matrix>(a.data(), 3, 4);
  CHECK(hash_data(a) != hash_data(c));
}
