#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "prisomap/datasets.hpp"
#include "prisomap/error.hpp"
#include "prisomap/evaluation.hpp"
#include "support.hpp"

using namespace prisomap;

namespace {

// Rank r[i][j] of j among i's neighbours (1 = nearest), ties by index.
std::vector<std::vector<Index>> naive_ranks(const Matrix& d) {
  const Index n = d.rows();
  std::vector<std::vector<Index>> rank(static_cast<std::size_t>(n), std::vector<Index>(static_cast<std::size_t>(n), 0));
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> order;
    for (Index j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d(i, a) < d(i, b); });
    for (std::size_t r = 0; r < order.size(); ++r) rank[static_cast<std::size_t>(i)][static_cast<std::size_t>(order[r])] = static_cast<Index>(r) + 1;
  }
  return rank;
}

// Textbook trustworthiness: penalize embedded neighbours that are far in the reference.
double naive_trust(const Matrix& ref, const Matrix& emb, Index m) {
  const Index n = ref.rows();
  const auto rr = naive_ranks(ref);
  const auto re = naive_ranks(emb);
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Index r_ref = rr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const Index r_emb = re[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (r_emb <= m && r_ref > m) total += static_cast<double>(r_ref - m);
    }
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return 1.0 - 2.0 / (nn * mm * (2.0 * nn - 3.0 * mm - 1.0)) * total;
}

std::vector<int> balanced_labels(Index n, int classes) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  return labels;
}

}  // namespace

TEST_CASE("stress: identical, doubled and flat-exact embeddings") {
  const Matrix x = test::random_points(30, 2, 1);
  const Matrix d = euclidean_distances(x);
  const StressResult same = stress(d, d);
  CHECK(same.value == 0.0);
  CHECK(same.pairs == 435);
  CHECK(stress(d, 2.0 * d).value == doctest::Approx(1.0).epsilon(1e-14));
  const MdsCoordinates mds = mds_coordinates(double_center(squared_euclidean_distances(x)), 2);
  CHECK(stress(d, euclidean_distances(mds.coordinates)).value <= 1e-7);
}

TEST_CASE("stress: unreachable pairs are excluded and counted") {
  Matrix ref(3, 3);
  ref << 0, 1, NAN, 1, 0, NAN, NAN, NAN, 0;
  Matrix emb(3, 3);
  emb << 0, 2, 5, 2, 0, 5, 5, 5, 0;
  const StressResult s = stress(ref, emb);
  CHECK(s.pairs == 1);
  CHECK(s.excluded_pairs == 2);
  CHECK(s.value == doctest::Approx(1.0));
  Matrix none(2, 2);
  none << 0, NAN, NAN, 0;
  try {
    stress(none, Matrix::Zero(2, 2));
    FAIL("expected NoFinitePairs");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoFinitePairs);
  }
}

TEST_CASE("stress: nonnegative, zero only for equal matrices") {
  const Matrix d = euclidean_distances(test::random_points(20, 3, 2));
  Matrix e = d;
  e(3, 4) = e(4, 3) = d(3, 4) * (1.0 + 1e-6);
  CHECK(stress(d, e).value > 0.0);
}

TEST_CASE("residual_variance and distance_correlation") {
  const Matrix d = euclidean_distances(test::random_points(25, 3, 3));
  CHECK(residual_variance(d, 3.0 * d) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(distance_correlation(d, d) == doctest::Approx(1.0));
  const Matrix other = euclidean_distances(test::random_points(25, 3, 4));
  const double rv = residual_variance(d, other);
  CHECK(rv > 0.0);
  CHECK(rv <= 1.0);
  CHECK(rv == doctest::Approx(1.0 - std::pow(distance_correlation(d, other), 2)));
}

TEST_CASE("trustworthiness_continuity: identity embedding") {
  const Matrix d = euclidean_distances(test::random_points(40, 3, 5));
  const NeighborhoodScores s = trustworthiness_continuity(d, d, 5);
  CHECK(s.trustworthiness == 1.0);
  CHECK(s.continuity == 1.0);
}

TEST_CASE("trustworthiness_continuity: matches the textbook formula") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Index n = 20 + static_cast<Index>(seed) * 3;
    const Matrix ref = euclidean_distances(test::random_points(n, 4, seed));
    const Matrix emb = euclidean_distances(test::random_points(n, 2, seed + 100));
    for (Index m : {1, 3, 7}) {
      const NeighborhoodScores s = trustworthiness_continuity(ref, emb, m);
      CHECK(s.trustworthiness == doctest::Approx(naive_trust(ref, emb, m)).epsilon(1e-12));
      CHECK(s.continuity == doctest::Approx(naive_trust(emb, ref, m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("trustworthiness_continuity: random permutation null") {
  const Matrix x = test::random_points(100, 3, 6);
  const Matrix ref = euclidean_distances(x);
  Rng rng(7);
  std::vector<double> trust_null, cont_null;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Index> perm(100);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix y(100, 3);
    for (Index i = 0; i < 100; ++i) y.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
    const NeighborhoodScores s = trustworthiness_continuity(ref, euclidean_distances(y), 5);
    trust_null.push_back(s.trustworthiness);
    cont_null.push_back(s.continuity);
  }
  std::sort(trust_null.begin(), trust_null.end());
  std::sort(cont_null.begin(), cont_null.end());
  // Empirical 99th percentile of the null.
  CHECK(trust_null[197] < 0.7);
  CHECK(cont_null[197] < 0.7);
  CHECK(trust_null[100] == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("trustworthiness_continuity: neighbourhood size bounds") {
  const Matrix d = euclidean_distances(test::random_points(10, 2, 1));
  CHECK_THROWS_AS(trustworthiness_continuity(d, d, 0), Error);
  CHECK_THROWS_AS(trustworthiness_continuity(d, d, 5), Error);
  CHECK_NOTHROW(trustworthiness_continuity(d, d, 4));
}

TEST_CASE("metrics are invariant under rigid motion of the embedding") {
  const Matrix x = test::random_points(80, 3, 8);
  const Matrix ref = euclidean_distances(x);
  const Matrix y = test::random_points(80, 2, 9);
  Matrix q = test::random_rotation(2, 3);
  q.col(0) *= -1.0;  // include a reflection
  const Matrix moved = (y * q).rowwise() + Eigen::RowVector2d(5.0, -7.0);
  const Matrix dy = euclidean_distances(y), dm = euclidean_distances(moved);
  CHECK(std::abs(stress(ref, dy).value - stress(ref, dm).value) < 1e-9);
  const NeighborhoodScores a = trustworthiness_continuity(ref, dy, 7);
  const NeighborhoodScores b = trustworthiness_continuity(ref, dm, 7);
  CHECK(a.trustworthiness == b.trustworthiness);
  CHECK(a.continuity == b.continuity);
  const std::vector<int> labels = balanced_labels(80, 2);
  CHECK(knn_classify_cv(y, labels, 5, 5, 1).fold_accuracy == knn_classify_cv(moved, labels, 5, 5, 1).fold_accuracy);
  // Reversing one coordinate sign.
  Matrix flipped = y;
  flipped.col(1) *= -1.0;
  const NeighborhoodScores c = trustworthiness_continuity(ref, euclidean_distances(flipped), 7);
  CHECK(c.trustworthiness == a.trustworthiness);
  CHECK(c.continuity == a.continuity);
}

TEST_CASE("make_stratified_folds: determinism and balance") {
  std::vector<int> labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 23 + 4 * c; ++i) labels.push_back(c);
  const FoldAssignment a = make_stratified_folds(labels, 10, 5);
  CHECK(a.fold == make_stratified_folds(labels, 10, 5).fold);
  CHECK(a.fold != make_stratified_folds(labels, 10, 6).fold);
  std::map<int, std::map<int, int>> per_class;
  std::map<int, int> sizes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++per_class[labels[i]][a.fold[i]];
    ++sizes[a.fold[i]];
  }
  for (auto& [label, counts] : per_class) {
    CHECK(counts.size() == 10);
    int lo = 1 << 30, hi = 0;
    for (auto [fold, c] : counts) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
  }
  int lo = 1 << 30, hi = 0;
  for (auto [fold, c] : sizes) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("make_stratified_folds: infeasible requests") {
  std::vector<int> labels{0, 0, 0, 1, 1, 1, 1};
  try {
    make_stratified_folds(labels, 4, 1);
    FAIL("expected ClassTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ClassTooSmall);
  }
  CHECK_THROWS_AS(make_stratified_folds({0, 0, 0, 0}, 2, 1), Error);
  CHECK_THROWS_AS(make_stratified_folds(labels, 1, 1), Error);
}

TEST_CASE("knn_classify_cv: separated blobs are classified perfectly") {
  Matrix y = test::random_points(100, 2, 10, 0.5);
  std::vector<int> labels(100);
  for (Index i = 0; i < 100; ++i) {
    labels[static_cast<std::size_t>(i)] = i < 50 ? 0 : 1;
    if (i >= 50) y(i, 0) += 20.0;
  }
  const CvResult r = knn_classify_cv(y, labels, 5, 10, 3);
  CHECK(r.mean == 1.0);
  CHECK(r.sd == 0.0);
  CHECK(r.fold_accuracy.size() == 10);
}

TEST_CASE("knn_classify_cv: shuffled labels sit at chance") {
  const Index n = 200;
  const Matrix y = test::random_points(n, 2, 11);
  const double null_sd = std::sqrt(0.25 / static_cast<double>(n));
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::vector<int> labels = balanced_labels(n, 2);
    Rng rng(seed);
    rng.shuffle(labels);
    const CvResult r = knn_classify_cv(y, labels, 5, 10, seed);
    CHECK(std::abs(r.mean - 0.5) <= 3.0 * null_sd);
  }
}

TEST_CASE("knn_classify_cv: label count must match") {
  const Matrix y = test::random_points(20, 2, 1);
  CHECK_THROWS_AS(knn_classify_cv(y, balanced_labels(19, 2), 3, 2, 1), Error);
}

TEST_CASE("uniformity_cv: identical points and ZeroMeanDensity") {
  CHECK(uniformity_cv(pr_density(Matrix::Zero(20, 3), 5, 1.0)) == 0.0);
  DensityEstimate zero;
  zero.values.assign(4, 0.0);
  try {
    uniformity_cv(zero);
    FAIL("expected ZeroMeanDensity");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroMeanDensity);
  }
}

TEST_CASE("uniformity_cv: chart grid is more uniform than a skewed sample") {
  // Grid evenly spaced in arc length and height, mapped onto the roll.
  const double s0 = swiss_roll_arc_length(kRollAngleMin), s1 = swiss_roll_arc_length(kRollAngleMax);
  const int rows = 60, cols = 25;
  Matrix grid(rows * cols, 3);
  for (int a = 0; a < rows; ++a) {
    const double target = s0 + (s1 - s0) * (a + 0.5) / rows;
    double t = 3.0 * std::numbers::pi;
    for (int it = 0; it < 60; ++it) t -= (swiss_roll_arc_length(t) - target) / std::sqrt(1.0 + t * t);
    for (int b = 0; b < cols; ++b) grid.row(a * cols + b) << t * std::cos(t), kRollHeight * (b + 0.5) / cols, t * std::sin(t);
  }
  SwissRollSpec spec;
  spec.n = rows * cols;
  spec.density_exponent = 3.0;
  spec.seed = 12;
  const Matrix skewed = gen_swiss_roll(spec).ambient;
  const double h = 2.0 * percentile(knn_edge_lengths(knn_candidates(grid, 10)), 50);
  CHECK(uniformity_cv(pr_density(grid, 10, h)) < uniformity_cv(pr_density(skewed, 10, h)));
}

TEST_CASE("uniformity_cv: joint scaling of data and window") {
  SwissRollSpec spec;
  spec.n = 400;
  spec.density_exponent = 2.0;
  spec.seed = 13;
  const Matrix x = gen_swiss_roll(spec).ambient;
  const double base = uniformity_cv(pr_density(x, 10, 1.7));
  for (double c : {0.01, 3.7, 250.0}) CHECK(std::abs(uniformity_cv(pr_density(c * x, 10, c * 1.7)) - base) <= 1e-9);
}

TEST_CASE("evaluate: report fields, JSON and CSV") {
  const Matrix x = test::random_points(60, 3, 14);
  const Matrix ref = euclidean_distances(x);
  const Matrix y = x.leftCols(2);
  const std::vector<int> labels = balanced_labels(60, 3);
  const FoldAssignment folds = make_stratified_folds(labels, 5, 2);
  const DensityEstimate density = pr_density(x, 8, 1.0);
  EvalRequest req;
  req.reference = &ref;
  req.rank_reference = &ref;
  req.coordinates = &y;
  req.neighborhood = 6;
  req.labels = &labels;
  req.folds = &folds;
  req.density = &density;
  EvalReport report = evaluate(req);
  report.run = {{"method", {{"name", "pca"}}}};
  REQUIRE(report.stress.has_value());
  CHECK(report.stress->value == doctest::Approx(stress(ref, euclidean_distances(y)).value));
  CHECK(report.neighborhood->m == 6);
  CHECK(report.knn->folds == 5);
  CHECK(*report.density_cv == doctest::Approx(uniformity_cv(density)));
  const nlohmann::json j = report.to_json(false);
  CHECK(j["schema"] == kEvalReportSchema);
  CHECK(j["n_points"] == 60);
  CHECK_FALSE(j.contains("timings"));
  for (const char* key : {"stress", "residual_variance", "trustworthiness", "continuity", "knn_accuracy", "density_cv"})
    CHECK(j.contains(key));
  const std::string line = report.to_csv_line();
  const std::string header = EvalReport::csv_header();
  CHECK(std::count(line.begin(), line.end(), ',') == std::count(header.begin(), header.end(), ','));
  CHECK(line.rfind("pca,60,", 0) == 0);
  for (double v : {j["stress"].get<double>(), j["trustworthiness"].get<double>(), j["continuity"].get<double>()}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
