#include <doctest.h>

#include <cmath>
#include <cstring>

#include "prisomap/error.hpp"
#include "prisomap/linalg.hpp"
#include "support.hpp"

using namespace prisomap;
using prisomap::test::random_points;
using prisomap::test::random_symmetric;

namespace {

// -1/2 H D H with an explicit centering matrix.
Matrix center_by_product(const Matrix& d) {
  const Index n = d.rows();
  const Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  return -0.5 * h * d * h;
}

}  // namespace

TEST_CASE("double_center: two points at unit distance") {
  Matrix d(2, 2);
  d << 0, 1, 1, 0;
  const Matrix k = double_center(d);
  Matrix expected(2, 2);
  expected << 0.25, -0.25, -0.25, 0.25;
  CHECK((k - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("double_center: zero distances give the zero kernel") {
  CHECK(double_center(Matrix::Zero(2, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("double_center: matches the explicit matrix product and centers rows") {
  Matrix x = random_points(6, 3, 11);
  Matrix d = squared_euclidean_distances(x);
  const Matrix k = double_center(d);
  CHECK((k - center_by_product(d)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(k.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(k.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);

  // An arbitrary symmetric matrix with zero diagonal, not a distance matrix.
  Matrix s = random_symmetric(6, 12).cwiseAbs();
  s.diagonal().setZero();
  const Matrix ks = double_center(s);
  CHECK(ks.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  CHECK((ks - center_by_product(s)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("double_center: Gram identity on arbitrary point sets") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 5 + static_cast<Index>(seed % 7) * 4;
    const Index dim = 1 + static_cast<Index>(seed % 5);
    Matrix x = random_points(n, dim, seed, 3.0);
    const Matrix k = double_center(squared_euclidean_distances(x));
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const Matrix gram = centered * centered.transpose();
    CHECK(prisomap::test::max_rel_diff(gram, k) < 1e-8);
  }
}

TEST_CASE("double_center: error contract") {
  Matrix d(2, 2);
  d << 0, 1, 2, 0;
  CHECK_THROWS_AS(double_center(d), Error);
  try {
    double_center(d);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonSymmetricInput);
  }
  Matrix s(2, 2);
  s << 0, std::nan(""), std::nan(""), 0;
  try {
    double_center(s);
    FAIL("expected SentinelPresent");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SentinelPresent);
  }
}

TEST_CASE("symmetric_eig: diagonal matrix") {
  Matrix a = Matrix::Zero(3, 3);
  a.diagonal() << 3, 1, 2;
  const EigenResult r = symmetric_eig(a, 2);
  CHECK(r.values(0) == doctest::Approx(3.0));
  CHECK(r.values(1) == doctest::Approx(2.0));
  CHECK((r.vectors.col(0) - Vector::Unit(3, 0)).norm() < 1e-12);
  CHECK((r.vectors.col(1) - Vector::Unit(3, 2)).norm() < 1e-12);
}

TEST_CASE("symmetric_eig: 2x2 closed form with sign normalization") {
  Matrix a(2, 2);
  a << 0.25, -0.25, -0.25, 0.25;
  const EigenResult r = symmetric_eig(a, 1);
  CHECK(r.values(0) == doctest::Approx(0.5).epsilon(1e-14));
  // Both entries tie in magnitude; the lower index carries the positive sign.
  CHECK(r.vectors(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(r.vectors(1, 0) == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("symmetric_eig: reconstruction, ordering, norms and residuals") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Index n = 1 + static_cast<Index>(seed % 20);
    const Matrix a = random_symmetric(n, seed * 7);
    const EigenResult r = symmetric_eig(a, n);
    const Matrix rebuilt = r.vectors * r.values.asDiagonal() * r.vectors.transpose();
    CHECK((rebuilt - a).norm() < 1e-8);
    for (Index i = 0; i < n; ++i) {
      CHECK(std::abs(r.vectors.col(i).norm() - 1.0) < 1e-10);
      CHECK((a * r.vectors.col(i) - r.values(i) * r.vectors.col(i)).norm() <= 1e-8 * std::max(1.0, a.norm()));
      if (i > 0) CHECK(r.values(i - 1) >= r.values(i));
      Index arg = 0;
      r.vectors.col(i).cwiseAbs().maxCoeff(&arg);
      CHECK(r.vectors(arg, i) > 0);
    }
  }
}

TEST_CASE("symmetric_eig: identical bytes in, identical bytes out") {
  const Matrix a = random_symmetric(15, 99);
  const EigenResult r1 = symmetric_eig(a, 5);
  const EigenResult r2 = symmetric_eig(a, 5);
  CHECK(std::memcmp(r1.values.data(), r2.values.data(), sizeof(double) * 5) == 0);
  CHECK(std::memcmp(r1.vectors.data(), r2.vectors.data(), sizeof(double) * 75) == 0);
}

TEST_CASE("symmetric_eig: equal eigenvalues ordered by first differing entry") {
  const EigenResult r = symmetric_eig(Matrix::Identity(3, 3), 3);
  for (Index i = 0; i < 3; ++i) CHECK(r.values(i) == doctest::Approx(1.0));
  for (Index i = 0; i + 1 < 3; ++i) {
    Index j = 0;
    while (j < 3 && r.vectors(j, i) == r.vectors(j, i + 1)) ++j;
    REQUIRE(j < 3);
    CHECK(r.vectors(j, i) > r.vectors(j, i + 1));
  }
}

TEST_CASE("symmetric_eig: Lanczos agrees with the dense solver") {
  const Matrix a = random_symmetric(60, 5);
  const EigenResult dense = symmetric_eig(a, 6, EigenSolverKind::Dense);
  const EigenResult lanczos = symmetric_eig(a, 6, EigenSolverKind::Lanczos);
  for (Index i = 0; i < 6; ++i) {
    CHECK(std::abs(dense.values(i) - lanczos.values(i)) < 1e-8);
    CHECK((dense.vectors.col(i) - lanczos.vectors.col(i)).norm() < 1e-6);
  }
}

TEST_CASE("symmetric_eig: Lanczos on a low-rank kernel above the dense limit") {
  const Index n = kDenseEigenLimit + 52;
  const Matrix x = random_points(n, 3, 17, 2.0);
  const Matrix k = double_center(squared_euclidean_distances(x));
  const EigenResult r = symmetric_eig(k, 3);  // automatic -> Lanczos
  const Matrix centered = x.rowwise() - x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> small(centered.transpose() * centered);
  for (Index i = 0; i < 3; ++i) CHECK(r.values(i) == doctest::Approx(small.eigenvalues()(2 - i)).epsilon(1e-9));
}

TEST_CASE("symmetric_eig: argument checks") {
  CHECK_THROWS_AS(symmetric_eig(Matrix::Identity(3, 3), 0), Error);
  CHECK_THROWS_AS(symmetric_eig(Matrix::Identity(3, 3), 4), Error);
  Matrix a(2, 2);
  a << 1, 2, 3, 1;
  CHECK_THROWS_AS(symmetric_eig(a, 1), Error);
}

TEST_CASE("mds_coordinates: two-point kernel") {
  Matrix k(2, 2);
  k << 0.25, -0.25, -0.25, 0.25;
  const MdsCoordinates m = mds_coordinates(k, 1);
  CHECK(m.coordinates(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(m.coordinates(1, 0) == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK_FALSE(m.rank_deficient);
}

TEST_CASE("mds_coordinates: zero kernel is rank deficient") {
  const MdsCoordinates m = mds_coordinates(Matrix::Zero(4, 4), 2);
  CHECK(m.coordinates.cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.rank_deficient);
  CHECK(m.effective_rank == 0);
}

TEST_CASE("mds_coordinates: five points on a line are recovered exactly") {
  Matrix x(5, 1);
  x << 0.0, 1.0, 2.5, 4.0, 7.0;
  const Matrix d = squared_euclidean_distances(x);
  const MdsCoordinates m = mds_coordinates(double_center(d), 1);
  const Matrix emb = euclidean_distances(m.coordinates);
  CHECK((emb - d.cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(m.clamped_count == 0);
}

TEST_CASE("mds_coordinates: exactness for points in R^p") {
  for (Index p : {1, 2, 3, 5}) {
    const Matrix x = random_points(40, p, 100 + static_cast<std::uint64_t>(p), 4.0);
    const Matrix d = euclidean_distances(x);
    const MdsCoordinates m = mds_coordinates(double_center(squared_euclidean_distances(x)), p);
    CHECK(prisomap::test::max_rel_diff(d, euclidean_distances(m.coordinates)) < 1e-8);
  }
}

TEST_CASE("mds_coordinates: negative eigenvalues are clamped and counted") {
  Matrix k = Matrix::Zero(3, 3);
  k.diagonal() << 2.0, -1.0, -3.0;
  const MdsCoordinates m = mds_coordinates(k, 2);
  CHECK(m.clamped_count == 1);
  CHECK(m.coordinates.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.rank_deficient);
}
