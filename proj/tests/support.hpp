#pragma once

#include <filesystem>
#include <string>

#include "prisomap/linalg.hpp"
#include "prisomap/random.hpp"

namespace prisomap::test {

inline Matrix random_points(Index n, Index d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix out(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < d; ++c) out(i, c) = scale * rng.normal();
  }
  return out;
}

inline Matrix random_symmetric(Index n, std::uint64_t seed) {
  Matrix a = random_points(n, n, seed);
  Matrix s = (a + a.transpose()) * 0.5;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) s(j, i) = s(i, j);
  return s;
}

// Orthogonal d x d matrix from the QR factorization of a Gaussian matrix.
inline Matrix random_rotation(Index d, std::uint64_t seed) {
  Eigen::MatrixXd g = random_points(d, d, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  return q;
}

// Brute-force pairwise distances, written independently of the library.
inline Matrix brute_distances(const Matrix& x) {
  Matrix d(x.rows(), x.rows());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).norm();
  return d;
}

inline double max_rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(1e-300, a.cwiseAbs().maxCoeff());
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("prisomap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace prisomap::test
