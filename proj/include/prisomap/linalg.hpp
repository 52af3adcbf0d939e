#pragma once

#include <Eigen/Dense>

namespace prisomap {

using Index = Eigen::Index;
// Row-major dense matrix. Observations are rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Full decomposition up to this order; Lanczos extraction of the top pairs
// above it.
inline constexpr Index kDenseEigenLimit = 2048;

enum class EigenSolverKind { Automatic, Dense, Lanczos };

struct EigenResult {
  Vector values;   // non-increasing
  Matrix vectors;  // n x top, column i is the unit eigenvector for values(i)
};

// K = -1/2 H D H with H = I - 11^T/n. Consumes squared distances.
// Throws NonSymmetricInput or SentinelPresent (any non-finite entry).
Matrix double_center(const Matrix& squared_distances);

// Top `top` eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
// Each eigenvector is sign-normalized so that its largest-magnitude entry is
// positive (lowest index on ties); exactly equal eigenvalues are ordered by
// the first differing eigenvector entry, larger first.
// Every returned pair satisfies |A v - l v| <= 1e-8 max(1, |A|_F), otherwise
// ConvergenceFailure is thrown.
EigenResult symmetric_eig(const Matrix& a, Index top,
                          EigenSolverKind solver = EigenSolverKind::Automatic);

struct MdsCoordinates {
  Matrix coordinates;  // n x p; y_i = (sqrt(l_1) v_1i, ..., sqrt(l_p) v_pi)
  Vector eigenvalues;  // raw top-p eigenvalues, before clamping
  Index clamped_count = 0;   // negative eigenvalues among the top p, zeroed
  Index effective_rank = 0;  // eigenvalues above 1e-12 * l_1
  bool rank_deficient = false;  // effective_rank < p; trailing columns are zero
};

MdsCoordinates mds_coordinates(const Matrix& kernel, Index p);

// Pairwise distances between the rows of `points`, summed coordinate by
// coordinate (no Gram-matrix shortcut), so entry (i,j) is bitwise equal to (j,i).
Matrix squared_euclidean_distances(const Matrix& points);
Matrix euclidean_distances(const Matrix& points);

double max_abs_asymmetry(const Matrix& a);

}  // namespace prisomap
