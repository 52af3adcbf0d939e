#include "prisomap/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "prisomap/error.hpp"
#include "prisomap/parallel.hpp"

namespace prisomap {

namespace {

void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be square");
  }
}

void require_symmetric(const Matrix& a, const char* what) {
  const double tol = 1e-9 * a.norm();
  if (max_abs_asymmetry(a) > tol) {
    throw Error(ErrorCode::NonSymmetricInput, std::string(what) + " is not symmetric");
  }
}

void normalize_sign(Eigen::Ref<Vector> v) {
  Index best = 0;
  for (Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v(best) < 0) v = -v;
}

struct Pair {
  double value;
  Vector vector;
};

// Sorted pairs -> result; applies the sign convention and the tie order.
EigenResult finalize(std::vector<Pair> pairs, Index top) {
  for (auto& p : pairs) normalize_sign(p.vector);
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.value != b.value) return a.value > b.value;
    for (Index i = 0; i < a.vector.size(); ++i) {
      if (a.vector(i) != b.vector(i)) return a.vector(i) > b.vector(i);
    }
    return false;
  });
  const Index n = pairs.empty() ? 0 : pairs.front().vector.size();
  EigenResult out;
  out.values.resize(top);
  out.vectors.resize(n, top);
  for (Index i = 0; i < top; ++i) {
    out.values(i) = pairs[static_cast<std::size_t>(i)].value;
    out.vectors.col(i) = pairs[static_cast<std::size_t>(i)].vector;
  }
  return out;
}

std::vector<Pair> dense_pairs(const Matrix& a, Index top) {
  Eigen::MatrixXd col_major = a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(col_major);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::ConvergenceFailure, "dense symmetric eigensolver did not converge");
  }
  const Index n = a.rows();
  // Keep every pair whose value ties the cut so the tie order stays well defined.
  Index first = n - top;
  while (first > 0 && solver.eigenvalues()(first - 1) == solver.eigenvalues()(first)) --first;
  std::vector<Pair> pairs;
  for (Index i = n - 1; i >= first; --i) {
    pairs.push_back({solver.eigenvalues()(i), solver.eigenvectors().col(i)});
  }
  return pairs;
}

// Lanczos with full reorthogonalization and a fixed-seed start vector.
// Stops once the top Ritz pairs have estimated residuals below 1e-10 * scale.
std::vector<Pair> lanczos_pairs(const Matrix& a, Index top) {
  const Index n = a.rows();
  const double scale = std::max(1.0, a.norm());
  const double tol = 1e-10 * scale;
  const Index budget = 10 * n;

  std::mt19937_64 rng(0x5eed1a2c05ULL);
  auto random_unit = [&](const std::vector<Vector>& basis) {
    for (int attempt = 0; attempt < 8; ++attempt) {
      Vector v(n);
      for (Index i = 0; i < n; ++i) {
        v(i) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
      }
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) v -= q.dot(v) * q;
      }
      const double norm = v.norm();
      if (norm > 1e-8) return Vector(v / norm);
    }
    return Vector();
  };

  std::vector<Vector> basis;
  std::vector<double> alpha, beta;
  basis.push_back(random_unit(basis));

  Index matvecs = 0;
  while (true) {
    const Vector& q = basis.back();
    Vector w = a * q;
    ++matvecs;
    const double alpha_j = q.dot(w);
    alpha.push_back(alpha_j);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) w -= b.dot(w) * b;
    }
    double beta_j = w.norm();
    const Index m = static_cast<Index>(basis.size());

    bool exhausted = m == n;
    bool restart = false;
    if (!exhausted && beta_j < 1e-12 * scale) {
      Vector fresh = random_unit(basis);
      if (fresh.size() == 0) {
        exhausted = true;
      } else {
        restart = true;
        w = fresh;
        beta_j = 0.0;
      }
    }

    const bool check = exhausted || (m >= top && (m % 8 == 0 || restart || matvecs >= budget));
    if (check) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (Index i = 0; i < m; ++i) {
        t(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
      bool converged = small.info() == Eigen::Success && m >= top;
      if (converged && !exhausted) {
        for (Index i = m - 1; i >= m - top; --i) {
          if (std::abs(beta_j * small.eigenvectors()(m - 1, i)) > tol) {
            converged = false;
            break;
          }
        }
      }
      if (converged) {
        std::vector<Pair> pairs;
        for (Index i = m - 1; i >= m - top; --i) {
          Vector v = Vector::Zero(n);
          for (Index j = 0; j < m; ++j) v += small.eigenvectors()(j, i) * basis[static_cast<std::size_t>(j)];
          v.normalize();
          pairs.push_back({small.eigenvalues()(i), std::move(v)});
        }
        return pairs;
      }
      if (exhausted || matvecs >= budget) {
        throw Error(ErrorCode::ConvergenceFailure, "Lanczos iteration budget exhausted");
      }
    }
    beta.push_back(beta_j);
    basis.push_back(restart ? Vector(w) : Vector(w / beta_j));
  }
}

}  // namespace

double max_abs_asymmetry(const Matrix& a) {
  double worst = 0.0;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = i + 1; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
  }
  return worst;
}

Matrix double_center(const Matrix& squared_distances) {
  const Matrix& d = squared_distances;
  require_square(d, "squared distance matrix");
  if (!d.allFinite()) {
    throw Error(ErrorCode::SentinelPresent, "distance matrix contains unreachable or non-finite entries");
  }
  require_symmetric(d, "squared distance matrix");
  const Index n = d.rows();
  if (n == 0) return Matrix();
  const Vector row_mean = d.rowwise().mean();
  const Eigen::RowVectorXd col_mean = d.colwise().mean();
  const double grand = row_mean.mean();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      k(i, j) = -0.5 * (d(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  return k;
}

EigenResult symmetric_eig(const Matrix& a, Index top, EigenSolverKind solver) {
  require_square(a, "eigen input");
  const Index n = a.rows();
  if (top < 1 || top > n) {
    throw Error(ErrorCode::InvalidArgument, "requested eigenpair count must lie in [1, n]");
  }
  if (!a.allFinite()) throw Error(ErrorCode::InvalidArgument, "eigen input has non-finite entries");
  require_symmetric(a, "eigen input");

  const bool dense = solver == EigenSolverKind::Dense ||
                     (solver == EigenSolverKind::Automatic && n <= kDenseEigenLimit);
  EigenResult out = finalize(dense ? dense_pairs(a, top) : lanczos_pairs(a, top), top);

  const double tol = 1e-8 * std::max(1.0, a.norm());
  for (Index i = 0; i < top; ++i) {
    const double residual = (a * out.vectors.col(i) - out.values(i) * out.vectors.col(i)).norm();
    if (!(residual <= tol)) {
      throw Error(ErrorCode::ConvergenceFailure, "eigenpair residual above tolerance");
    }
  }
  return out;
}

MdsCoordinates mds_coordinates(const Matrix& kernel, Index p) {
  const Index n = kernel.rows();
  if (p < 1 || p > n) throw Error(ErrorCode::InvalidArgument, "target dimension must lie in [1, n]");
  EigenResult eig = symmetric_eig(kernel, p);

  MdsCoordinates out;
  out.eigenvalues = eig.values;
  out.coordinates = Matrix::Zero(n, p);
  const double leading = eig.values(0);
  for (Index i = 0; i < p; ++i) {
    const double value = eig.values(i);
    if (value < 0) ++out.clamped_count;
    if (leading > 0 && value > 1e-12 * leading) {
      ++out.effective_rank;
      out.coordinates.col(i) = std::sqrt(value) * eig.vectors.col(i);
    }
  }
  out.rank_deficient = out.effective_rank < p;
  return out;
}

Matrix squared_euclidean_distances(const Matrix& points) {
  const Index n = points.rows();
  const Index d = points.cols();
  Matrix out = Matrix::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t row) {
    const Index i = static_cast<Index>(row);
    for (Index j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (Index c = 0; c < d; ++c) {
        const double diff = points(i, c) - points(j, c);
        s += diff * diff;
      }
      out(i, j) = s;
    }
  });
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out(j, i) = out(i, j);
  }
  return out;
}

Matrix euclidean_distances(const Matrix& points) {
  return squared_euclidean_distances(points).cwiseSqrt();
}

}  // namespace prisomap
