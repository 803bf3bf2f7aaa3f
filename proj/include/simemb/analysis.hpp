#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simemb/losses.hpp"
#include "simemb/types.hpp"

namespace simemb {

/// Pearson correlation of two equally long samples. Throws DegenerateError
/// with fewer than two points or zero variance in either coordinate.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw ShapeError("pearson needs equally long samples");
  if (x.size() < 2) throw DegenerateError("pearson needs at least two pairs");
  const auto n = static_cast<Scalar>(x.size());
  const auto dx = (x.array() - x.sum() / n).eval();
  const auto dy = (y.array() - y.sum() / n).eval();
  const Scalar sxx = dx.square().sum();
  const Scalar syy = dy.square().sum();
  if (!(sxx > 0) || !(syy > 0)) throw DegenerateError("pearson input has zero variance");
  const Scalar r = (dx * dy).sum() / std::sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

double pearson(std::span<const std::pair<double, double>> pairs);

enum class SubsetKind { all, closed_closed, closed_open, open_open };

std::string to_string(SubsetKind k);

struct PairSubset {
  SubsetKind kind = SubsetKind::all;
  bool positive_only = false;

  /// e.g. "closed_open" or "closed_open_positive".
  std::string name() const;
  /// Whether the off-diagonal pair (i, j) belongs to the subset, ignoring the
  /// positive-only filter.
  bool admits(const SpeakerId& a, const SpeakerId& b) const;
};

struct ScatterPoint {
  int i = 0;
  int j = 0;
  double similarity = 0.0;
  double kernel = 0.0;
};

/// (s_ij, k(d_i, d_j)) for every i < j in the subset, in row-major pair
/// order. Speakers come from `roster`; the d-vector set must contain each of
/// them (CoverageError otherwise).
std::vector<ScatterPoint> scatter_points(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                         Kernel kernel, const PairSubset& subset,
                                         const Roster& roster);

struct CorrelationResult {
  double r = 0.0;
  long pair_count = 0;
};

/// Pearson r between similarity scores and kernel values over a pair subset.
/// Throws DegenerateError when the subset is empty after filtering.
CorrelationResult embedding_correlation(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                        Kernel kernel, const PairSubset& subset,
                                        const Roster& roster);

struct GraphAdjacency {
  Eigen::MatrixXi adjacency;
  Eigen::VectorXi degrees;

  long edge_count() const { return degrees.sum() / 2; }
  /// (i, j) with i < j for each edge, row-major.
  std::vector<std::pair<int, int>> edges() const;
};

/// Similarity graph: the positive-similarity mask with a zero diagonal.
GraphAdjacency adjacency_and_degrees(const SimilarityMatrix& sim);

template <typename Scalar>
struct SymmetricEigen {
  Vector<Scalar> values;   // descending
  Matrix<Scalar> vectors;  // columns, matching `values`
  int sweeps = 0;
};

inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Stops when the
/// off-diagonal Frobenius norm drops below tolerance * ||A||_F or after
/// `max_sweeps` sweeps.
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input,
                                                      double tolerance = kJacobiTolerance,
                                                      int max_sweeps = kJacobiMaxSweeps) {
  using Scalar = typename Derived::Scalar;
  if (input.rows() != input.cols()) throw ShapeError("jacobi_eigen needs a square matrix");
  const Eigen::Index n = input.rows();
  Matrix<Scalar> a = input;
  Matrix<Scalar> v = Matrix<Scalar>::Identity(n, n);
  const Scalar threshold = Scalar(tolerance) * a.norm();

  auto off_norm = [&] {
    Scalar s = 0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) s += 2 * a(p, q) * a(p, q);
    }
    return std::sqrt(s);
  };

  SymmetricEigen<Scalar> out;
  while (out.sweeps < max_sweeps && off_norm() > threshold) {
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Rotation angle zeroing a(p, q); t is the smaller root of
        // t^2 + 2 theta t - 1 = 0.
        const Scalar theta = (a(q, q) - a(p, p)) / (2 * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1));
        const Scalar c = 1 / std::sqrt(t * t + 1);
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return a(x, x) > a(y, y); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[k], order[k]);
    out.vectors.col(k) = v.col(order[k]);
  }
  return out;
}

template <typename Scalar>
struct Layout {
  Matrix<Scalar> coordinates;  // N x dims
  Vector<Scalar> eigenvalues_used;
  /// Fewer than `dims` positive eigenvalues; trailing coordinates are zero.
  bool rank_deficient = false;
};

using GraphLayout = Layout<double>;

/// Classical (Torgerson) MDS of a dissimilarity matrix: double-center
/// -delta^2 / 2, keep the top `dims` positive eigenvalues, scale eigenvectors
/// by their square roots. Negative eigenvalues are dropped.
template <typename Derived>
Layout<typename Derived::Scalar> classical_mds(const Eigen::MatrixBase<Derived>& dissimilarity,
                                               int dims = 2) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = dissimilarity.rows();
  if (dissimilarity.cols() != n || n == 0) throw ShapeError("MDS needs a square matrix");
  if (dims < 1) throw ConfigError("MDS dimension must be positive");

  const Matrix<Scalar> sq = dissimilarity.array().square().matrix();
  const Vector<Scalar> row_mean = sq.rowwise().mean();
  const Vector<Scalar> col_mean = sq.colwise().mean().transpose();
  const Scalar grand = sq.mean();
  Matrix<Scalar> b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      b(i, j) = Scalar(-0.5) * (sq(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  b = (b + b.transpose()).eval() * Scalar(0.5);

  const auto eig = jacobi_eigen(b);
  const Scalar scale = std::max(eig.values.cwiseAbs().maxCoeff(), Scalar(1));
  Layout<Scalar> out;
  out.coordinates = Matrix<Scalar>::Zero(n, dims);
  out.eigenvalues_used = Vector<Scalar>::Zero(dims);
  for (int d = 0; d < dims; ++d) {
    if (d >= n || !(eig.values(d) > Scalar(1e-12) * scale)) {
      out.rank_deficient = true;
      continue;
    }
    out.eigenvalues_used(d) = eig.values(d);
    out.coordinates.col(d) = eig.vectors.col(d) * std::sqrt(eig.values(d));
  }
  out.coordinates.rowwise() -= out.coordinates.colwise().mean();
  return out;
}

/// MDS layout of a normalized similarity matrix with dissimilarity 1 - s.
GraphLayout mds_layout(const SimilarityMatrix& sim, int dims = 2);

/// Euclidean distance matrix between the rows of `points`.
template <typename Derived>
Matrix<typename Derived::Scalar> pairwise_distances(const Eigen::MatrixBase<Derived>& points) {
  const Eigen::Index n = points.rows();
  Matrix<typename Derived::Scalar> d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) d(i, j) = (points.row(i) - points.row(j)).norm();
  }
  return d;
}

}  // namespace simemb
