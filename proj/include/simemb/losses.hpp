#pragma once

// Training objectives and the kernel Gram machinery. Every loss returns its
// value together with the gradient with respect to its direct input
// (pre-softmax logits, a predicted similarity vector, or the d-vector
// columns); composition with backpropagation happens in the trainer.

#include <cmath>
#include <string>

#include "simemb/types.hpp"

namespace simemb {

enum class Kernel { sigmoid, inner_product };

std::string to_string(Kernel k);
Kernel kernel_from_string(const std::string& s);

template <typename Scalar>
Scalar kernel_value(Kernel kernel, Scalar inner) {
  return kernel == Kernel::sigmoid ? std::tanh(inner) : inner;
}

/// Binary mask selecting perceptually similar pairs: 1 where s_ij > 0.
struct MaskMatrix {
  Eigen::MatrixXi entries;

  int size() const { return static_cast<int>(entries.rows()); }
  /// Number of off-diagonal ones, i.e. ||W - I||_F^2 for a unit diagonal.
  long off_diagonal_ones() const {
    return static_cast<long>(entries.sum()) - static_cast<long>(entries.diagonal().sum());
  }
};

template <typename Derived>
MaskMatrix build_mask(const Eigen::MatrixBase<Derived>& scores) {
  MaskMatrix w;
  w.entries = (scores.array() > typename Derived::Scalar(0)).template cast<int>();
  w.entries.diagonal().setOnes();
  return w;
}

MaskMatrix build_mask(const SimilarityMatrix& sim);

template <typename Scalar>
struct VectorLoss {
  Scalar loss{};
  Vector<Scalar> gradient;
  /// Set when the probability at the hot index was floored.
  bool clamped = false;
};

template <typename Scalar>
struct MatrixLoss {
  Scalar loss{};
  /// d(loss)/d(d-vectors), one column per speaker (N_d x N_s).
  Matrix<Scalar> gradient;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Softmax cross-entropy against a one-hot speaker code. The gradient is with
/// respect to the pre-softmax logits: predicted - code.
template <typename Derived>
VectorLoss<typename Derived::Scalar> sce_loss(const SpeakerCode& target,
                                              const Eigen::MatrixBase<Derived>& predicted) {
  using Scalar = typename Derived::Scalar;
  if (predicted.size() != target.dim) throw ShapeError("speaker code dimension mismatch");
  if (std::abs(predicted.sum() - Scalar(1)) > Scalar(1e-6)) {
    throw InputError("predicted probabilities do not sum to 1");
  }
  VectorLoss<Scalar> r;
  Scalar p = predicted(target.hot_index);
  if (p < Scalar(kProbabilityFloor)) {
    p = Scalar(kProbabilityFloor);
    r.clamped = true;
  }
  r.loss = -std::log(p);
  r.gradient = predicted;
  r.gradient(target.hot_index) -= Scalar(1);
  return r;
}

/// (1/N_s) * ||predicted - target||^2.
template <typename DerivedT, typename DerivedP>
VectorLoss<typename DerivedP::Scalar> simvec_loss(const Eigen::MatrixBase<DerivedT>& target,
                                                  const Eigen::MatrixBase<DerivedP>& predicted) {
  using Scalar = typename DerivedP::Scalar;
  if (target.size() != predicted.size() || target.size() == 0) {
    throw ShapeError("similarity vector dimension mismatch");
  }
  const Scalar n = static_cast<Scalar>(target.size());
  const Vector<Scalar> residual = predicted - target;
  VectorLoss<Scalar> r;
  r.loss = residual.squaredNorm() / n;
  r.gradient = (Scalar(2) / n) * residual;
  return r;
}

/// Gram matrix K[i][j] = k(d_i, d_j) over d-vector columns.
template <typename Derived>
Matrix<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& dvectors,
                                      Kernel kernel) {
  Matrix<typename Derived::Scalar> k = dvectors.transpose() * dvectors;
  if (kernel == Kernel::sigmoid) k = k.array().tanh().matrix();
  return k;
}

namespace detail {

template <typename DerivedD, typename DerivedS>
MatrixLoss<typename DerivedD::Scalar> matrix_embedding_loss(
    const Eigen::MatrixBase<DerivedD>& dvectors, const Eigen::MatrixBase<DerivedS>& sim,
    typename DerivedD::Scalar diagonal, Kernel kernel, const MaskMatrix* mask) {
  using Scalar = typename DerivedD::Scalar;
  const Eigen::Index n = dvectors.cols();
  if (sim.rows() != n || sim.cols() != n) {
    throw ShapeError("similarity matrix size does not match the number of d-vectors");
  }
  if (n < 2) throw ShapeError("matrix losses need at least two speakers");

  Scalar coefficient;
  if (mask) {
    if (mask->entries.rows() != n || mask->entries.cols() != n) {
      throw ShapeError("mask size does not match the number of d-vectors");
    }
    const long ones = mask->off_diagonal_ones();
    if (ones == 0) throw DegenerateError("mask has no off-diagonal ones");
    coefficient = Scalar(2) / static_cast<Scalar>(ones);
  } else {
    coefficient = Scalar(2) / static_cast<Scalar>(n * n - n);
  }

  const Matrix<Scalar> k = gram(dvectors, kernel);
  Matrix<Scalar> k_tilde = k;
  k_tilde.diagonal().setZero();
  Matrix<Scalar> s_tilde = sim.template cast<Scalar>();
  s_tilde.diagonal().array() -= diagonal;

  Matrix<Scalar> residual = k_tilde - s_tilde;
  if (mask) residual.array() *= mask->entries.template cast<Scalar>().array();

  MatrixLoss<Scalar> r;
  r.loss = coefficient * residual.squaredNorm();

  // The zeroed diagonal of K~ does not depend on the d-vectors.
  Matrix<Scalar> weights = Scalar(4) * coefficient * residual;
  weights.diagonal().setZero();
  if (kernel == Kernel::sigmoid) weights.array() *= Scalar(1) - k.array().square();
  r.gradient = dvectors * weights;
  return r;
}

}  // namespace detail

/// Squared Frobenius distance between the off-diagonal Gram matrix of the
/// d-vector columns and the diagonal-subtracted similarity matrix, scaled by
/// 2 / (N_s^2 - N_s).
template <typename DerivedD, typename DerivedS>
MatrixLoss<typename DerivedD::Scalar> simmat_loss(const Eigen::MatrixBase<DerivedD>& dvectors,
                                                  const Eigen::MatrixBase<DerivedS>& sim,
                                                  typename DerivedD::Scalar diagonal,
                                                  Kernel kernel) {
  return detail::matrix_embedding_loss(dvectors, sim, diagonal, kernel, nullptr);
}

/// Masked variant: only pairs with w_ij = 1 contribute, scaled by
/// 2 / ||W - I||_F^2. Throws DegenerateError when no off-diagonal pair is
/// selected.
template <typename DerivedD, typename DerivedS>
MatrixLoss<typename DerivedD::Scalar> simmat_relaxed_loss(
    const Eigen::MatrixBase<DerivedD>& dvectors, const Eigen::MatrixBase<DerivedS>& sim,
    typename DerivedD::Scalar diagonal, const MaskMatrix& mask, Kernel kernel) {
  return detail::matrix_embedding_loss(dvectors, sim, diagonal, kernel, &mask);
}

/// Columns of `dvecs` for speakers 0..n-1 in index order. Throws
/// CoverageError when one is missing.
MatrixXd speaker_columns(const DVectorSet& dvecs, int n);

MatrixXd gram(const DVectorSet& dvecs, int n_speakers, Kernel kernel);

/// Speaker-keyed overloads. `sim` must be normalized (StateError otherwise);
/// its diagonal value is the subtracted scalar.
MatrixLoss<double> simmat_loss(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                               Kernel kernel);
/// Also checks that `mask` agrees with build_mask(sim) (InputError otherwise).
MatrixLoss<double> simmat_relaxed_loss(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                       const MaskMatrix& mask, Kernel kernel);

}  // namespace simemb
