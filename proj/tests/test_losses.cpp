#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fd_oracle.hpp"
#include "simemb/losses.hpp"

using namespace simemb;
using simemb::testing::numeric_gradient_matrix;
using simemb::testing::relative_error;

namespace {

MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

MatrixXd random_similarity(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd s = MatrixXd::Ones(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) s(i, j) = s(j, i) = u(rng);
  }
  return s;
}

// Brute-force double loop over all ordered off-diagonal pairs.
double brute_simmat(const MatrixXd& d, const MatrixXd& s, Kernel kernel, const MatrixXd* w) {
  const int n = static_cast<int>(d.cols());
  double sum = 0;
  double count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double wij = w ? (*w)(i, j) : 1.0;
      double inner = 0;
      for (int k = 0; k < d.rows(); ++k) inner += d(k, i) * d(k, j);
      const double kij = kernel == Kernel::sigmoid ? std::tanh(inner) : inner;
      sum += wij * (kij - s(i, j)) * (kij - s(i, j));
      count += wij;
    }
  }
  return 2.0 * sum / count;
}

VectorXd softmax(const VectorXd& logits) {
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

TEST_CASE("sce examples") {
  VectorXd p(2);
  p << 0.5, 0.5;
  auto r = sce_loss(make_speaker_code(0, 2), p);
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_FALSE(r.clamped);

  VectorXd exact = VectorXd::Unit(3, 1);
  r = sce_loss(make_speaker_code(1, 3), exact);
  CHECK(r.loss == 0.0);
  CHECK(r.gradient.isZero(0.0));

  for (int n : {2, 5, 16}) {
    const VectorXd uniform = VectorXd::Constant(n, 1.0 / n);
    CHECK(sce_loss(make_speaker_code(n - 1, n), uniform).loss ==
          doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-12));
  }

  VectorXd zero_hot(2);
  zero_hot << 1.0, 0.0;
  r = sce_loss(make_speaker_code(1, 2), zero_hot);
  CHECK(r.clamped);
  CHECK(std::isfinite(r.loss));
  CHECK(r.loss == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("sce gradient wrt logits matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const VectorXd logits = random_matrix(6, 1, seed);
    const int hot = static_cast<int>(seed % 6);
    const auto code = make_speaker_code(hot, 6);
    const auto r = sce_loss(code, softmax(logits));
    const MatrixXd fd = numeric_gradient_matrix(
        logits, [&](const MatrixXd& z) { return -std::log(softmax(z)(hot)); }, 1e-6);
    CHECK(relative_error(r.gradient, fd) <= 1e-6);
    CHECK(r.loss >= 0.0);
  }
}

TEST_CASE("sce errors") {
  VectorXd p(2);
  p << 0.5, 0.5;
  CHECK_THROWS_AS(sce_loss(make_speaker_code(0, 3), p), ShapeError);
  p << 0.5, 0.6;
  CHECK_THROWS_AS(sce_loss(make_speaker_code(0, 2), p), InputError);
}

TEST_CASE("simvec examples") {
  VectorXd s(3), p(3);
  s << 1, 0, -1;
  p << 1, 0, -1;
  CHECK(simvec_loss(s, p).loss == 0.0);
  p << 1, 0.5, -0.5;
  CHECK(simvec_loss(s, p).loss == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(simvec_loss(s, VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("simvec gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const VectorXd s = random_matrix(7, 1, seed);
    const VectorXd p = random_matrix(7, 1, seed + 50);
    const auto r = simvec_loss(s, p);
    const MatrixXd fd = numeric_gradient_matrix(
        p, [&](const MatrixXd& x) { return (x - s).squaredNorm() / 7.0; }, 1e-6);
    CHECK(relative_error(r.gradient, fd) <= 1e-8);
  }
}

TEST_CASE("gram examples") {
  const MatrixXd zero = MatrixXd::Zero(3, 4);
  CHECK(gram(zero, Kernel::sigmoid).isZero(0.0));
  MatrixXd d(2, 2);
  d << 1, 0, 0, 1;
  const MatrixXd k = gram(d, Kernel::sigmoid);
  CHECK(k(0, 0) == doctest::Approx(0.7615941559557649).epsilon(1e-15));
  CHECK(k(0, 1) == 0.0);
  CHECK(gram(d, Kernel::inner_product) == MatrixXd::Identity(2, 2));

  const MatrixXd r = random_matrix(4, 6, 3);
  const MatrixXd g = gram(r, Kernel::sigmoid);
  CHECK(g == g.transpose());
  CHECK((g.array().abs() < 1.0).all());
}

TEST_CASE("simmat example with two speakers") {
  MatrixXd d(1, 2);
  d << 0, 0;
  MatrixXd s(2, 2);
  s << 1, 0.5, 0.5, 1;
  // K~ = 0, S~ off-diagonal 0.5: loss = 2/2 * (0.25 + 0.25).
  CHECK(simmat_loss(d, s, 1.0, Kernel::sigmoid).loss == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(simmat_loss(MatrixXd(MatrixXd::Zero(1, 1)), MatrixXd(MatrixXd::Ones(1, 1)),
                              1.0, Kernel::sigmoid),
                  ShapeError);
  CHECK_THROWS_AS(simmat_loss(d, MatrixXd(MatrixXd::Ones(3, 3)), 1.0, Kernel::sigmoid),
                  ShapeError);
}

TEST_CASE("simmat matches a brute-force double loop") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const int n = 3 + static_cast<int>(seed % 5);
    const MatrixXd d = random_matrix(4, n, seed, 0.7);
    const MatrixXd s = random_similarity(n, seed + 1);
    for (Kernel kernel : {Kernel::sigmoid, Kernel::inner_product}) {
      CHECK(std::abs(simmat_loss(d, s, 1.0, kernel).loss - brute_simmat(d, s, kernel, nullptr)) <=
            1e-12);
    }
  }
}

TEST_CASE("simmat ignores the diagonal of the similarity matrix") {
  const MatrixXd d = random_matrix(3, 5, 4);
  MatrixXd s = random_similarity(5, 5);
  const double base = simmat_loss(d, s, 1.0, Kernel::sigmoid).loss;
  s.diagonal().setConstant(0.3);
  CHECK(simmat_loss(d, s, 0.3, Kernel::sigmoid).loss == base);
}

TEST_CASE("simmat gradient matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MatrixXd d = random_matrix(3, 6, seed, 0.6);
    const MatrixXd s = random_similarity(6, seed + 9);
    for (Kernel kernel : {Kernel::sigmoid, Kernel::inner_product}) {
      const auto r = simmat_loss(d, s, 1.0, kernel);
      const MatrixXd fd = numeric_gradient_matrix(
          d, [&](const MatrixXd& x) { return brute_simmat(x, s, kernel, nullptr); }, 1e-6);
      CHECK(relative_error(r.gradient, fd) <= 1e-6);
    }
  }
}

TEST_CASE("simmat is invariant under a joint speaker permutation") {
  const int n = 7;
  const MatrixXd d = random_matrix(4, n, 8);
  const MatrixXd s = random_similarity(n, 9);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(10));
  MatrixXd dp(4, n), sp(n, n);
  for (int i = 0; i < n; ++i) {
    dp.col(i) = d.col(perm[i]);
    for (int j = 0; j < n; ++j) sp(i, j) = s(perm[i], perm[j]);
  }
  CHECK(simmat_loss(dp, sp, 1.0, Kernel::sigmoid).loss ==
        doctest::Approx(simmat_loss(d, s, 1.0, Kernel::sigmoid).loss).epsilon(1e-12));
  const MatrixXd mask_w = build_mask(s).entries.cast<double>();
  CHECK(simmat_relaxed_loss(dp, sp, 1.0, build_mask(sp), Kernel::sigmoid).loss ==
        doctest::Approx(brute_simmat(d, s, Kernel::sigmoid, &mask_w)).epsilon(1e-12));
}

TEST_CASE("build_mask") {
  MatrixXd s(3, 3);
  s << 1, 0, 0.2, 0, 1, -0.5, 0.2, -0.5, 1;
  const auto w = build_mask(s);
  Eigen::MatrixXi expected(3, 3);
  expected << 1, 0, 1, 0, 1, 0, 1, 0, 1;
  CHECK(w.entries == expected);
  CHECK(w.off_diagonal_ones() == 2);

  const SimilarityMatrix sim(s, 1.0, true);
  CHECK(build_mask(sim).entries == expected);
}

TEST_CASE("relaxed loss equals simmat when every similarity is positive") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    MatrixXd s = random_similarity(5, seed).cwiseAbs();
    s = (s.array() + 0.01).min(1.0).matrix();
    s.diagonal().setOnes();
    const MatrixXd d = random_matrix(3, 5, seed);
    const auto a = simmat_loss(d, s, 1.0, Kernel::sigmoid);
    const auto b = simmat_relaxed_loss(d, s, 1.0, build_mask(s), Kernel::sigmoid);
    CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
    CHECK(relative_error(a.gradient, b.gradient) <= 1e-14);
  }
}

TEST_CASE("relaxed loss example with three speakers") {
  MatrixXd s(3, 3);
  s << 1, 0.4, -0.5, 0.4, 1, -0.5, -0.5, -0.5, 1;
  const MatrixXd d = MatrixXd::Zero(2, 3);
  // Only {0,1} is selected: coefficient 2/2, residual 0.4 counted twice.
  const auto r = simmat_relaxed_loss(d, s, 1.0, build_mask(s), Kernel::sigmoid);
  CHECK(r.loss == doctest::Approx(0.32).epsilon(1e-14));
}

TEST_CASE("relaxed loss ignores masked pairs and matches finite differences") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const int n = 6;
    const MatrixXd d = random_matrix(3, n, seed, 0.6);
    MatrixXd s = random_similarity(n, seed + 20);
    const auto mask = build_mask(s);
    if (mask.off_diagonal_ones() == 0) continue;
    const MatrixXd w = mask.entries.cast<double>();
    const auto r = simmat_relaxed_loss(d, s, 1.0, mask, Kernel::sigmoid);
    CHECK(std::abs(r.loss - brute_simmat(d, s, Kernel::sigmoid, &w)) <= 1e-12);

    const MatrixXd fd = numeric_gradient_matrix(
        d, [&](const MatrixXd& x) { return brute_simmat(x, s, Kernel::sigmoid, &w); }, 1e-6);
    CHECK(relative_error(r.gradient, fd) <= 1e-6);

    // Changing a masked-out target does not move the loss.
    MatrixXd s2 = s;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && mask.entries(i, j) == 0) s2(i, j) = -0.99;
      }
    }
    CHECK(simmat_relaxed_loss(d, s2, 1.0, mask, Kernel::sigmoid).loss == r.loss);
  }
}

TEST_CASE("relaxed loss with no positive pair is degenerate") {
  MatrixXd s = MatrixXd::Constant(3, 3, -0.5);
  s.diagonal().setOnes();
  CHECK_THROWS_AS(
      simmat_relaxed_loss(MatrixXd(MatrixXd::Zero(2, 3)), s, 1.0, build_mask(s), Kernel::sigmoid),
      DegenerateError);
}

TEST_CASE("speaker-keyed overloads") {
  DVectorSet dv;
  dv.speakers = {{1, "b", Openness::closed}, {0, "a", Openness::closed}};
  dv.vectors = random_matrix(2, 2, 1);
  const MatrixXd cols = speaker_columns(dv, 2);
  CHECK(cols.col(0) == dv.vectors.col(1));

  MatrixXd s(2, 2);
  s << 1, 0.5, 0.5, 1;
  const SimilarityMatrix sim(s, 1.0, true);
  CHECK(simmat_loss(dv, sim, Kernel::sigmoid).loss ==
        simmat_loss(cols, s, 1.0, Kernel::sigmoid).loss);

  MatrixXd raw(2, 2);
  raw << 3, 1, 1, 3;
  CHECK_THROWS_AS(simmat_loss(dv, SimilarityMatrix(raw, 3, false), Kernel::sigmoid), StateError);

  MaskMatrix wrong;
  wrong.entries = Eigen::MatrixXi::Ones(2, 2);
  wrong.entries(0, 1) = 0;
  CHECK_THROWS_AS(simmat_relaxed_loss(dv, sim, wrong, Kernel::sigmoid), InputError);
  CHECK_THROWS_AS(speaker_columns(dv, 3), CoverageError);
}
