#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fd_oracle.hpp"
#include "simemb/losses.hpp"
#include "simemb/network.hpp"

using namespace simemb;
using simemb::testing::flatten;
using simemb::testing::numeric_gradient;
using simemb::testing::relative_error;

namespace {

NetworkShape small_shape(Activation out) {
  return {5, {8, 8, 8, 3}, 3, 4, out};
}

MatrixXd random_inputs(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Network identity_net(int dim) {
  Network net;
  net.layers.push_back({MatrixXd::Identity(dim, dim), VectorXd::Zero(dim), Activation::identity});
  net.bottleneck_index = 0;
  net.standardizer = {VectorXd::Zero(dim), VectorXd::Ones(dim)};
  return net;
}

}  // namespace

TEST_CASE("forward examples") {
  Network zero = make_network(small_shape(Activation::softmax), 1);
  for (auto& l : zero.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  const auto r = forward(zero, random_inputs(5, 3, 2));
  CHECK(r.bottleneck.isZero(0.0));

  const Network net = make_network(small_shape(Activation::softmax), 7);
  const auto s = forward(net, random_inputs(5, 20, 3));
  for (Eigen::Index c = 0; c < s.output.cols(); ++c) {
    CHECK(s.output.col(c).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }

  const MatrixXd x = random_inputs(4, 6, 4);
  CHECK(forward(identity_net(4), x).output == x);
}

TEST_CASE("forward errors") {
  const Network net = make_network(small_shape(Activation::tanh), 1);
  CHECK_THROWS_AS(forward(net, random_inputs(4, 1, 1)), ShapeError);
  MatrixXd x = random_inputs(5, 2, 1);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(forward(net, x), InputError);
}

TEST_CASE("forward is deterministic") {
  const Network net = make_network(small_shape(Activation::softmax), 9);
  const MatrixXd x = random_inputs(5, 10, 9);
  CHECK(forward(net, x).output == forward(net, x).output);
  CHECK(make_network(small_shape(Activation::softmax), 9).layers[0].weight == net.layers[0].weight);
}

TEST_CASE("softmax is shift invariant and overflow safe") {
  Network net = identity_net(4);
  net.layers[0].activation = Activation::softmax;
  net.bottleneck_index = 0;
  // Softmax cannot be the bottleneck, so add a tanh layer in front.
  net.layers.insert(net.layers.begin(),
                    {MatrixXd::Identity(4, 4), VectorXd::Zero(4), Activation::tanh});
  const MatrixXd x = random_inputs(4, 5, 11);
  const MatrixXd base = forward(net, x).output;
  net.layers[1].bias.setConstant(1000.0);
  const MatrixXd shifted = forward(net, x).output;
  CHECK((base - shifted).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(shifted.allFinite());

  net.layers[1].bias << 1000, -1000, 0, 999;
  const MatrixXd extreme = forward(net, x).output;
  CHECK(extreme.allFinite());
}

TEST_CASE("backward with zero signals gives zero gradients") {
  const Network net = make_network(small_shape(Activation::tanh), 3);
  const auto r = forward(net, random_inputs(5, 4, 3));
  const auto g = backward(net, r.cache, MatrixXd::Zero(4, 4), MatrixXd::Zero(3, 4));
  CHECK(flatten(g).isZero(0.0));
}

TEST_CASE("backward single linear layer, squared error") {
  Network net;
  MatrixXd w(2, 2);
  w << 1, 2, 3, 4;
  net.layers.push_back({w, VectorXd::Zero(2), Activation::identity});
  net.standardizer = {VectorXd::Zero(2), VectorXd::Ones(2)};
  const MatrixXd x = VectorXd::Ones(2);
  const auto r = forward(net, x);
  VectorXd target(2);
  target << 1, 2;
  // L = 0.5 ||y - t||^2, y = [3, 7], residual [2, 5].
  const MatrixXd residual = r.output - target;
  const auto g = backward(net, r.cache, residual, MatrixXd::Zero(2, 1));
  MatrixXd expected(2, 2);
  expected << 2, 2, 5, 5;
  CHECK(g.weight[0] == expected);
  CHECK(g.bias[0] == residual.col(0));
}

TEST_CASE("backward matches finite differences with both signals") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network net = make_network(small_shape(Activation::tanh), seed);
    const MatrixXd x = random_inputs(5, 6, seed + 100);
    const MatrixXd out_w = random_inputs(4, 6, seed + 200);
    const MatrixXd bn_w = random_inputs(3, 6, seed + 300);
    // L = <out_w, output> + 0.5 * ||bottleneck - bn_w||^2
    auto loss = [&](const Network& n) {
      const auto r = forward(n, x);
      return out_w.cwiseProduct(r.output).sum() + 0.5 * (r.bottleneck - bn_w).squaredNorm();
    };
    const auto r = forward(net, x);
    const auto g = backward(net, r.cache, out_w, r.bottleneck - bn_w);
    CHECK(relative_error(flatten(g), numeric_gradient(net, loss)) <= 1e-4);
  }
}

TEST_CASE("backward through a softmax output uses the logit gradient") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Network net = make_network(small_shape(Activation::softmax), seed);
    const MatrixXd x = random_inputs(5, 4, seed);
    auto loss = [&](const Network& n) {
      const auto r = forward(n, x);
      double total = 0;
      for (int c = 0; c < 4; ++c) total -= std::log(r.output(c % 4, c));
      return total;
    };
    const auto r = forward(net, x);
    MatrixXd logits_grad = r.output;
    for (int c = 0; c < 4; ++c) logits_grad(c % 4, c) -= 1.0;
    const auto g = backward(net, r.cache, logits_grad, MatrixXd::Zero(3, 4));
    CHECK(relative_error(flatten(g), numeric_gradient(net, loss)) <= 1e-4);
  }
}

TEST_CASE("backward rejects a foreign cache") {
  const Network a = make_network(small_shape(Activation::tanh), 1);
  const Network b = make_network({5, {6, 3}, 1, 4, Activation::tanh}, 1);
  const auto r = forward(b, random_inputs(5, 2, 1));
  CHECK_THROWS_AS(backward(a, r.cache, MatrixXd::Zero(4, 2), MatrixXd::Zero(3, 2)), StateError);
}

TEST_CASE("adagrad first and second steps") {
  Network net = identity_net(2);
  const Network before = net;
  auto state = AdaGradState::fresh(net, 0.01);
  Gradients g = Gradients::zeros_like(net);
  g.weight[0] << 0.5, -2.0, 3.0, 0.0;
  g.bias[0] << 1e3, -1e-3;

  adagrad_step(net, g, state);
  const MatrixXd first = net.layers[0].weight - before.layers[0].weight;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double gi = g.weight[0].data()[i];
    CHECK(first.data()[i] == doctest::Approx(-0.01 * gi / (std::abs(gi) + 1e-8)).epsilon(1e-12));
  }
  CHECK(net.layers[0].bias(0) - before.layers[0].bias(0) ==
        doctest::Approx(-0.01).epsilon(1e-9));

  const Network mid = net;
  adagrad_step(net, g, state);
  const MatrixXd second = net.layers[0].weight - mid.layers[0].weight;
  for (Eigen::Index i = 0; i < 4; ++i) {
    const double gi = std::abs(g.weight[0].data()[i]);
    CHECK(std::abs(second.data()[i]) ==
          doctest::Approx(0.01 * gi / (std::sqrt(2.0) * gi + 1e-8)).epsilon(1e-12));
    if (gi > 0) CHECK(std::abs(second.data()[i]) < std::abs(first.data()[i]));
  }
}

TEST_CASE("adagrad zero gradient and accumulator monotonicity") {
  Network net = make_network(small_shape(Activation::tanh), 4);
  const Network before = net;
  auto state = AdaGradState::fresh(net, 0.01);
  adagrad_step(net, Gradients::zeros_like(net), state);
  CHECK(net.layers[1].weight == before.layers[1].weight);
  CHECK(state.weight_accumulator[1].isZero(0.0));

  const auto r = forward(net, random_inputs(5, 3, 4));
  const auto g = backward(net, r.cache, random_inputs(4, 3, 5), MatrixXd::Zero(3, 3));
  auto previous = state.weight_accumulator;
  for (int step = 0; step < 3; ++step) {
    adagrad_step(net, g, state);
    for (std::size_t l = 0; l < previous.size(); ++l) {
      CHECK((state.weight_accumulator[l].array() >= previous[l].array()).all());
    }
    previous = state.weight_accumulator;
  }

  Gradients wrong = Gradients::zeros_like(identity_net(2));
  CHECK_THROWS_AS(adagrad_step(net, wrong, state), ShapeError);
}

TEST_CASE("fit_standardizer") {
  MatrixXd two(1, 2);
  two << 0, 2;
  const auto s = fit_standardizer(two);
  CHECK(s.mean(0) == 1.0);
  CHECK(s.std(0) == 1.0);

  const MatrixXd x = random_inputs(6, 50, 8) * 3.0 + MatrixXd::Constant(6, 50, 4.0);
  const auto fitted = fit_standardizer(x);
  const MatrixXd z = fitted.apply(x);
  for (Eigen::Index d = 0; d < z.rows(); ++d) {
    CHECK(std::abs(z.row(d).mean()) <= 1e-10);
    CHECK(std::abs(z.row(d).squaredNorm() / 50.0 - 1.0) <= 1e-10);
  }

  MatrixXd constant = random_inputs(3, 10, 1);
  constant.row(1).setConstant(0.1);
  CHECK_THROWS_AS(fit_standardizer(constant), DegenerateError);
  CHECK_THROWS_AS(fit_standardizer(MatrixXd::Ones(2, 1)), InputError);
}

TEST_CASE("network validation") {
  Network net = make_network(small_shape(Activation::softmax), 1);
  CHECK_NOTHROW(net.validate());
  Network bad = net;
  bad.layers[0].activation = Activation::softmax;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = net;
  bad.layers[2].weight = MatrixXd::Zero(8, 7);
  CHECK_THROWS_AS(bad.validate(), ShapeError);
  bad = net;
  bad.standardizer.std(0) = 0;
  CHECK_THROWS_AS(bad.validate(), StateError);
  CHECK(net.parameter_count() == (5 * 8 + 8) + (8 * 8 + 8) * 2 + (8 * 3 + 3) + (3 * 4 + 4));
}
