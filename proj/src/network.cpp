#include "simemb/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace simemb {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
    case Activation::identity: return "identity";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "softmax") return Activation::softmax;
  if (s == "identity") return Activation::identity;
  throw InputError("unknown activation '" + s + "'");
}

MatrixXd Standardizer::apply(const MatrixXd& frames) const {
  if (frames.rows() != mean.size()) throw ShapeError("standardizer dimension mismatch");
  return ((frames.colwise() - mean).array().colwise() / std.array()).matrix();
}

Standardizer fit_standardizer(const MatrixXd& frames) {
  if (frames.cols() < 2) throw InputError("standardizer needs at least two frames");
  const double n = static_cast<double>(frames.cols());
  Standardizer s;
  s.mean = frames.rowwise().sum() / n;
  s.std = ((frames.colwise() - s.mean).array().square().rowwise().sum() / n).sqrt();
  for (Eigen::Index d = 0; d < s.std.size(); ++d) {
    if (!(s.std(d) > 1e-12 * std::max(1.0, std::abs(s.mean(d))))) {
      throw DegenerateError("feature dimension " + std::to_string(d) + " has zero variance");
    }
  }
  return s;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void Network::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " bias does not match weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(l) + " input does not chain");
    }
    if (layer.activation == Activation::softmax && l + 1 != layers.size()) {
      throw ShapeError("softmax is only allowed at the output layer");
    }
  }
  if (bottleneck_index < 0 || bottleneck_index >= static_cast<int>(layers.size())) {
    throw ShapeError("bottleneck index out of range");
  }
  if (layers[bottleneck_index].activation == Activation::softmax) {
    throw ShapeError("bottleneck layer cannot be softmax");
  }
  if (standardizer.mean.size() != input_dim() || standardizer.std.size() != input_dim()) {
    throw ShapeError("standardizer dimension does not match network input");
  }
  if (!(standardizer.std.array() > 0).all()) {
    throw StateError("standardizer std entries must be positive");
  }
}

Network make_network(const NetworkShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.output_dim < 1 || shape.hidden.empty()) {
    throw ConfigError("network needs an input, at least one hidden layer and an output");
  }
  if (shape.bottleneck_index < 0 ||
      shape.bottleneck_index >= static_cast<int>(shape.hidden.size())) {
    throw ConfigError("bottleneck index must name a hidden layer");
  }
  std::mt19937_64 rng(seed);
  Network net;
  int fan_in = shape.input_dim;
  auto add_layer = [&](int fan_out, Activation act) {
    if (fan_out < 1) throw ConfigError("layer widths must be positive");
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    Layer layer;
    layer.weight.resize(fan_out, fan_in);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = u(rng);
    }
    layer.bias = VectorXd::Zero(fan_out);
    layer.activation = act;
    net.layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (int width : shape.hidden) add_layer(width, Activation::tanh);
  add_layer(shape.output_dim, shape.output_activation);
  net.bottleneck_index = shape.bottleneck_index;
  net.standardizer.mean = VectorXd::Zero(shape.input_dim);
  net.standardizer.std = VectorXd::Ones(shape.input_dim);
  net.validate();
  return net;
}

namespace {

void apply_activation(MatrixXd& z, Activation act) {
  switch (act) {
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::softmax:
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        auto col = z.col(c);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
      }
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

ForwardResult forward(const Network& net, const MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw ShapeError("input dimension " + std::to_string(inputs.rows()) +
                     " does not match network input " + std::to_string(net.input_dim()));
  }
  if (!inputs.allFinite()) throw InputError("network input contains NaN or Inf");
  ForwardResult r;
  r.cache.activations.reserve(net.layers.size() + 1);
  r.cache.activations.push_back(inputs);
  for (const auto& layer : net.layers) {
    MatrixXd z = layer.weight * r.cache.activations.back();
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    r.cache.activations.push_back(std::move(z));
  }
  r.output = r.cache.activations.back();
  r.bottleneck = r.cache.activations[net.bottleneck_index + 1];
  return r;
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const auto& l : net.layers) {
    g.weight.push_back(MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(VectorXd::Zero(l.bias.size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weight.size() != weight.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double s) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] *= s;
    bias[l] *= s;
  }
  return *this;
}

bool Gradients::matches(const Network& net) const {
  if (weight.size() != net.layers.size() || bias.size() != net.layers.size()) return false;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    if (weight[l].rows() != net.layers[l].weight.rows() ||
        weight[l].cols() != net.layers[l].weight.cols() ||
        bias[l].size() != net.layers[l].bias.size()) {
      return false;
    }
  }
  return true;
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   const MatrixXd& output_gradient, const MatrixXd& bottleneck_gradient) {
  const auto n_layers = net.layers.size();
  if (cache.activations.size() != n_layers + 1 ||
      cache.activations.front().rows() != net.input_dim()) {
    throw StateError("forward cache does not belong to this network");
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (cache.activations[l + 1].rows() != net.layers[l].weight.rows()) {
      throw StateError("forward cache does not belong to this network");
    }
  }
  const Eigen::Index batch = cache.activations.front().cols();
  if (output_gradient.rows() != net.output_dim() || output_gradient.cols() != batch) {
    throw ShapeError("output gradient shape mismatch");
  }
  if (bottleneck_gradient.rows() != net.bottleneck_dim() || bottleneck_gradient.cols() != batch) {
    throw ShapeError("bottleneck gradient shape mismatch");
  }

  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);
  MatrixXd upstream = output_gradient;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = net.layers[k];
    if (static_cast<int>(k) == net.bottleneck_index) upstream += bottleneck_gradient;
    const MatrixXd& a = cache.activations[k + 1];
    MatrixXd delta;
    switch (layer.activation) {
      case Activation::tanh:
        delta = (upstream.array() * (1.0 - a.array().square())).matrix();
        break;
      case Activation::softmax:
      case Activation::identity:
        delta = std::move(upstream);
        break;
    }
    g.weight[k] = delta * cache.activations[k].transpose();
    g.bias[k] = delta.rowwise().sum();
    if (k > 0) upstream = layer.weight.transpose() * delta;
  }
  return g;
}

AdaGradState AdaGradState::fresh(const Network& net, double learning_rate, double epsilon) {
  if (!(learning_rate >= 0)) throw ConfigError("learning rate must be nonnegative");
  AdaGradState s;
  const auto zeros = Gradients::zeros_like(net);
  s.weight_accumulator = zeros.weight;
  s.bias_accumulator = zeros.bias;
  s.learning_rate = learning_rate;
  s.epsilon = epsilon;
  return s;
}

void adagrad_step(Network& net, const Gradients& grads, AdaGradState& state) {
  if (!grads.matches(net)) throw ShapeError("gradient shapes do not match the network");
  if (state.weight_accumulator.size() != net.layers.size()) {
    throw ShapeError("optimizer state does not match the network");
  }
  const double lr = state.learning_rate;
  const double eps = state.epsilon;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& layer = net.layers[l];
    auto& wa = state.weight_accumulator[l];
    auto& ba = state.bias_accumulator[l];
    if (wa.rows() != layer.weight.rows() || wa.cols() != layer.weight.cols() ||
        ba.size() != layer.bias.size()) {
      throw ShapeError("optimizer state does not match the network");
    }
    wa.array() += grads.weight[l].array().square();
    ba.array() += grads.bias[l].array().square();
    layer.weight.array() -= lr * grads.weight[l].array() / (wa.array().sqrt() + eps);
    layer.bias.array() -= lr * grads.bias[l].array() / (ba.array().sqrt() + eps);
  }
}

}  // namespace simemb
