#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simemb/types.hpp"

namespace simemb {

enum class Activation { tanh, softmax, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
  MatrixXd weight;  // out x in
  VectorXd bias;    // out
  Activation activation = Activation::tanh;
};

/// Per-dimension feature standardization (zero mean, unit variance).
struct Standardizer {
  VectorXd mean;
  VectorXd std;

  /// Standardizes frames stored as columns.
  MatrixXd apply(const MatrixXd& frames) const;
};

/// Fits mean and population standard deviation over frames stored as
/// columns (F x T). Needs at least two frames; throws DegenerateError on a
/// constant feature dimension.
Standardizer fit_standardizer(const MatrixXd& frames);

/// Feed-forward network. The bottleneck layer's post-activation output is the
/// frame-level d-vector.
struct Network {
  std::vector<Layer> layers;
  int bottleneck_index = 0;
  Standardizer standardizer;

  int input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers.back().weight.rows()); }
  int bottleneck_dim() const {
    return static_cast<int>(layers.at(bottleneck_index).weight.rows());
  }
  std::size_t parameter_count() const;

  /// Throws ShapeError/StateError when layer dimensions do not chain, softmax
  /// appears before the last layer or at the bottleneck, or a std entry is not
  /// positive.
  void validate() const;
};

struct NetworkShape {
  int input_dim = 0;
  /// Hidden layer widths, all tanh. The bottleneck is one of these.
  std::vector<int> hidden;
  int bottleneck_index = 0;
  int output_dim = 0;
  Activation output_activation = Activation::softmax;
};

/// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), zero
/// biases, identity standardizer.
Network make_network(const NetworkShape& shape, std::uint64_t seed);

struct ForwardCache {
  /// activations[0] is the input batch; activations[l + 1] is the
  /// post-activation output of layer l.
  std::vector<MatrixXd> activations;
};

struct ForwardResult {
  MatrixXd output;
  MatrixXd bottleneck;
  ForwardCache cache;
};

/// Forward pass over a batch of already-standardized frames stored as
/// columns. Throws ShapeError on a dimension mismatch and InputError on
/// non-finite input.
ForwardResult forward(const Network& net, const MatrixXd& inputs);

struct Gradients {
  std::vector<MatrixXd> weight;
  std::vector<VectorXd> bias;

  static Gradients zeros_like(const Network& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double s);
  bool matches(const Network& net) const;
};

/// Backpropagates two simultaneous loss signals and sums their contributions
/// over the batch columns.
///
/// `output_gradient` is taken with respect to the final layer's
/// post-activation output, except for a softmax output layer where it is the
/// gradient with respect to the pre-softmax logits (the fused
/// softmax-cross-entropy form). `bottleneck_gradient` is taken with respect to
/// the bottleneck's post-activation output. Either may be all zeros.
Gradients backward(const Network& net, const ForwardCache& cache,
                   const MatrixXd& output_gradient, const MatrixXd& bottleneck_gradient);

inline constexpr double kAdaGradEpsilon = 1e-8;

struct AdaGradState {
  std::vector<MatrixXd> weight_accumulator;
  std::vector<VectorXd> bias_accumulator;
  double learning_rate = 0.01;
  double epsilon = kAdaGradEpsilon;

  static AdaGradState fresh(const Network& net, double learning_rate,
                            double epsilon = kAdaGradEpsilon);
};

/// accumulator += g^2; param -= lr * g / (sqrt(accumulator) + eps).
void adagrad_step(Network& net, const Gradients& grads, AdaGradState& state);

}  // namespace simemb
