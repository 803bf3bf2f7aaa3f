#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "simemb/losses.hpp"
#include "simemb/network.hpp"
#include "simemb/types.hpp"

namespace simemb {

enum class LossTag { dvec_sce, prop_vec, prop_mat, prop_mat_re };

std::string to_string(LossTag t);
LossTag loss_from_string(const std::string& s);

/// Hidden-layer layout; the output layer is sized by the trainer.
struct Architecture {
  std::vector<int> hidden;
  int bottleneck_index = 0;

  /// Four tanh layers of 256, 256, 256 and 8 units; d-vectors from the 4th.
  static Architecture standard();
  /// 8-8-8 hidden units followed by a 3-unit bottleneck.
  static Architecture small();
};

struct TrainConfig {
  LossTag loss = LossTag::dvec_sce;
  int epochs = 100;
  double learning_rate = 0.01;
  int frames_per_speaker_per_step = 8;
  int batch_size = 256;
  double sce_weight = 0.0;
  Kernel kernel = Kernel::sigmoid;
  std::uint64_t seed = 0;
  int workers = 1;

  /// Throws ConfigError on an invalid field.
  void validate() const;
};

struct TrainResult {
  Network network;
  /// Full-training-set objective after each epoch.
  std::vector<double> loss_trace;
};

/// Trains a speaker-embedding network on the voiced frames of the closed
/// speakers in `roster`.
///
/// Frame losses (dvec_sce, prop_vec) iterate shuffled mini-batches of
/// `batch_size` frames. Matrix losses (prop_mat, prop_mat_re) draw
/// `frames_per_speaker_per_step` voiced frames from every closed speaker per
/// step, pool them into per-speaker mean d-vectors and backpropagate through
/// the mean. The similarity matrix is indexed by speaker index; its leading
/// closed block is the training target.
TrainResult train(std::span<const FrameSet> roster, const SimilarityMatrix& sim,
                  const TrainConfig& cfg, const Architecture& arch);

/// Mean bottleneck output over the voiced frames (raw features; the
/// network's standardizer is applied here).
VectorXd extract_dvector(const Network& net, const FrameSet& frames);

DVectorSet extract_all(const Network& net, std::span<const FrameSet> roster);

// Step objectives, exposed for gradient checking. Inputs are standardized
// frames stored as columns; gradients are with respect to every network
// parameter. The `workers` count never changes the result.

struct Objective {
  double loss = 0.0;
  Gradients gradients;
};

/// Mean per-frame loss over the batch. `speakers[c]` is the closed speaker of
/// column c. dvec_sce expects a softmax output of size N_s; prop_vec a tanh
/// output regressed onto row speakers[c] of `closed_sim`.
Objective frame_objective(const Network& net, const MatrixXd& inputs,
                          std::span<const int> speakers, LossTag loss,
                          const SimilarityMatrix* closed_sim, int workers = 1);

/// Matrix loss on per-speaker mean bottlenecks, plus `sce_weight` times the
/// mean softmax cross-entropy over all frames. `frame_counts[i]` consecutive
/// columns belong to closed speaker i. `mask` selects the relaxed loss.
Objective matrix_objective(const Network& net, const MatrixXd& inputs,
                           std::span<const int> frame_counts, const SimilarityMatrix& closed_sim,
                           const MaskMatrix* mask, Kernel kernel, double sce_weight,
                           int workers = 1);

/// Per-speaker column means of `columns` grouped by `frame_counts`.
MatrixXd pool_means(const MatrixXd& columns, std::span<const int> frame_counts);

/// Spreads a per-speaker gradient over that speaker's frames with weight
/// 1/frame_counts[i], the adjoint of pool_means.
MatrixXd spread_mean_gradient(const MatrixXd& speaker_gradient,
                              std::span<const int> frame_counts);

}  // namespace simemb
