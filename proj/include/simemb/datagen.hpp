#pragma once

#include <cstdint>
#include <vector>

#include "simemb/scoring.hpp"
#include "simemb/types.hpp"

namespace simemb {

/// Parameters of a planted world. Latent speaker vectors are grouped into
/// clusters whose centers form a centered simplex, so pairs in different
/// clusters have negative similarity. The cluster count is chosen so that
/// the share of negative off-diagonal pairs is as close as possible to
/// `negative_fraction`.
struct WorldConfig {
  int n_speakers = 16;
  int n_closed = 13;
  int latent_dim = 4;
  int feature_dim = 16;
  double noise_std = 0.3;
  std::uint64_t seed = 0;

  double negative_fraction = 0.7;
  /// Norm of the cluster centers in latent space; 0 collapses every vector.
  double latent_scale = 1.2;
  /// Norm of the per-speaker jitter around its cluster center, relative to
  /// the center.
  double cluster_spread = 0.35;

  /// Throws ConfigError on invalid dimensions.
  void validate() const;
};

struct PlantedWorld {
  Roster roster;
  MatrixXd true_vectors;  // N x latent_dim
  MatrixXd projection;    // feature_dim x latent_dim
  double noise_std = 0.0;
  std::vector<int> cluster;
  /// Normalized; off-diagonal entries tanh(z_i . z_j).
  SimilarityMatrix ground_truth;
};

/// Mixes a stream index into a seed (splitmix64), for per-speaker streams that
/// do not depend on generation order.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Number of clusters whose between-cluster pair share best matches
/// `negative_fraction` under round-robin assignment of `n` speakers.
int cluster_count_for(int n, double negative_fraction);

PlantedWorld generate_world(const WorldConfig& cfg);

/// Frames projection * z + N(0, noise_std^2) per dimension. Voiced flags are
/// Bernoulli(voiced_rate); frame 0 is forced voiced when none is.
FrameSet generate_frames(const PlantedWorld& world, int speaker, int n_frames, double voiced_rate,
                         std::uint64_t seed);

/// `listeners_per_pair` answers per unordered pair:
/// round(clamp(bound * s + N(0, noise^2), -bound, bound)), rounding half away
/// from zero.
std::vector<RawAnswer> generate_answers(const PlantedWorld& world, int listeners_per_pair,
                                        int score_bound, double answer_noise_std,
                                        std::uint64_t seed);

}  // namespace simemb
