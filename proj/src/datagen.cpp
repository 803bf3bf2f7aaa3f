#include "simemb/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace simemb {

namespace {

MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = g(rng);
  }
  return m;
}

// Unit-norm cluster centers (columns) summing to zero.
MatrixXd simplex_centers(int k, int dim, std::mt19937_64& rng) {
  MatrixXd centers;
  if (k <= dim) {
    const MatrixXd g = gaussian_matrix(dim, k, rng);
    centers = Eigen::HouseholderQR<MatrixXd>(g).householderQ() * MatrixXd::Identity(dim, k);
  } else {
    centers = gaussian_matrix(dim, k, rng);
  }
  if (k > 1) centers.colwise() -= centers.rowwise().mean();
  for (Eigen::Index c = 0; c < centers.cols(); ++c) {
    const double norm = centers.col(c).norm();
    if (norm > 0) centers.col(c) /= norm;
  }
  return centers;
}

}  // namespace

void WorldConfig::validate() const {
  if (n_speakers < 2) throw ConfigError("need at least two speakers");
  if (n_closed < 1 || n_closed > n_speakers) {
    throw ConfigError("closed speaker count must be in [1, " + std::to_string(n_speakers) + "]");
  }
  if (latent_dim < 1) throw ConfigError("latent dimension must be at least 1");
  if (feature_dim < latent_dim) throw ConfigError("feature dimension must be >= latent dimension");
  if (!(noise_std >= 0)) throw ConfigError("noise std must be nonnegative");
  if (!(negative_fraction >= 0 && negative_fraction <= 1)) {
    throw ConfigError("negative fraction must be in [0, 1]");
  }
  if (!(latent_scale >= 0) || !(cluster_spread >= 0)) {
    throw ConfigError("latent scale and cluster spread must be nonnegative");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int cluster_count_for(int n, double negative_fraction) {
  const double all_pairs = n * (n - 1) / 2.0;
  int best = 1;
  double best_gap = 2.0;
  for (int k = 1; k <= n; ++k) {
    double within = 0;
    for (int c = 0; c < k; ++c) {
      const int size = n / k + (c < n % k ? 1 : 0);
      within += size * (size - 1) / 2.0;
    }
    const double gap = std::abs(1.0 - within / all_pairs - negative_fraction);
    if (gap < best_gap - 1e-12) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

PlantedWorld generate_world(const WorldConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, 0));
  const int n = cfg.n_speakers;
  const int k = cluster_count_for(n, cfg.negative_fraction);

  const MatrixXd centers = simplex_centers(k, cfg.latent_dim, rng);
  const MatrixXd jitter = gaussian_matrix(cfg.latent_dim, n, rng) *
                          (cfg.cluster_spread / std::sqrt(static_cast<double>(cfg.latent_dim)));
  MatrixXd z(n, cfg.latent_dim);
  std::vector<int> cluster(n);
  for (int i = 0; i < n; ++i) {
    cluster[i] = i % k;
    z.row(i) = (cfg.latent_scale * (centers.col(cluster[i]) + jitter.col(i))).transpose();
  }
  const MatrixXd projection = gaussian_matrix(cfg.feature_dim, cfg.latent_dim, rng);

  MatrixXd s = (z * z.transpose()).array().tanh().matrix();
  // Enforce exact symmetry and the unit diagonal.
  s = ((s + s.transpose()) * 0.5).eval();
  s.diagonal().setOnes();

  return PlantedWorld{Roster::make(n, cfg.n_closed), std::move(z), projection, cfg.noise_std,
                      std::move(cluster), SimilarityMatrix(std::move(s), 1.0, true)};
}

FrameSet generate_frames(const PlantedWorld& world, int speaker, int n_frames, double voiced_rate,
                         std::uint64_t seed) {
  if (speaker < 0 || speaker >= world.roster.size()) throw RangeError("speaker out of range");
  if (n_frames < 1) throw ConfigError("need at least one frame");
  if (!(voiced_rate > 0 && voiced_rate <= 1)) throw ConfigError("voiced rate must be in (0, 1]");

  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(speaker) + 1));
  const VectorXd mean = world.projection * world.true_vectors.row(speaker).transpose();
  FrameSet fs;
  fs.speaker = world.roster[speaker];
  fs.frames.resize(n_frames, mean.size());
  fs.voiced.resize(n_frames);
  std::normal_distribution<double> noise(0.0, world.noise_std > 0 ? world.noise_std : 1.0);
  std::bernoulli_distribution voiced(voiced_rate);
  for (int t = 0; t < n_frames; ++t) {
    for (Eigen::Index f = 0; f < mean.size(); ++f) {
      fs.frames(t, f) = mean(f) + (world.noise_std > 0 ? noise(rng) : 0.0);
    }
    fs.voiced[t] = voiced(rng);
  }
  if (fs.voiced_count() == 0) fs.voiced[0] = true;
  return fs;
}

std::vector<RawAnswer> generate_answers(const PlantedWorld& world, int listeners_per_pair,
                                        int score_bound, double answer_noise_std,
                                        std::uint64_t seed) {
  if (listeners_per_pair < 1) throw ConfigError("need at least one listener per pair");
  if (score_bound < 1) throw ConfigError("score bound must be at least 1");
  if (!(answer_noise_std >= 0)) throw ConfigError("answer noise must be nonnegative");

  std::mt19937_64 rng(derive_seed(seed, 0xA11CE));
  std::normal_distribution<double> noise(0.0, answer_noise_std > 0 ? answer_noise_std : 1.0);
  const int n = world.roster.size();
  const double bound = score_bound;
  std::vector<RawAnswer> answers;
  answers.reserve(static_cast<std::size_t>(n) * (n - 1) / 2 * listeners_per_pair);
  long serial = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double target = bound * world.ground_truth(i, j);
      for (int l = 0; l < listeners_per_pair; ++l) {
        const double x = target + (answer_noise_std > 0 ? noise(rng) : 0.0);
        const int score = static_cast<int>(std::round(std::clamp(x, -bound, bound)));
        char id[24];
        std::snprintf(id, sizeof id, "L%06ld", serial++);
        answers.push_back({id, i, j, score});
      }
    }
  }
  return answers;
}

}  // namespace simemb
