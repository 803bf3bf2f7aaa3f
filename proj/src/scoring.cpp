#include "simemb/scoring.hpp"

#include <cmath>
#include <vector>

namespace simemb {

namespace {

std::string pair_name(int i, int j) {
  return "{" + std::to_string(i) + "," + std::to_string(j) + "}";
}

ScoreHistogram histogram_of(const std::vector<int>& scores) {
  ScoreHistogram h;
  for (int s : scores) ++h.bin_counts[s];
  const long total = static_cast<long>(scores.size());
  long running = 0;
  for (const auto& [score, count] : h.bin_counts) {
    running += count;
    h.cumulative_ratio[score] =
        running == total ? 1.0 : static_cast<double>(running) / static_cast<double>(total);
  }
  return h;
}

}  // namespace

SimilarityMatrix aggregate(std::span<const RawAnswer> answers, int n_speakers,
                           double score_bound, int min_answers) {
  if (answers.empty()) throw InputError("no answers to aggregate");
  if (n_speakers < 2) throw InputError("need at least two speakers");
  if (!(score_bound > 0)) throw InputError("score bound must be positive");

  const auto n = static_cast<Eigen::Index>(n_speakers);
  // Integer sums keep the mean independent of answer order.
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> sums =
      decltype(sums)::Zero(n, n);
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts =
      decltype(counts)::Zero(n, n);

  for (const auto& a : answers) {
    if (a.speaker_a < 0 || a.speaker_a >= n_speakers || a.speaker_b < 0 ||
        a.speaker_b >= n_speakers) {
      throw InputError("answer from " + a.listener_id + " references speaker outside [0, " +
                       std::to_string(n_speakers) + ")");
    }
    if (a.speaker_a == a.speaker_b) {
      throw InputError("answer from " + a.listener_id + " scores a speaker against itself");
    }
    if (std::abs(a.score) > score_bound) {
      throw InputError("answer from " + a.listener_id + " has score " +
                       std::to_string(a.score) + " outside the bound");
    }
    const int lo = std::min(a.speaker_a, a.speaker_b);
    const int hi = std::max(a.speaker_a, a.speaker_b);
    sums(lo, hi) += a.score;
    counts(lo, hi) += 1;
  }

  MatrixXd scores(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores(i, i) = score_bound;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (counts(i, j) < min_answers || counts(i, j) == 0) {
        throw CoverageError("pair " + pair_name(static_cast<int>(i), static_cast<int>(j)) +
                            " has " + std::to_string(counts(i, j)) + " answers, need " +
                            std::to_string(min_answers));
      }
      const double mean =
          static_cast<double>(sums(i, j)) / static_cast<double>(counts(i, j));
      scores(i, j) = mean;
      scores(j, i) = mean;
    }
  }
  return SimilarityMatrix(std::move(scores), score_bound, false);
}

long ScoreHistogram::total() const {
  long t = 0;
  for (const auto& [score, count] : bin_counts) t += count;
  return t;
}

double ScoreHistogram::cumulative_at(int k) const {
  auto it = cumulative_ratio.upper_bound(k);
  if (it == cumulative_ratio.begin()) return 0.0;
  return std::prev(it)->second;
}

int ScoreHistogram::mode() const {
  if (bin_counts.empty()) throw InputError("empty histogram has no mode");
  auto best = bin_counts.begin();
  for (auto it = bin_counts.begin(); it != bin_counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

ScoreHistogram global_histogram(std::span<const RawAnswer> answers) {
  if (answers.empty()) throw InputError("no answers for histogram");
  std::vector<int> scores;
  scores.reserve(answers.size());
  for (const auto& a : answers) scores.push_back(a.score);
  return histogram_of(scores);
}

ScoreHistogram pair_histogram(std::span<const RawAnswer> answers, int i, int j) {
  std::vector<int> scores;
  for (const auto& a : answers) {
    if ((a.speaker_a == i && a.speaker_b == j) || (a.speaker_a == j && a.speaker_b == i)) {
      scores.push_back(a.score);
    }
  }
  if (scores.empty()) throw CoverageError("pair " + pair_name(i, j) + " has no answers");
  return histogram_of(scores);
}

double negative_fraction(std::span<const RawAnswer> answers) {
  if (answers.empty()) throw InputError("no answers");
  long negative = 0;
  for (const auto& a : answers) negative += a.score < 0 ? 1 : 0;
  return static_cast<double>(negative) / static_cast<double>(answers.size());
}

}  // namespace simemb
