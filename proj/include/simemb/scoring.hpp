#pragma once

#include <map>
#include <span>
#include <string>

#include "simemb/types.hpp"

namespace simemb {

/// One listener's integer score for a speaker pair.
struct RawAnswer {
  std::string listener_id;
  int speaker_a = 0;
  int speaker_b = 0;
  int score = 0;
};

inline constexpr int kDefaultMinAnswers = 10;
inline constexpr int kDefaultScoreBound = 3;

/// Mean score per unordered pair. (a,b) and (b,a) pool together; listener ids
/// are not deduplicated, so a listener answering a pair twice counts twice.
/// The diagonal is set to +score_bound.
///
/// Throws InputError on an empty list or an invalid answer, and CoverageError
/// naming the first pair with fewer than `min_answers` answers.
SimilarityMatrix aggregate(std::span<const RawAnswer> answers, int n_speakers,
                           double score_bound, int min_answers = kDefaultMinAnswers);

struct ScoreHistogram {
  std::map<int, long> bin_counts;
  std::map<int, double> cumulative_ratio;

  long total() const;
  /// Fraction of answers scoring <= k, defined for any integer k.
  double cumulative_at(int k) const;
  /// Score with the largest count (smallest such score on ties).
  int mode() const;
};

ScoreHistogram global_histogram(std::span<const RawAnswer> answers);

/// Histogram of the answers on the unordered pair {i, j}.
ScoreHistogram pair_histogram(std::span<const RawAnswer> answers, int i, int j);

/// Fraction of answers strictly below zero.
double negative_fraction(std::span<const RawAnswer> answers);

}  // namespace simemb
