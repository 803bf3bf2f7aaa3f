#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace simemb {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Error taxonomy. The CLI maps ConfigError to exit code 1 and every other
// Error to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RangeError : Error { using Error::Error; };
struct StateError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct CoverageError : Error { using Error::Error; };
struct DegenerateError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

enum class Openness { closed, open };

struct SpeakerId {
  int index = 0;
  std::string label;
  Openness openness = Openness::closed;

  bool closed() const { return openness == Openness::closed; }
  friend bool operator==(const SpeakerId&, const SpeakerId&) = default;
};

/// Ordered speaker list. Indices are 0..n-1 in order and closed speakers come
/// first, so every closed index is below closed_count().
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<SpeakerId> speakers);

  /// `n` speakers labelled F001.., the first `n_closed` closed.
  static Roster make(int n, int n_closed);

  int size() const { return static_cast<int>(speakers_.size()); }
  int closed_count() const { return closed_count_; }
  const SpeakerId& operator[](int i) const { return speakers_.at(i); }
  const std::vector<SpeakerId>& speakers() const { return speakers_; }
  std::vector<std::string> labels() const;

 private:
  std::vector<SpeakerId> speakers_;
  int closed_count_ = 0;
};

/// Symmetric speaker-by-speaker subjective similarity matrix.
///
/// Before normalization entries lie in [-score_bound, score_bound] and the
/// diagonal holds score_bound; after normalization entries lie in [-1, 1] and
/// the diagonal holds 1. The diagonal value is stored so that the loss
/// functions subtract exactly this scalar.
class SimilarityMatrix {
 public:
  /// Validates symmetry, bounds and diagonal; throws InputError on violation.
  SimilarityMatrix(MatrixXd scores, double score_bound, bool normalized);

  int size() const { return static_cast<int>(scores_.rows()); }
  const MatrixXd& scores() const { return scores_; }
  double operator()(int i, int j) const { return scores_(i, j); }
  double score_bound() const { return score_bound_; }
  double diagonal_value() const { return normalized_ ? 1.0 : score_bound_; }
  bool normalized() const { return normalized_; }

  /// Leading `n` x `n` block (the closed speakers of a roster).
  SimilarityMatrix leading_block(int n) const;

 private:
  MatrixXd scores_;
  double score_bound_;
  bool normalized_;
};

/// Divides every entry by the score bound. Throws StateError if `m` is
/// already normalized.
SimilarityMatrix normalize_similarity(const SimilarityMatrix& m);

struct SpeakerCode {
  int dim = 0;
  int hot_index = 0;

  VectorXd materialize() const;
};

SpeakerCode make_speaker_code(int index, int n_s);

/// Acoustic frames of one speaker, one frame per row.
struct FrameSet {
  SpeakerId speaker;
  MatrixXd frames;  // T x F
  std::vector<bool> voiced;

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int feature_dim() const { return static_cast<int>(frames.cols()); }
  int voiced_count() const;
  /// Voiced frames as columns (F x n_voiced).
  MatrixXd voiced_columns() const;
  /// Throws ShapeError when the voiced mask length disagrees with the frames.
  void validate() const;
};

/// Per-speaker d-vectors, stored column-wise (N_d x N).
struct DVectorSet {
  std::vector<SpeakerId> speakers;
  MatrixXd vectors;

  int dim() const { return static_cast<int>(vectors.rows()); }
  int size() const { return static_cast<int>(vectors.cols()); }
  /// Column position of speaker `index`, or -1.
  int find(int index) const;
  /// Throws InputError on a non-finite entry or a count mismatch.
  void validate() const;
};

}  // namespace simemb
