#include "simemb/types.hpp"

#include <cmath>
#include <cstdio>

namespace simemb {

Roster::Roster(std::vector<SpeakerId> speakers) : speakers_(std::move(speakers)) {
  bool seen_open = false;
  for (int i = 0; i < size(); ++i) {
    const auto& s = speakers_[i];
    if (s.index != i) {
      throw InputError("roster indices must be contiguous from 0; got " +
                       std::to_string(s.index) + " at position " + std::to_string(i));
    }
    if (s.closed()) {
      if (seen_open) {
        throw InputError("closed speaker " + s.label + " listed after an open speaker");
      }
      ++closed_count_;
    } else {
      seen_open = true;
    }
  }
}

Roster Roster::make(int n, int n_closed) {
  if (n < 1 || n_closed < 0 || n_closed > n) {
    throw ConfigError("invalid roster size " + std::to_string(n) + " with " +
                      std::to_string(n_closed) + " closed speakers");
  }
  std::vector<SpeakerId> speakers;
  speakers.reserve(n);
  for (int i = 0; i < n; ++i) {
    char label[16];
    std::snprintf(label, sizeof label, "F%03d", i + 1);
    speakers.push_back({i, label, i < n_closed ? Openness::closed : Openness::open});
  }
  return Roster(std::move(speakers));
}

std::vector<std::string> Roster::labels() const {
  std::vector<std::string> out;
  out.reserve(speakers_.size());
  for (const auto& s : speakers_) out.push_back(s.label);
  return out;
}

SimilarityMatrix::SimilarityMatrix(MatrixXd scores, double score_bound, bool normalized)
    : scores_(std::move(scores)), score_bound_(score_bound), normalized_(normalized) {
  if (!(score_bound_ > 0) || !std::isfinite(score_bound_)) {
    throw InputError("score bound must be positive");
  }
  if (scores_.rows() != scores_.cols() || scores_.rows() == 0) {
    throw ShapeError("similarity matrix must be square and nonempty");
  }
  const double limit = normalized_ ? 1.0 : score_bound_;
  const double diag = diagonal_value();
  const Eigen::Index n = scores_.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (scores_(i, i) != diag) {
      throw InputError("diagonal entry " + std::to_string(i) + " is not the maximum similarity");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (scores_(i, j) != scores_(j, i)) {
        throw InputError("similarity matrix is not symmetric at (" + std::to_string(i) + "," +
                         std::to_string(j) + ")");
      }
      if (!(std::abs(scores_(i, j)) <= limit)) {
        throw InputError("similarity entry (" + std::to_string(i) + "," + std::to_string(j) +
                         ") outside the score bound");
      }
    }
  }
}

SimilarityMatrix SimilarityMatrix::leading_block(int n) const {
  if (n < 1 || n > size()) throw RangeError("block size out of range");
  return SimilarityMatrix(scores_.topLeftCorner(n, n), score_bound_, normalized_);
}

SimilarityMatrix normalize_similarity(const SimilarityMatrix& m) {
  if (m.normalized()) throw StateError("similarity matrix is already normalized");
  MatrixXd scaled = m.scores() / m.score_bound();
  // Division by the bound maps the diagonal to exactly 1.
  scaled.diagonal().setOnes();
  return SimilarityMatrix(std::move(scaled), m.score_bound(), true);
}

VectorXd SpeakerCode::materialize() const {
  VectorXd c = VectorXd::Zero(dim);
  c(hot_index) = 1.0;
  return c;
}

SpeakerCode make_speaker_code(int index, int n_s) {
  if (n_s < 1 || index < 0 || index >= n_s) {
    throw RangeError("speaker code index " + std::to_string(index) + " outside [0, " +
                     std::to_string(n_s) + ")");
  }
  return {n_s, index};
}

int FrameSet::voiced_count() const {
  int n = 0;
  for (bool v : voiced) n += v ? 1 : 0;
  return n;
}

MatrixXd FrameSet::voiced_columns() const {
  validate();
  MatrixXd out(frames.cols(), voiced_count());
  int c = 0;
  for (int t = 0; t < frame_count(); ++t) {
    if (voiced[t]) out.col(c++) = frames.row(t).transpose();
  }
  return out;
}

void FrameSet::validate() const {
  if (static_cast<Eigen::Index>(voiced.size()) != frames.rows()) {
    throw ShapeError("voiced mask length does not match frame count for speaker " +
                     speaker.label);
  }
}

int DVectorSet::find(int index) const {
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    if (speakers[i].index == index) return static_cast<int>(i);
  }
  return -1;
}

void DVectorSet::validate() const {
  if (static_cast<Eigen::Index>(speakers.size()) != vectors.cols()) {
    throw ShapeError("d-vector count does not match speaker count");
  }
  if (!vectors.allFinite()) throw InputError("d-vectors contain non-finite values");
}

}  // namespace simemb
