#pragma once

// File formats: answers CSV, similarity matrix CSV + JSON sidecar, frames CSV
// + roster manifest, network checkpoint JSON, and small CSV reports. All
// writers go through write_file_atomic.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "simemb/embedding.hpp"
#include "simemb/network.hpp"
#include "simemb/scoring.hpp"
#include "simemb/types.hpp"

namespace simemb::io {

namespace fs = std::filesystem;

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);

/// Writes via a temporary file in the same directory and renames it into
/// place. Creates missing parent directories.
void write_file_atomic(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

// Answers: header `listener_id,speaker_a,speaker_b,score`, integer scores.
std::string answers_to_csv(std::span<const RawAnswer> answers);
std::vector<RawAnswer> parse_answers_csv(const std::string& text);
std::vector<RawAnswer> read_answers(const fs::path& path);

struct MatrixFile {
  SimilarityMatrix matrix;
  std::vector<std::string> labels;
  int closed_count = 0;
};

/// Sidecar path for a matrix CSV: same stem, `.json` extension.
fs::path sidecar_path(const fs::path& matrix_csv);
std::string matrix_to_csv(const MatrixXd& m);
std::string matrix_sidecar(const SimilarityMatrix& m, const std::vector<std::string>& labels,
                           int closed_count);
void write_matrix(const fs::path& path, const SimilarityMatrix& m,
                  const std::vector<std::string>& labels, int closed_count);
MatrixFile read_matrix(const fs::path& path);

// Frames: header `voiced,f1..fF`, voiced as 0/1.
std::string frames_to_csv(const FrameSet& frames);
FrameSet parse_frames_csv(const std::string& text, const SpeakerId& speaker);

struct RosterFiles {
  Roster roster;
  std::vector<FrameSet> frames;
  int feature_dim = 0;
};

/// Writes `dir/manifest.json` plus `dir/frames/<label>.csv` per speaker.
void write_roster(const fs::path& dir, const Roster& roster, std::span<const FrameSet> frames);
/// Reads a manifest and every frames file it references.
RosterFiles read_roster(const fs::path& manifest);
/// Reads only the speaker list of a manifest.
Roster read_manifest_roster(const fs::path& manifest);

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  Network network;
  std::string loss_tag;
};

std::string checkpoint_to_json(const Network& net, const std::string& loss_tag);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const fs::path& path, const Network& net, const std::string& loss_tag);
Checkpoint load_checkpoint(const fs::path& path);

/// `epoch,loss` with 1-based epochs.
std::string loss_trace_to_csv(std::span<const double> trace);

/// `speaker,label,d1..dN`.
std::string dvectors_to_csv(const DVectorSet& dvecs);

}  // namespace simemb::io
