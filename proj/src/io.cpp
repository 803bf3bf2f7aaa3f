#include "simemb/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace simemb::io {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& what) {
  T value{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw InputError("cannot parse " + what + " '" + s + "'");
  }
  return value;
}

double parse_real(const std::string& s, const std::string& what) {
  // from_chars<double> accepts neither a leading '+' nor surrounding blanks.
  std::string t = s;
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  const double v = parse_number<double>(t, what);
  if (!std::isfinite(v)) throw InputError(what + " is not finite");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  std::string t = s;
  if (!t.empty() && t.front() == '+') t.erase(0, 1);
  return parse_number<int>(t, what);
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

VectorXd vector_from_json(const json& a, Eigen::Index expected, const std::string& what) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != expected) {
    throw InputError(what + " must be an array of " + std::to_string(expected) + " numbers");
  }
  VectorXd v(expected);
  for (Eigen::Index i = 0; i < expected; ++i) v(i) = a.at(i).get<double>();
  return v;
}

std::string openness_name(Openness o) { return o == Openness::closed ? "closed" : "open"; }

Openness openness_from(const std::string& s) {
  if (s == "closed") return Openness::closed;
  if (s == "open") return Openness::open;
  throw InputError("unknown speaker openness '" + s + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw IoError("cannot format number");
  return std::string(buf, ptr);
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string answers_to_csv(std::span<const RawAnswer> answers) {
  std::string out = "listener_id,speaker_a,speaker_b,score\n";
  for (const auto& a : answers) {
    out += a.listener_id + "," + std::to_string(a.speaker_a) + "," + std::to_string(a.speaker_b) +
           "," + std::to_string(a.score) + "\n";
  }
  return out;
}

std::vector<RawAnswer> parse_answers_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines.front() != "listener_id,speaker_a,speaker_b,score") {
    throw InputError("answers CSV must start with header listener_id,speaker_a,speaker_b,score");
  }
  std::vector<RawAnswer> answers;
  answers.reserve(lines.size() - 1);
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const auto f = split(lines[n]);
    const std::string where = "answers line " + std::to_string(n + 1);
    if (f.size() != 4) throw InputError(where + ": expected 4 fields");
    RawAnswer a;
    a.listener_id = f[0];
    a.speaker_a = parse_int(f[1], where + " speaker_a");
    a.speaker_b = parse_int(f[2], where + " speaker_b");
    a.score = parse_int(f[3], where + " score");
    answers.push_back(std::move(a));
  }
  return answers;
}

std::vector<RawAnswer> read_answers(const fs::path& path) {
  return parse_answers_csv(read_file(path));
}

fs::path sidecar_path(const fs::path& matrix_csv) {
  fs::path p = matrix_csv;
  p.replace_extension(".json");
  if (p == matrix_csv) p += ".json";
  return p;
}

std::string matrix_to_csv(const MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string matrix_sidecar(const SimilarityMatrix& m, const std::vector<std::string>& labels,
                           int closed_count) {
  json j;
  j["n_speakers"] = m.size();
  j["score_bound"] = m.score_bound();
  j["normalized"] = m.normalized();
  j["labels"] = labels;
  j["closed_count"] = closed_count;
  return j.dump(2) + "\n";
}

void write_matrix(const fs::path& path, const SimilarityMatrix& m,
                  const std::vector<std::string>& labels, int closed_count) {
  if (static_cast<int>(labels.size()) != m.size()) {
    throw ShapeError("label count does not match matrix size");
  }
  write_file_atomic(path, matrix_to_csv(m.scores()));
  write_file_atomic(sidecar_path(path), matrix_sidecar(m, labels, closed_count));
}

MatrixFile read_matrix(const fs::path& path) {
  json meta;
  try {
    meta = json::parse(read_file(sidecar_path(path)));
  } catch (const json::exception& e) {
    throw InputError("bad matrix sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
  const auto lines = lines_of(read_file(path));
  try {
    const int n = meta.at("n_speakers").get<int>();
    if (static_cast<int>(lines.size()) != n) {
      throw InputError("matrix CSV has " + std::to_string(lines.size()) + " rows, sidecar says " +
                       std::to_string(n));
    }
    MatrixXd scores(n, n);
    for (int i = 0; i < n; ++i) {
      const auto f = split(lines[i]);
      if (static_cast<int>(f.size()) != n) {
        throw InputError("matrix row " + std::to_string(i + 1) + " has " +
                         std::to_string(f.size()) + " columns, expected " + std::to_string(n));
      }
      for (int j = 0; j < n; ++j) scores(i, j) = parse_real(f[j], "matrix entry");
    }
    MatrixFile out{SimilarityMatrix(std::move(scores), meta.at("score_bound").get<double>(),
                                    meta.at("normalized").get<bool>()),
                   meta.at("labels").get<std::vector<std::string>>(),
                   meta.at("closed_count").get<int>()};
    if (static_cast<int>(out.labels.size()) != n) throw InputError("sidecar label count mismatch");
    if (out.closed_count < 0 || out.closed_count > n) throw InputError("sidecar closed_count out of range");
    return out;
  } catch (const json::exception& e) {
    throw InputError("bad matrix sidecar " + sidecar_path(path).string() + ": " + e.what());
  }
}

std::string frames_to_csv(const FrameSet& frames) {
  frames.validate();
  std::string out = "voiced";
  for (int f = 1; f <= frames.feature_dim(); ++f) out += ",f" + std::to_string(f);
  out += '\n';
  for (int t = 0; t < frames.frame_count(); ++t) {
    out += frames.voiced[t] ? '1' : '0';
    for (int f = 0; f < frames.feature_dim(); ++f) {
      out += ',';
      out += format_double(frames.frames(t, f));
    }
    out += '\n';
  }
  return out;
}

FrameSet parse_frames_csv(const std::string& text, const SpeakerId& speaker) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InputError("frames CSV for " + speaker.label + " is empty");
  const auto header = split(lines.front());
  if (header.size() < 2 || header.front() != "voiced") {
    throw InputError("frames CSV for " + speaker.label + " must start with voiced,f1..");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  for (int f = 1; f <= dim; ++f) {
    if (header[f] != "f" + std::to_string(f)) {
      throw InputError("frames CSV for " + speaker.label + " has unexpected column " + header[f]);
    }
  }
  FrameSet fs;
  fs.speaker = speaker;
  const auto rows = static_cast<Eigen::Index>(lines.size() - 1);
  fs.frames.resize(rows, dim);
  fs.voiced.resize(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const auto f = split(lines[t + 1]);
    if (static_cast<int>(f.size()) != dim + 1) {
      throw InputError("frames CSV for " + speaker.label + " line " + std::to_string(t + 2) +
                       " has the wrong number of fields");
    }
    if (f[0] != "0" && f[0] != "1") throw InputError("voiced flag must be 0 or 1");
    fs.voiced[t] = f[0] == "1";
    for (int d = 0; d < dim; ++d) fs.frames(t, d) = parse_real(f[d + 1], "frame value");
  }
  return fs;
}

void write_roster(const fs::path& dir, const Roster& roster, std::span<const FrameSet> frames) {
  if (static_cast<int>(frames.size()) != roster.size()) {
    throw ShapeError("one frame set per roster speaker is required");
  }
  json speakers = json::array();
  int feature_dim = frames.empty() ? 0 : frames.front().feature_dim();
  for (int i = 0; i < roster.size(); ++i) {
    const auto& s = roster[i];
    if (frames[i].feature_dim() != feature_dim) throw ShapeError("speakers disagree on feature dimension");
    const std::string rel = "frames/" + s.label + ".csv";
    write_file_atomic(dir / rel, frames_to_csv(frames[i]));
    speakers.push_back({{"index", s.index},
                        {"label", s.label},
                        {"openness", openness_name(s.openness)},
                        {"frames", rel}});
  }
  json manifest;
  manifest["speakers"] = speakers;
  manifest["closed_count"] = roster.closed_count();
  manifest["feature_dim"] = feature_dim;
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

struct ManifestEntry {
  SpeakerId speaker;
  std::string frames;
};

std::pair<std::vector<ManifestEntry>, json> parse_manifest(const fs::path& manifest) {
  json j;
  try {
    j = json::parse(read_file(manifest));
    std::vector<ManifestEntry> entries;
    for (const auto& s : j.at("speakers")) {
      entries.push_back({{s.at("index").get<int>(), s.at("label").get<std::string>(),
                          openness_from(s.at("openness").get<std::string>())},
                         s.value("frames", std::string())});
    }
    return {std::move(entries), std::move(j)};
  } catch (const json::exception& e) {
    throw InputError("bad roster manifest " + manifest.string() + ": " + e.what());
  }
}

}  // namespace

Roster read_manifest_roster(const fs::path& manifest) {
  auto [entries, j] = parse_manifest(manifest);
  std::vector<SpeakerId> speakers;
  for (auto& e : entries) speakers.push_back(e.speaker);
  Roster roster(std::move(speakers));
  if (j.value("closed_count", -1) != roster.closed_count()) {
    throw InputError("manifest closed_count disagrees with its speaker list");
  }
  return roster;
}

RosterFiles read_roster(const fs::path& manifest) {
  auto [entries, j] = parse_manifest(manifest);
  RosterFiles out;
  out.roster = read_manifest_roster(manifest);
  out.feature_dim = j.value("feature_dim", 0);
  const fs::path base = manifest.parent_path();
  for (const auto& e : entries) {
    if (e.frames.empty()) throw InputError("manifest entry " + e.speaker.label + " has no frames file");
    auto fs = parse_frames_csv(read_file(base / e.frames), e.speaker);
    if (fs.feature_dim() != out.feature_dim) {
      throw InputError("frames for " + e.speaker.label + " have dimension " +
                       std::to_string(fs.feature_dim()) + ", manifest says " +
                       std::to_string(out.feature_dim));
    }
    out.frames.push_back(std::move(fs));
  }
  return out;
}

std::string checkpoint_to_json(const Network& net, const std::string& loss_tag) {
  net.validate();
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  json dims = json::array();
  dims.push_back(net.input_dim());
  json activations = json::array();
  json weights = json::array();
  json biases = json::array();
  for (const auto& l : net.layers) {
    dims.push_back(l.weight.rows());
    activations.push_back(to_string(l.activation));
    json w = json::array();
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    weights.push_back(std::move(w));
    biases.push_back(vector_json(l.bias));
  }
  j["layer_dims"] = dims;
  j["activations"] = activations;
  j["bottleneck_index"] = net.bottleneck_index;
  j["feature_mean"] = vector_json(net.standardizer.mean);
  j["feature_std"] = vector_json(net.standardizer.std);
  j["loss_tag"] = loss_tag;
  j["weights"] = weights;
  j["biases"] = biases;
  return j.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw InputError("unsupported checkpoint format version");
    }
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    const auto acts = j.at("activations").get<std::vector<std::string>>();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    const std::size_t n_layers = acts.size();
    if (dims.size() != n_layers + 1 || weights.size() != n_layers || biases.size() != n_layers) {
      throw InputError("checkpoint layer arrays disagree in length");
    }
    Checkpoint cp;
    cp.loss_tag = j.at("loss_tag").get<std::string>();
    for (std::size_t l = 0; l < n_layers; ++l) {
      Layer layer;
      const int rows = dims[l + 1];
      const int cols = dims[l];
      if (rows < 1 || cols < 1) throw InputError("checkpoint layer dims must be positive");
      const auto& w = weights[l];
      if (!w.is_array() || static_cast<long>(w.size()) != static_cast<long>(rows) * cols) {
        throw InputError("checkpoint weight " + std::to_string(l) + " has the wrong size");
      }
      layer.weight.resize(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) layer.weight(r, c) = w[r * cols + c].get<double>();
      }
      layer.bias = vector_from_json(biases[l], rows, "checkpoint bias");
      layer.activation = activation_from_string(acts[l]);
      cp.network.layers.push_back(std::move(layer));
    }
    cp.network.bottleneck_index = j.at("bottleneck_index").get<int>();
    cp.network.standardizer.mean = vector_from_json(j.at("feature_mean"), dims.front(), "feature_mean");
    cp.network.standardizer.std = vector_from_json(j.at("feature_std"), dims.front(), "feature_std");
    cp.network.validate();
    return cp;
  } catch (const json::exception& e) {
    throw InputError(std::string("bad checkpoint: ") + e.what());
  }
}

void save_checkpoint(const fs::path& path, const Network& net, const std::string& loss_tag) {
  write_file_atomic(path, checkpoint_to_json(net, loss_tag));
}

Checkpoint load_checkpoint(const fs::path& path) { return parse_checkpoint(read_file(path)); }

std::string loss_trace_to_csv(std::span<const double> trace) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < trace.size(); ++e) {
    out += std::to_string(e + 1) + "," + format_double(trace[e]) + "\n";
  }
  return out;
}

std::string dvectors_to_csv(const DVectorSet& dvecs) {
  std::string out = "speaker,label";
  for (int d = 1; d <= dvecs.dim(); ++d) out += ",d" + std::to_string(d);
  out += '\n';
  for (int i = 0; i < dvecs.size(); ++i) {
    out += std::to_string(dvecs.speakers[i].index) + "," + dvecs.speakers[i].label;
    for (int d = 0; d < dvecs.dim(); ++d) out += "," + format_double(dvecs.vectors(d, i));
    out += '\n';
  }
  return out;
}

}  // namespace simemb::io
