#include "simemb/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "simemb/analysis.hpp"
#include "simemb/datagen.hpp"
#include "simemb/embedding.hpp"
#include "simemb/io.hpp"
#include "simemb/scoring.hpp"

namespace simemb::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

void require_output(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " output path is required");
}

std::string histogram_csv(const ScoreHistogram& h) {
  std::string out = "score,count,cumulative_ratio\n";
  for (const auto& [score, count] : h.bin_counts) {
    out += std::to_string(score) + "," + std::to_string(count) + "," +
           io::format_double(h.cumulative_ratio.at(score)) + "\n";
  }
  return out;
}

SimilarityMatrix normalized(const SimilarityMatrix& m) {
  return m.normalized() ? m : normalize_similarity(m);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  WorldConfig world;
  int frames = 200;
  double voiced_rate = 0.8;
  int listeners = kDefaultMinAnswers;
  int score_bound = kDefaultScoreBound;
  double answer_noise = 0.5;
  std::string out;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
  require_output(a.out, "synth");
  WorldConfig wc = a.world;
  wc.seed = seed;
  const PlantedWorld world = generate_world(wc);
  std::vector<FrameSet> frames;
  for (int i = 0; i < world.roster.size(); ++i) {
    frames.push_back(generate_frames(world, i, a.frames, a.voiced_rate, seed));
  }
  const auto answers = generate_answers(world, a.listeners, a.score_bound, a.answer_noise, seed);

  const fs::path dir = a.out;
  io::write_roster(dir, world.roster, frames);
  io::write_file_atomic(dir / "answers.csv", io::answers_to_csv(answers));
  io::write_matrix(dir / "ground_truth.csv", world.ground_truth, world.roster.labels(),
                   world.roster.closed_count());

  out << "speakers: " << world.roster.size() << "\n"
      << "closed: " << world.roster.closed_count() << "\n"
      << "open: " << world.roster.size() - world.roster.closed_count() << "\n"
      << "answers: " << answers.size() << "\n"
      << "negative_score_fraction: " << io::format_double(negative_fraction(answers)) << "\n";
  return kExitOk;
}

// ------------------------------------------------------------ aggregate

struct AggregateArgs {
  std::string answers;
  std::string manifest;
  int speakers = 0;
  double score_bound = kDefaultScoreBound;
  int min_answers = kDefaultMinAnswers;
  bool normalize = false;
  std::string out;
};

int cmd_aggregate(const AggregateArgs& a, std::ostream& out) {
  require_file(a.answers, "answers");
  require_output(a.out, "matrix");
  if (!a.manifest.empty()) require_file(a.manifest, "manifest");

  const auto answers = io::read_answers(a.answers);
  std::optional<Roster> roster;
  if (!a.manifest.empty()) roster = io::read_manifest_roster(a.manifest);
  int n = a.speakers;
  if (n == 0 && roster) n = roster->size();
  if (n == 0) {
    for (const auto& ans : answers) n = std::max({n, ans.speaker_a + 1, ans.speaker_b + 1});
  }
  if (roster && roster->size() != n) throw ConfigError("--speakers disagrees with the manifest");
  if (!roster) roster = Roster::make(n, n);

  SimilarityMatrix m = aggregate(answers, n, a.score_bound, a.min_answers);
  if (a.normalize) m = normalize_similarity(m);
  const auto hist = global_histogram(answers);

  io::write_matrix(a.out, m, roster->labels(), roster->closed_count());
  out << histogram_csv(hist);
  return kExitOk;
}

// ------------------------------------------------------------ histogram

struct HistogramArgs {
  std::string answers;
  std::vector<int> pair;
  std::string out;
};

int cmd_histogram(const HistogramArgs& a, std::ostream& out) {
  require_file(a.answers, "answers");
  const auto answers = io::read_answers(a.answers);
  const ScoreHistogram h = a.pair.empty() ? global_histogram(answers)
                                          : pair_histogram(answers, a.pair[0], a.pair[1]);
  const std::string csv = histogram_csv(h);
  if (!a.out.empty()) io::write_file_atomic(a.out, csv);
  out << csv;
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string matrix;
  std::string checkpoint;
  std::string log;
  std::string loss;
  int epochs = 0;
  double learning_rate = 0;
  int frames_per_step = 0;
  int batch_size = 0;
  double sce_weight = 0;
  std::string kernel;
  std::string hidden;
  int bottleneck_index = 0;
  int workers = 1;
};

std::vector<int> parse_widths(const std::string& s) {
  std::vector<int> widths;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const int w = std::stoi(item, &pos);
      if (pos != item.size() || w < 1) throw std::invalid_argument(item);
      widths.push_back(w);
    } catch (const std::exception&) {
      throw ConfigError("invalid hidden layer width '" + item + "'");
    }
  }
  if (widths.empty()) throw ConfigError("hidden layer list is empty");
  return widths;
}

struct TrainRun {
  TrainConfig cfg;
  Architecture arch = Architecture::standard();
  std::string manifest;
  std::string matrix;
  std::string checkpoint;
  std::string log;

  json to_json() const {
    return {{"loss", to_string(cfg.loss)},
            {"epochs", cfg.epochs},
            {"learning_rate", cfg.learning_rate},
            {"frames_per_speaker_per_step", cfg.frames_per_speaker_per_step},
            {"batch_size", cfg.batch_size},
            {"sce_weight", cfg.sce_weight},
            {"kernel", to_string(cfg.kernel)},
            {"seed", cfg.seed},
            {"workers", cfg.workers},
            {"hidden", arch.hidden},
            {"bottleneck_index", arch.bottleneck_index},
            {"manifest", manifest},
            {"matrix", matrix},
            {"checkpoint", checkpoint},
            {"log", log}};
  }
};

void apply_config_file(const std::string& path, TrainRun& run) {
  require_file(path, "config");
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "loss",   "epochs",  "learning_rate", "frames_per_speaker_per_step", "batch_size",
      "sce_weight", "kernel", "seed", "workers", "hidden", "bottleneck_index", "manifest",
      "matrix", "checkpoint", "log"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
      if (key == "loss") run.cfg.loss = loss_from_string(value.get<std::string>());
      else if (key == "epochs") run.cfg.epochs = value.get<int>();
      else if (key == "learning_rate") run.cfg.learning_rate = value.get<double>();
      else if (key == "frames_per_speaker_per_step") run.cfg.frames_per_speaker_per_step = value.get<int>();
      else if (key == "batch_size") run.cfg.batch_size = value.get<int>();
      else if (key == "sce_weight") run.cfg.sce_weight = value.get<double>();
      else if (key == "kernel") run.cfg.kernel = kernel_from_string(value.get<std::string>());
      else if (key == "seed") run.cfg.seed = value.get<std::uint64_t>();
      else if (key == "workers") run.cfg.workers = value.get<int>();
      else if (key == "hidden") run.arch.hidden = value.get<std::vector<int>>();
      else if (key == "bottleneck_index") run.arch.bottleneck_index = value.get<int>();
      else if (key == "manifest") run.manifest = value.get<std::string>();
      else if (key == "matrix") run.matrix = value.get<std::string>();
      else if (key == "checkpoint") run.checkpoint = value.get<std::string>();
      else if (key == "log") run.log = value.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

int cmd_train(const TrainArgs& a, const CLI::App& sub, std::uint64_t seed, bool seed_given,
              std::ostream& out) {
  TrainRun run;
  if (!a.config.empty()) apply_config_file(a.config, run);
  auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
  if (given("--loss")) run.cfg.loss = loss_from_string(a.loss);
  if (given("--epochs")) run.cfg.epochs = a.epochs;
  if (given("--lr")) run.cfg.learning_rate = a.learning_rate;
  if (given("--frames-per-step")) run.cfg.frames_per_speaker_per_step = a.frames_per_step;
  if (given("--batch-size")) run.cfg.batch_size = a.batch_size;
  if (given("--sce-weight")) run.cfg.sce_weight = a.sce_weight;
  if (given("--kernel")) run.cfg.kernel = kernel_from_string(a.kernel);
  if (given("--hidden")) run.arch.hidden = parse_widths(a.hidden);
  if (given("--bottleneck-index")) run.arch.bottleneck_index = a.bottleneck_index;
  if (given("--workers")) run.cfg.workers = a.workers;
  if (given("--manifest")) run.manifest = a.manifest;
  if (given("--matrix")) run.matrix = a.matrix;
  if (given("--checkpoint")) run.checkpoint = a.checkpoint;
  if (given("--log")) run.log = a.log;
  if (seed_given) run.cfg.seed = seed;

  run.cfg.validate();
  if (run.arch.bottleneck_index < 0 ||
      run.arch.bottleneck_index >= static_cast<int>(run.arch.hidden.size())) {
    throw ConfigError("bottleneck index must name a hidden layer");
  }
  require_file(run.manifest, "manifest");
  require_file(run.matrix, "matrix");
  require_output(run.checkpoint, "checkpoint");
  require_output(run.log, "log");

  out << run.to_json().dump(2) << "\n";

  const auto roster = io::read_roster(run.manifest);
  const auto matrix = io::read_matrix(run.matrix);
  if (matrix.matrix.size() != roster.roster.size()) {
    throw InputError("matrix covers " + std::to_string(matrix.matrix.size()) +
                     " speakers, roster has " + std::to_string(roster.roster.size()));
  }
  const TrainResult result = train(roster.frames, matrix.matrix, run.cfg, run.arch);

  io::save_checkpoint(run.checkpoint, result.network, to_string(run.cfg.loss));
  io::write_file_atomic(run.log, io::loss_trace_to_csv(result.loss_trace));
  out << "final_loss: " << io::format_double(result.loss_trace.back()) << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- extract

struct ExtractArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.manifest, "manifest");
  require_output(a.out, "d-vector");
  const auto cp = io::load_checkpoint(a.checkpoint);
  const auto roster = io::read_roster(a.manifest);
  const DVectorSet dvecs = extract_all(cp.network, roster.frames);
  io::write_file_atomic(a.out, io::dvectors_to_csv(dvecs));
  out << "extracted " << dvecs.size() << " d-vectors of dimension " << dvecs.dim() << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string matrix;
  std::string kernel = "sigmoid";
  std::string report;
  std::string scatter;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.manifest, "manifest");
  require_file(a.matrix, "matrix");
  require_output(a.report, "report");
  require_output(a.scatter, "scatter");
  const Kernel kernel = kernel_from_string(a.kernel);

  const auto cp = io::load_checkpoint(a.checkpoint);
  const auto roster = io::read_roster(a.manifest);
  const auto mf = io::read_matrix(a.matrix);
  if (mf.matrix.size() != roster.roster.size()) {
    throw CoverageError("matrix covers " + std::to_string(mf.matrix.size()) +
                        " speakers, roster has " + std::to_string(roster.roster.size()));
  }
  const SimilarityMatrix sim = normalized(mf.matrix);
  const DVectorSet dvecs = extract_all(cp.network, roster.frames);

  json report = json::object();
  std::string scatter = "s_ij,k_ij,subset\n";
  for (SubsetKind kind : {SubsetKind::all, SubsetKind::closed_closed, SubsetKind::closed_open}) {
    for (bool positive : {false, true}) {
      const PairSubset subset{kind, positive};
      const auto points = scatter_points(dvecs, sim, kernel, subset, roster.roster);
      json entry = {{"pair_count", points.size()}, {"r", nullptr}};
      if (!points.empty()) {
        try {
          entry["r"] = embedding_correlation(dvecs, sim, kernel, subset, roster.roster).r;
        } catch (const DegenerateError&) {
          // Too few pairs or zero variance; reported as null.
        }
      }
      for (const auto& p : points) {
        scatter += io::format_double(p.similarity) + "," + io::format_double(p.kernel) + "," +
                   subset.name() + "\n";
      }
      out << subset.name() << ": r="
          << (entry["r"].is_null() ? std::string("n/a") : io::format_double(entry["r"].get<double>()))
          << " pairs=" << points.size() << "\n";
      report[subset.name()] = std::move(entry);
    }
  }
  io::write_file_atomic(a.report, report.dump(2) + "\n");
  io::write_file_atomic(a.scatter, scatter);
  return kExitOk;
}

// ---------------------------------------------------------------- graph

struct GraphArgs {
  std::string matrix;
  std::string layout;
  std::string edges;
  std::string degrees;
};

int cmd_graph(const GraphArgs& a, std::ostream& out) {
  require_file(a.matrix, "matrix");
  require_output(a.layout, "layout");
  require_output(a.edges, "edges");
  require_output(a.degrees, "degrees");
  const auto mf = io::read_matrix(a.matrix);
  const SimilarityMatrix sim = normalized(mf.matrix);

  const GraphAdjacency graph = adjacency_and_degrees(sim);
  const GraphLayout layout = mds_layout(sim, 2);

  std::string layout_csv = "speaker,label,x,y\n";
  std::string degree_csv = "speaker,label,degree\n";
  for (int i = 0; i < sim.size(); ++i) {
    layout_csv += std::to_string(i) + "," + mf.labels[i] + "," +
                  io::format_double(layout.coordinates(i, 0)) + "," +
                  io::format_double(layout.coordinates(i, 1)) + "\n";
    degree_csv += std::to_string(i) + "," + mf.labels[i] + "," +
                  std::to_string(graph.degrees(i)) + "\n";
  }
  std::string edge_csv = "i,j\n";
  for (const auto& [i, j] : graph.edges()) {
    edge_csv += std::to_string(i) + "," + std::to_string(j) + "\n";
  }
  io::write_file_atomic(a.layout, layout_csv);
  io::write_file_atomic(a.edges, edge_csv);
  io::write_file_atomic(a.degrees, degree_csv);

  out << "speakers: " << sim.size() << "\nedges: " << graph.edge_count() << "\n";
  if (layout.rank_deficient) out << "warning: fewer than 2 positive MDS eigenvalues\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker embedding under subjective similarity constraints"};
  app.name("simemb");
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  auto add_seed = [&](CLI::App* sub) {
    return sub->add_option("--seed", seed, "Seed for all randomness");
  };

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a planted synthetic world");
  s->add_option("--speakers", synth.world.n_speakers, "Total speakers")->capture_default_str();
  s->add_option("--closed", synth.world.n_closed, "Closed (training) speakers")->capture_default_str();
  s->add_option("--latent-dim", synth.world.latent_dim, "Latent identity dimension")->capture_default_str();
  s->add_option("--feature-dim", synth.world.feature_dim, "Acoustic feature dimension")->capture_default_str();
  s->add_option("--noise-std", synth.world.noise_std, "Per-dimension frame noise")->capture_default_str();
  s->add_option("--negative-fraction", synth.world.negative_fraction,
                "Target share of dissimilar pairs")->capture_default_str();
  s->add_option("--latent-scale", synth.world.latent_scale, "Cluster center norm")->capture_default_str();
  s->add_option("--cluster-spread", synth.world.cluster_spread, "Jitter around cluster centers")->capture_default_str();
  s->add_option("--frames", synth.frames, "Frames per speaker")->capture_default_str();
  s->add_option("--voiced-rate", synth.voiced_rate, "Probability a frame is voiced")->capture_default_str();
  s->add_option("--listeners", synth.listeners, "Answers per speaker pair")->capture_default_str();
  s->add_option("--score-bound", synth.score_bound, "Integer score bound v")->capture_default_str();
  s->add_option("--answer-noise", synth.answer_noise, "Listener noise in score units")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();
  add_seed(s);

  AggregateArgs agg;
  auto* ag = app.add_subcommand("aggregate", "Average raw answers into a similarity matrix");
  ag->add_option("--answers", agg.answers, "Answers CSV")->required();
  ag->add_option("--manifest", agg.manifest, "Roster manifest for labels and closed count");
  ag->add_option("--speakers", agg.speakers, "Speaker count (default: manifest or max index + 1)");
  ag->add_option("--score-bound", agg.score_bound, "Score bound v")->capture_default_str();
  ag->add_option("--min-answers", agg.min_answers, "Minimum answers per pair")->capture_default_str();
  ag->add_flag("--normalize", agg.normalize, "Divide scores by the bound");
  ag->add_option("--out", agg.out, "Output matrix CSV (sidecar JSON written alongside)")->required();
  add_seed(ag);

  HistogramArgs hist;
  auto* hs = app.add_subcommand("histogram", "Score histogram with cumulative ratios");
  hs->add_option("--answers", hist.answers, "Answers CSV")->required();
  hs->add_option("--pair", hist.pair, "Restrict to speaker pair I J")->expected(2);
  hs->add_option("--out", hist.out, "Also write the CSV here");
  add_seed(hs);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a speaker-embedding network");
  t->add_option("--config", tr.config, "JSON config; flags override its keys");
  t->add_option("--manifest", tr.manifest, "Roster manifest");
  t->add_option("--matrix", tr.matrix, "Similarity matrix CSV");
  t->add_option("--checkpoint", tr.checkpoint, "Output checkpoint JSON");
  t->add_option("--log", tr.log, "Output loss-trace CSV");
  t->add_option("--loss", tr.loss, "dvec_sce | prop_vec | prop_mat | prop_mat_re (default dvec_sce)");
  t->add_option("--epochs", tr.epochs, "Epochs (default 100)");
  t->add_option("--lr", tr.learning_rate, "AdaGrad learning rate (default 0.01)");
  t->add_option("--frames-per-step", tr.frames_per_step,
                "Frames per speaker per matrix-loss step (default 8)");
  t->add_option("--batch-size", tr.batch_size, "Frame-loss mini-batch size (default 256)");
  t->add_option("--sce-weight", tr.sce_weight, "Joint cross-entropy weight for matrix losses (default 0)");
  t->add_option("--kernel", tr.kernel, "sigmoid | inner_product (default sigmoid)");
  t->add_option("--hidden", tr.hidden, "Comma-separated hidden widths (default 256,256,256,8)");
  t->add_option("--bottleneck-index", tr.bottleneck_index, "Hidden layer holding d-vectors (default 3)");
  t->add_option("--workers", tr.workers, "Worker threads (default 1)");
  auto* train_seed = add_seed(t);

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract", "Extract per-speaker d-vectors");
  e->add_option("--checkpoint", ex.checkpoint, "Checkpoint JSON")->required();
  e->add_option("--manifest", ex.manifest, "Roster manifest")->required();
  e->add_option("--out", ex.out, "Output d-vector CSV")->required();
  add_seed(e);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "Correlate kernel values with similarity scores");
  v->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required();
  v->add_option("--manifest", ev.manifest, "Roster manifest")->required();
  v->add_option("--matrix", ev.matrix, "Similarity matrix CSV")->required();
  v->add_option("--kernel", ev.kernel, "sigmoid | inner_product")->capture_default_str();
  v->add_option("--report", ev.report, "Output correlation report JSON")->required();
  v->add_option("--scatter", ev.scatter, "Output scatter CSV")->required();
  add_seed(v);

  GraphArgs gr;
  auto* g = app.add_subcommand("graph", "Similarity graph: MDS layout, edges and degrees");
  g->add_option("--matrix", gr.matrix, "Similarity matrix CSV")->required();
  g->add_option("--layout", gr.layout, "Output layout CSV")->required();
  g->add_option("--edges", gr.edges, "Output edge list CSV")->required();
  g->add_option("--degrees", gr.degrees, "Output degree CSV")->required();
  add_seed(g);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, seed, out);
    if (ag->parsed()) return cmd_aggregate(agg, out);
    if (hs->parsed()) return cmd_histogram(hist, out);
    if (t->parsed()) return cmd_train(tr, *t, seed, train_seed->count() > 0, out);
    if (e->parsed()) return cmd_extract(ex, out);
    if (v->parsed()) return cmd_eval(ev, out);
    if (g->parsed()) return cmd_graph(gr, out);
  } catch (const ConfigError& ce) {
    err << "error: " << ce.what() << "\n";
    return kExitUsage;
  } catch (const Error& de) {
    err << "error: " << de.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& fe) {
    err << "error: " << fe.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace simemb::cli
