#include "simemb/embedding.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>

#include "parallel.hpp"

namespace simemb {

std::string to_string(LossTag t) {
  switch (t) {
    case LossTag::dvec_sce: return "dvec_sce";
    case LossTag::prop_vec: return "prop_vec";
    case LossTag::prop_mat: return "prop_mat";
    case LossTag::prop_mat_re: return "prop_mat_re";
  }
  return "?";
}

LossTag loss_from_string(const std::string& s) {
  if (s == "dvec_sce") return LossTag::dvec_sce;
  if (s == "prop_vec") return LossTag::prop_vec;
  if (s == "prop_mat") return LossTag::prop_mat;
  if (s == "prop_mat_re") return LossTag::prop_mat_re;
  throw ConfigError("unknown loss '" + s + "' (expected dvec_sce, prop_vec, prop_mat or prop_mat_re)");
}

Architecture Architecture::standard() { return {{256, 256, 256, 8}, 3}; }
Architecture Architecture::small() { return {{8, 8, 8, 3}, 3}; }

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate >= 0)) throw ConfigError("learning rate must be nonnegative");
  if (frames_per_speaker_per_step < 1) throw ConfigError("frames per speaker per step must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(sce_weight >= 0)) throw ConfigError("sce weight must be nonnegative");
  if (workers < 1) throw ConfigError("workers must be at least 1");
}

namespace {

// Fixed chunk width: forward/backward results do not depend on the number of
// workers, only on this constant.
constexpr Eigen::Index kChunk = 64;

struct ChunkedForward {
  std::vector<ForwardResult> chunks;
  MatrixXd output;
  MatrixXd bottleneck;
};

Eigen::Index chunk_count(Eigen::Index cols) { return (cols + kChunk - 1) / kChunk; }

ChunkedForward chunked_forward(const Network& net, const MatrixXd& inputs, int workers) {
  ChunkedForward fw;
  const Eigen::Index n = chunk_count(inputs.cols());
  fw.chunks.resize(n);
  detail::parallel_for(static_cast<int>(n), workers, [&](int c) {
    const Eigen::Index start = c * kChunk;
    const Eigen::Index width = std::min(kChunk, inputs.cols() - start);
    fw.chunks[c] = forward(net, inputs.middleCols(start, width));
  });
  fw.output.resize(net.output_dim(), inputs.cols());
  fw.bottleneck.resize(net.bottleneck_dim(), inputs.cols());
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto width = fw.chunks[c].output.cols();
    fw.output.middleCols(c * kChunk, width) = fw.chunks[c].output;
    fw.bottleneck.middleCols(c * kChunk, width) = fw.chunks[c].bottleneck;
  }
  return fw;
}

Gradients chunked_backward(const Network& net, const ChunkedForward& fw,
                           const MatrixXd& output_gradient, const MatrixXd& bottleneck_gradient,
                           int workers) {
  const int n = static_cast<int>(fw.chunks.size());
  std::vector<Gradients> partial(n);
  detail::parallel_for(n, workers, [&](int c) {
    const Eigen::Index start = c * kChunk;
    const Eigen::Index width = fw.chunks[c].output.cols();
    partial[c] = backward(net, fw.chunks[c].cache, output_gradient.middleCols(start, width),
                          bottleneck_gradient.middleCols(start, width));
  });
  Gradients total = Gradients::zeros_like(net);
  for (const auto& g : partial) total += g;
  return total;
}

Objective evaluate_frames(const Network& net, const MatrixXd& inputs,
                          std::span<const int> speakers, LossTag loss,
                          const SimilarityMatrix* closed_sim, int workers, bool with_gradients) {
  if (static_cast<Eigen::Index>(speakers.size()) != inputs.cols() || inputs.cols() == 0) {
    throw ShapeError("one speaker index is needed per input column");
  }
  const int n_out = net.output_dim();
  if (loss == LossTag::dvec_sce) {
    if (net.layers.back().activation != Activation::softmax) {
      throw StateError("dvec_sce needs a softmax output layer");
    }
  } else if (loss == LossTag::prop_vec) {
    if (!closed_sim || !closed_sim->normalized()) {
      throw StateError("prop_vec needs a normalized similarity matrix");
    }
    if (closed_sim->size() != n_out) {
      throw ShapeError("similarity vector size does not match the network output");
    }
  } else {
    throw StateError("frame objective only handles dvec_sce and prop_vec");
  }

  const ChunkedForward fw = chunked_forward(net, inputs, workers);
  const Eigen::Index batch = inputs.cols();
  const double inv_batch = 1.0 / static_cast<double>(batch);
  MatrixXd output_gradient(n_out, batch);
  double total = 0.0;
  for (Eigen::Index c = 0; c < batch; ++c) {
    const int spk = speakers[c];
    if (spk < 0 || spk >= n_out) throw RangeError("speaker index outside the network output");
    if (loss == LossTag::dvec_sce) {
      const auto r = sce_loss(make_speaker_code(spk, n_out), fw.output.col(c));
      total += r.loss;
      output_gradient.col(c) = r.gradient * inv_batch;
    } else {
      const auto r =
          simvec_loss(closed_sim->scores().row(spk).transpose(), fw.output.col(c));
      total += r.loss;
      output_gradient.col(c) = r.gradient * inv_batch;
    }
  }
  Objective obj;
  obj.loss = total * inv_batch;
  if (with_gradients) {
    const MatrixXd bottleneck_gradient = MatrixXd::Zero(net.bottleneck_dim(), batch);
    obj.gradients = chunked_backward(net, fw, output_gradient, bottleneck_gradient, workers);
  }
  return obj;
}

Objective evaluate_matrix(const Network& net, const MatrixXd& inputs,
                          std::span<const int> frame_counts, const SimilarityMatrix& closed_sim,
                          const MaskMatrix* mask, Kernel kernel, double sce_weight, int workers,
                          bool with_gradients) {
  if (!closed_sim.normalized()) throw StateError("matrix loss needs a normalized similarity matrix");
  const int n_s = closed_sim.size();
  if (static_cast<int>(frame_counts.size()) != n_s) {
    throw ShapeError("frame counts do not match the similarity matrix size");
  }
  if (sce_weight > 0 && (net.layers.back().activation != Activation::softmax ||
                         net.output_dim() != n_s)) {
    throw StateError("joint cross-entropy needs a softmax output over the closed speakers");
  }

  const ChunkedForward fw = chunked_forward(net, inputs, workers);
  const MatrixXd dvectors = pool_means(fw.bottleneck, frame_counts);
  const auto matrix_loss =
      mask ? simmat_relaxed_loss(dvectors, closed_sim.scores(), closed_sim.diagonal_value(),
                                 *mask, kernel)
           : simmat_loss(dvectors, closed_sim.scores(), closed_sim.diagonal_value(), kernel);

  Objective obj;
  obj.loss = matrix_loss.loss;
  const Eigen::Index batch = inputs.cols();
  MatrixXd output_gradient = MatrixXd::Zero(net.output_dim(), batch);
  if (sce_weight > 0) {
    const double scale = sce_weight / static_cast<double>(batch);
    double total = 0.0;
    Eigen::Index c = 0;
    for (int spk = 0; spk < n_s; ++spk) {
      for (int t = 0; t < frame_counts[spk]; ++t, ++c) {
        const auto r = sce_loss(make_speaker_code(spk, n_s), fw.output.col(c));
        total += r.loss;
        output_gradient.col(c) = r.gradient * scale;
      }
    }
    obj.loss += total * scale;
  }
  if (with_gradients) {
    const MatrixXd bottleneck_gradient = spread_mean_gradient(matrix_loss.gradient, frame_counts);
    obj.gradients = chunked_backward(net, fw, output_gradient, bottleneck_gradient, workers);
  }
  return obj;
}

bool is_matrix_loss(LossTag t) { return t == LossTag::prop_mat || t == LossTag::prop_mat_re; }

}  // namespace

MatrixXd pool_means(const MatrixXd& columns, std::span<const int> frame_counts) {
  MatrixXd means(columns.rows(), static_cast<Eigen::Index>(frame_counts.size()));
  Eigen::Index start = 0;
  for (std::size_t i = 0; i < frame_counts.size(); ++i) {
    const int k = frame_counts[i];
    if (k < 1) throw InputError("every speaker needs at least one frame");
    if (start + k > columns.cols()) throw ShapeError("frame counts exceed the column count");
    means.col(static_cast<Eigen::Index>(i)) = columns.middleCols(start, k).rowwise().sum() / k;
    start += k;
  }
  if (start != columns.cols()) throw ShapeError("frame counts do not cover every column");
  return means;
}

MatrixXd spread_mean_gradient(const MatrixXd& speaker_gradient,
                              std::span<const int> frame_counts) {
  if (speaker_gradient.cols() != static_cast<Eigen::Index>(frame_counts.size())) {
    throw ShapeError("gradient columns do not match the speaker count");
  }
  const Eigen::Index total = std::accumulate(frame_counts.begin(), frame_counts.end(), Eigen::Index{0});
  MatrixXd out(speaker_gradient.rows(), total);
  Eigen::Index start = 0;
  for (std::size_t i = 0; i < frame_counts.size(); ++i) {
    const int k = frame_counts[i];
    if (k < 1) throw InputError("every speaker needs at least one frame");
    const VectorXd g = speaker_gradient.col(static_cast<Eigen::Index>(i)) / k;
    for (int t = 0; t < k; ++t) out.col(start + t) = g;
    start += k;
  }
  return out;
}

Objective frame_objective(const Network& net, const MatrixXd& inputs,
                          std::span<const int> speakers, LossTag loss,
                          const SimilarityMatrix* closed_sim, int workers) {
  return evaluate_frames(net, inputs, speakers, loss, closed_sim, workers, true);
}

Objective matrix_objective(const Network& net, const MatrixXd& inputs,
                           std::span<const int> frame_counts, const SimilarityMatrix& closed_sim,
                           const MaskMatrix* mask, Kernel kernel, double sce_weight,
                           int workers) {
  return evaluate_matrix(net, inputs, frame_counts, closed_sim, mask, kernel, sce_weight, workers,
                         true);
}

VectorXd extract_dvector(const Network& net, const FrameSet& frames) {
  frames.validate();
  if (frames.feature_dim() != net.input_dim()) {
    throw ShapeError("speaker " + frames.speaker.label + " has feature dimension " +
                     std::to_string(frames.feature_dim()) + ", network expects " +
                     std::to_string(net.input_dim()));
  }
  if (frames.voiced_count() == 0) {
    throw InputError("speaker " + frames.speaker.label + " has no voiced frames");
  }
  const MatrixXd inputs = net.standardizer.apply(frames.voiced_columns());
  const ChunkedForward fw = chunked_forward(net, inputs, 1);
  return fw.bottleneck.rowwise().sum() / static_cast<double>(inputs.cols());
}

DVectorSet extract_all(const Network& net, std::span<const FrameSet> roster) {
  DVectorSet out;
  out.vectors.resize(net.bottleneck_dim(), static_cast<Eigen::Index>(roster.size()));
  for (std::size_t i = 0; i < roster.size(); ++i) {
    try {
      out.vectors.col(static_cast<Eigen::Index>(i)) = extract_dvector(net, roster[i]);
    } catch (const InputError& e) {
      throw InputError("d-vector extraction failed for speaker " +
                       std::to_string(roster[i].speaker.index) + ": " + e.what());
    }
    out.speakers.push_back(roster[i].speaker);
  }
  out.validate();
  return out;
}

TrainResult train(std::span<const FrameSet> roster, const SimilarityMatrix& sim,
                  const TrainConfig& cfg, const Architecture& arch) {
  cfg.validate();

  std::vector<const FrameSet*> closed;
  for (const auto& fs : roster) {
    fs.validate();
    if (fs.speaker.closed()) closed.push_back(&fs);
  }
  std::sort(closed.begin(), closed.end(),
            [](const FrameSet* a, const FrameSet* b) { return a->speaker.index < b->speaker.index; });
  const int n_s = static_cast<int>(closed.size());
  if (n_s < 2) throw InputError("training needs at least two closed speakers");
  for (int i = 0; i < n_s; ++i) {
    if (closed[i]->speaker.index != i) {
      throw InputError("closed speakers must have indices 0.." + std::to_string(n_s - 1));
    }
  }
  const int feature_dim = closed.front()->feature_dim();
  for (const auto* fs : closed) {
    if (fs->feature_dim() != feature_dim) throw ShapeError("speakers disagree on feature dimension");
  }

  const bool matrix = is_matrix_loss(cfg.loss);
  std::optional<SimilarityMatrix> closed_sim;
  if (cfg.loss != LossTag::dvec_sce) {
    if (!sim.normalized()) {
      throw StateError(to_string(cfg.loss) + " needs a normalized similarity matrix");
    }
    if (sim.size() < n_s) throw ShapeError("similarity matrix does not cover the closed speakers");
    closed_sim = sim.leading_block(n_s);
  }

  const int min_voiced = matrix ? cfg.frames_per_speaker_per_step : 1;
  std::vector<MatrixXd> speaker_frames;
  std::vector<int> voiced_counts;
  Eigen::Index total_frames = 0;
  for (const auto* fs : closed) {
    if (fs->voiced_count() < min_voiced) {
      throw InputError("speaker " + fs->speaker.label + " has " +
                       std::to_string(fs->voiced_count()) + " voiced frames, need " +
                       std::to_string(min_voiced));
    }
    speaker_frames.push_back(fs->voiced_columns());
    voiced_counts.push_back(static_cast<int>(speaker_frames.back().cols()));
    total_frames += speaker_frames.back().cols();
  }

  MatrixXd all(feature_dim, total_frames);
  std::vector<int> frame_speaker;
  frame_speaker.reserve(total_frames);
  {
    Eigen::Index c = 0;
    for (int i = 0; i < n_s; ++i) {
      all.middleCols(c, speaker_frames[i].cols()) = speaker_frames[i];
      c += speaker_frames[i].cols();
      frame_speaker.insert(frame_speaker.end(), speaker_frames[i].cols(), i);
    }
  }
  const Standardizer standardizer = fit_standardizer(all);
  all = standardizer.apply(all);

  NetworkShape shape;
  shape.input_dim = feature_dim;
  shape.hidden = arch.hidden;
  shape.bottleneck_index = arch.bottleneck_index;
  shape.output_dim = n_s;
  shape.output_activation =
      cfg.loss == LossTag::prop_vec ? Activation::tanh : Activation::softmax;
  TrainResult result{make_network(shape, cfg.seed), {}};
  Network& net = result.network;
  net.standardizer = standardizer;

  std::optional<MaskMatrix> mask;
  if (cfg.loss == LossTag::prop_mat_re) {
    mask = build_mask(closed_sim->scores());
    if (mask->off_diagonal_ones() == 0) {
      throw DegenerateError("no closed speaker pair has a positive similarity");
    }
  }
  const MaskMatrix* mask_ptr = mask ? &*mask : nullptr;
  const SimilarityMatrix* sim_ptr = closed_sim ? &*closed_sim : nullptr;

  AdaGradState state = AdaGradState::fresh(net, cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  std::vector<int> order(total_frames);
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<int>> pools(n_s);
  for (int i = 0; i < n_s; ++i) {
    pools[i].resize(voiced_counts[i]);
    std::iota(pools[i].begin(), pools[i].end(), 0);
  }
  std::vector<Eigen::Index> offsets(n_s, 0);
  for (int i = 1; i < n_s; ++i) offsets[i] = offsets[i - 1] + voiced_counts[i - 1];

  const int k = cfg.frames_per_speaker_per_step;
  const Eigen::Index per_step = static_cast<Eigen::Index>(n_s) * k;
  const Eigen::Index matrix_steps = (total_frames + per_step - 1) / per_step;
  const std::vector<int> step_counts(n_s, k);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (!matrix) {
      std::shuffle(order.begin(), order.end(), rng);
      for (Eigen::Index start = 0; start < total_frames; start += cfg.batch_size) {
        const Eigen::Index width = std::min<Eigen::Index>(cfg.batch_size, total_frames - start);
        MatrixXd batch(feature_dim, width);
        std::vector<int> speakers(width);
        for (Eigen::Index c = 0; c < width; ++c) {
          const int idx = order[start + c];
          batch.col(c) = all.col(idx);
          speakers[c] = frame_speaker[idx];
        }
        const Objective obj =
            evaluate_frames(net, batch, speakers, cfg.loss, sim_ptr, cfg.workers, true);
        adagrad_step(net, obj.gradients, state);
      }
      result.loss_trace.push_back(
          evaluate_frames(net, all, frame_speaker, cfg.loss, sim_ptr, cfg.workers, false).loss);
    } else {
      for (Eigen::Index step = 0; step < matrix_steps; ++step) {
        MatrixXd batch(feature_dim, per_step);
        Eigen::Index c = 0;
        for (int i = 0; i < n_s; ++i) {
          auto& pool = pools[i];
          // Partial Fisher-Yates: the first k entries become a fresh sample
          // without replacement.
          for (int t = 0; t < k; ++t) {
            std::uniform_int_distribution<int> pick(t, static_cast<int>(pool.size()) - 1);
            std::swap(pool[t], pool[pick(rng)]);
            batch.col(c++) = all.col(offsets[i] + pool[t]);
          }
        }
        const Objective obj = evaluate_matrix(net, batch, step_counts, *closed_sim, mask_ptr,
                                              cfg.kernel, cfg.sce_weight, cfg.workers, true);
        adagrad_step(net, obj.gradients, state);
      }
      result.loss_trace.push_back(evaluate_matrix(net, all, voiced_counts, *closed_sim, mask_ptr,
                                                  cfg.kernel, cfg.sce_weight, cfg.workers, false)
                                      .loss);
    }
  }
  return result;
}

}  // namespace simemb
