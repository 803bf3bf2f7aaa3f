#include "simemb/analysis.hpp"

namespace simemb {

double pearson(std::span<const std::pair<double, double>> pairs) {
  VectorXd x(static_cast<Eigen::Index>(pairs.size()));
  VectorXd y(x.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    x(static_cast<Eigen::Index>(k)) = pairs[k].first;
    y(static_cast<Eigen::Index>(k)) = pairs[k].second;
  }
  return pearson(x, y);
}

std::string to_string(SubsetKind k) {
  switch (k) {
    case SubsetKind::all: return "all";
    case SubsetKind::closed_closed: return "closed_closed";
    case SubsetKind::closed_open: return "closed_open";
    case SubsetKind::open_open: return "open_open";
  }
  return "?";
}

std::string PairSubset::name() const {
  return to_string(kind) + (positive_only ? "_positive" : "");
}

bool PairSubset::admits(const SpeakerId& a, const SpeakerId& b) const {
  if (a.index == b.index) return false;
  switch (kind) {
    case SubsetKind::all: return true;
    case SubsetKind::closed_closed: return a.closed() && b.closed();
    case SubsetKind::closed_open: return a.closed() != b.closed();
    case SubsetKind::open_open: return !a.closed() && !b.closed();
  }
  return false;
}

std::vector<ScatterPoint> scatter_points(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                         Kernel kernel, const PairSubset& subset,
                                         const Roster& roster) {
  if (roster.size() != sim.size()) {
    throw ShapeError("roster size does not match the similarity matrix");
  }
  dvecs.validate();
  std::vector<int> column(roster.size(), -1);
  for (int i = 0; i < roster.size(); ++i) column[i] = dvecs.find(i);

  std::vector<ScatterPoint> points;
  for (int i = 0; i < roster.size(); ++i) {
    for (int j = i + 1; j < roster.size(); ++j) {
      if (!subset.admits(roster[i], roster[j])) continue;
      const double s = sim(i, j);
      if (subset.positive_only && !(s > 0)) continue;
      if (column[i] < 0 || column[j] < 0) {
        throw CoverageError("no d-vector for speaker " + std::to_string(column[i] < 0 ? i : j));
      }
      const double inner = dvecs.vectors.col(column[i]).dot(dvecs.vectors.col(column[j]));
      points.push_back({i, j, s, kernel_value(kernel, inner)});
    }
  }
  return points;
}

CorrelationResult embedding_correlation(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                        Kernel kernel, const PairSubset& subset,
                                        const Roster& roster) {
  const auto points = scatter_points(dvecs, sim, kernel, subset, roster);
  if (points.empty()) throw DegenerateError("pair subset " + subset.name() + " is empty");
  VectorXd s(static_cast<Eigen::Index>(points.size()));
  VectorXd k(s.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    s(static_cast<Eigen::Index>(p)) = points[p].similarity;
    k(static_cast<Eigen::Index>(p)) = points[p].kernel;
  }
  return {pearson(s, k), static_cast<long>(points.size())};
}

std::vector<std::pair<int, int>> GraphAdjacency::edges() const {
  std::vector<std::pair<int, int>> out;
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < adjacency.cols(); ++j) {
      if (adjacency(i, j)) out.emplace_back(static_cast<int>(i), static_cast<int>(j));
    }
  }
  return out;
}

GraphAdjacency adjacency_and_degrees(const SimilarityMatrix& sim) {
  GraphAdjacency g;
  g.adjacency = build_mask(sim).entries;
  g.adjacency.diagonal().setZero();
  g.degrees = g.adjacency.rowwise().sum();
  return g;
}

GraphLayout mds_layout(const SimilarityMatrix& sim, int dims) {
  if (!sim.normalized()) throw StateError("MDS layout needs a normalized similarity matrix");
  const MatrixXd dissimilarity = (1.0 - sim.scores().array()).matrix();
  return classical_mds(dissimilarity, dims);
}

}  // namespace simemb
