#include "simemb/losses.hpp"

namespace simemb {

std::string to_string(Kernel k) {
  return k == Kernel::sigmoid ? "sigmoid" : "inner_product";
}

Kernel kernel_from_string(const std::string& s) {
  if (s == "sigmoid") return Kernel::sigmoid;
  if (s == "inner_product") return Kernel::inner_product;
  throw ConfigError("unknown kernel '" + s + "' (expected sigmoid or inner_product)");
}

MaskMatrix build_mask(const SimilarityMatrix& sim) { return build_mask(sim.scores()); }

MatrixXd speaker_columns(const DVectorSet& dvecs, int n) {
  dvecs.validate();
  MatrixXd out(dvecs.dim(), n);
  for (int i = 0; i < n; ++i) {
    const int pos = dvecs.find(i);
    if (pos < 0) throw CoverageError("no d-vector for speaker " + std::to_string(i));
    out.col(i) = dvecs.vectors.col(pos);
  }
  return out;
}

MatrixXd gram(const DVectorSet& dvecs, int n_speakers, Kernel kernel) {
  return gram(speaker_columns(dvecs, n_speakers), kernel);
}

MatrixLoss<double> simmat_loss(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                               Kernel kernel) {
  if (!sim.normalized()) throw StateError("matrix loss needs a normalized similarity matrix");
  return simmat_loss(speaker_columns(dvecs, sim.size()), sim.scores(), sim.diagonal_value(),
                     kernel);
}

MatrixLoss<double> simmat_relaxed_loss(const DVectorSet& dvecs, const SimilarityMatrix& sim,
                                       const MaskMatrix& mask, Kernel kernel) {
  if (!sim.normalized()) throw StateError("matrix loss needs a normalized similarity matrix");
  if (mask.entries.rows() != sim.size() || mask.entries != build_mask(sim).entries) {
    throw InputError("mask is inconsistent with the similarity matrix");
  }
  return simmat_relaxed_loss(speaker_columns(dvecs, sim.size()), sim.scores(),
                             sim.diagonal_value(), mask, kernel);
}

}  // namespace simemb
