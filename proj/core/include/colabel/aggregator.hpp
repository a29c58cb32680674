#pragma once

#include <string>
#include <vector>

#include "colabel/classifier.hpp"
#include "colabel/rng.hpp"
#include "colabel/types.hpp"

namespace colabel {

/// Per-annotator row-stochastic confusion matrices.
/// matrices[j].at(k, s) = P(annotator j reports s | true class k).
struct ConfusionMatrixSet {
  std::vector<Matrix> matrices;

  int annotators() const { return static_cast<int>(matrices.size()); }
  int classes() const { return matrices.empty() ? 0 : matrices.front().rows; }
};

using NeuralAggregatorParams = Mlp;

/// Soft majority vote: the modal class gets probability 1; ties split the
/// mass uniformly over the tied classes. Throws on an all-missing row.
SoftLabelMatrix majority_vote(const AnnotationMatrix& annotations, int classes);

/// Hard majority vote for the baseline: ties break to the lowest class index.
std::vector<int> hard_majority_vote(const AnnotationMatrix& annotations, int classes);

/// Posterior over the true class for one annotation row under the
/// conditional-independence model: proportional to
/// prior[k] * prod over observed j of confusion[j](k, row[j]).
/// Missing entries contribute no factor. Computed in log domain;
/// probabilities are floored at 1e-12 before their logs are taken.
std::vector<double> nb_posterior(std::span<const int> row, const ConfusionMatrixSet& confusions,
                                 const ClassPrior& prior);

/// nb_posterior for every row.
SoftLabelMatrix nb_posterior_batch(const AnnotationMatrix& annotations,
                                   const ConfusionMatrixSet& confusions, const ClassPrior& prior);

/// Soft-count confusion estimation. For annotator j:
/// pi[k][s] = (sum over rows j labeled of colabel[k]*1[label==s] + alpha)
///          / (sum over rows j labeled of colabel[k] + alpha*C).
/// An entirely missing column yields a uniform matrix and a warning.
ConfusionMatrixSet fit_nb_confusions(const AnnotationMatrix& annotations,
                                     const SoftLabelMatrix& colabels, double alpha);

/// Sum over rows of the cross-entropy between the co-label and the posterior.
double nb_loss(const AnnotationMatrix& annotations, const SoftLabelMatrix& colabels,
               const ConfusionMatrixSet& confusions, const ClassPrior& prior);

/// Concatenated one-hot encoding of a complete annotation row (dim m*C).
/// Throws if any entry is missing: the neural aggregator needs complete data.
void encode_annotation_row(std::span<const int> row, int classes, std::span<double> out);
Matrix encode_annotations(const AnnotationMatrix& annotations, int classes);

Mlp init_neural_aggregator(int annotators, int classes, const std::vector<int>& hidden_dims,
                           RngStream& rng);

/// Mini-batch training of the neural aggregator on (annotations, colabels).
std::vector<double> fit_neural_aggregator(const AnnotationMatrix& annotations,
                                          const SoftLabelMatrix& colabels, Mlp& params,
                                          const OptimizerConfig& opt, RngStream& rng,
                                          int epoch_offset = 0);

std::vector<double> neural_aggregator_predict(const Mlp& params, std::span<const int> row,
                                              int classes);
SoftLabelMatrix neural_aggregator_predict_batch(const Mlp& params,
                                                const AnnotationMatrix& annotations, int classes);

/// Co-label initialization for the complete-data variant: confusions are
/// estimated from the trusted annotations against one-hot true labels, then
/// the posterior is applied to every untrusted row.
SoftLabelMatrix init_colabels_trusted_nb(const TrustedDataset& trusted,
                                         const AnnotationMatrix& untrusted_annotations,
                                         const ClassPrior& prior, double alpha, int classes);

/// JSON export: [{"annotator": j, "matrix": [[...], ...]}, ...].
void save_confusions_json(const ConfusionMatrixSet& confusions, const std::string& path);
ConfusionMatrixSet load_confusions_json(const std::string& path);

}  // namespace colabel
