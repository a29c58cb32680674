#pragma once

#include <vector>

#include "colabel/types.hpp"

namespace colabel {

enum class PredictionSource { kDataClassifier, kLabelAggregator };

struct PredictionBatch {
  Matrix rows;  // n x C, row-stochastic
  PredictionSource source = PredictionSource::kDataClassifier;
  bool calibrated = false;
};

/// Fuses the two views under conditional independence given the class:
/// output proportional to p_d[k] * p_l[k] / prior[k], computed in log domain
/// with entries floored at 1e-12. When no class carries above-floor mass in
/// both views at once, the result is uniform and *fell_back is set.
std::vector<double> combine(std::span<const double> p_d, std::span<const double> p_l,
                            const ClassPrior& prior, bool* fell_back = nullptr);

/// Rowwise combine. The data-classifier batch must be calibrated; with
/// require_both_calibrated (the complete-data variant) the aggregator batch
/// must be too. Violations are hard errors.
SoftLabelMatrix combine_batch(const PredictionBatch& batch_d, const PredictionBatch& batch_l,
                              const ClassPrior& prior, bool require_both_calibrated = false);

}  // namespace colabel
