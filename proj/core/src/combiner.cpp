#include "colabel/combiner.hpp"

#include <algorithm>
#include <cmath>

#include "colabel/log.hpp"

namespace colabel {

namespace {
constexpr double kFloor = 1e-12;
}

std::vector<double> combine(std::span<const double> p_d, std::span<const double> p_l,
                            const ClassPrior& prior, bool* fell_back) {
  const int C = prior.classes();
  if (static_cast<int>(p_d.size()) != C || static_cast<int>(p_l.size()) != C)
    throw ValidationError("combine: width mismatch");
  if (fell_back != nullptr) *fell_back = false;

  bool any_joint_mass = false;
  for (int k = 0; k < C; ++k)
    if (p_d[static_cast<std::size_t>(k)] > kFloor && p_l[static_cast<std::size_t>(k)] > kFloor) {
      any_joint_mass = true;
      break;
    }
  std::vector<double> out(static_cast<std::size_t>(C));
  if (!any_joint_mass) {
    // The views agree on nothing above the floor; the product carries no
    // information, so fall back to uniform and flag it.
    log_warn("combine: views share no above-floor class; uniform fallback");
    if (fell_back != nullptr) *fell_back = true;
    std::fill(out.begin(), out.end(), 1.0 / C);
    return out;
  }

  std::vector<double> log_score(static_cast<std::size_t>(C));
  for (int k = 0; k < C; ++k) {
    log_score[static_cast<std::size_t>(k)] =
        std::log(std::max(p_d[static_cast<std::size_t>(k)], kFloor)) +
        std::log(std::max(p_l[static_cast<std::size_t>(k)], kFloor)) -
        std::log(std::max(prior.probs[static_cast<std::size_t>(k)], kFloor));
  }
  double zmax = *std::max_element(log_score.begin(), log_score.end());
  double total = 0.0;
  for (int k = 0; k < C; ++k) {
    out[static_cast<std::size_t>(k)] = std::exp(log_score[static_cast<std::size_t>(k)] - zmax);
    total += out[static_cast<std::size_t>(k)];
  }
  for (double& v : out) v /= total;
  return out;
}

SoftLabelMatrix combine_batch(const PredictionBatch& batch_d, const PredictionBatch& batch_l,
                              const ClassPrior& prior, bool require_both_calibrated) {
  if (batch_d.source != PredictionSource::kDataClassifier ||
      batch_l.source != PredictionSource::kLabelAggregator)
    throw ValidationError("combine_batch: batches must be (data classifier, label aggregator)");
  if (!batch_d.calibrated)
    throw ValidationError("combine_batch: data-classifier batch must be calibrated");
  if (require_both_calibrated && !batch_l.calibrated)
    throw ValidationError("combine_batch: aggregator batch must be calibrated");
  if (batch_d.rows.rows != batch_l.rows.rows || batch_d.rows.cols != batch_l.rows.cols)
    throw ValidationError("combine_batch: shape mismatch");

  SoftLabelMatrix out(batch_d.rows.rows, batch_d.rows.cols);
  for (int i = 0; i < batch_d.rows.rows; ++i) {
    auto row = combine(batch_d.rows.row(i), batch_l.rows.row(i), prior);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace colabel
