#pragma once

#include <string>
#include <vector>

#include "colabel/types.hpp"

namespace colabel {

/// Non-decreasing step function on [0,1]: breakpoints[i] is the lowest score
/// of block i (strictly increasing), values[i] its calibrated probability
/// (non-decreasing). `identity` marks the unfitted/fallback map that returns
/// scores unchanged.
struct CalibrationEntry {
  std::vector<double> breakpoints;
  std::vector<double> values;
  bool identity = false;

  bool fitted() const { return identity || !values.empty(); }
};

/// One entry per class.
struct CalibrationMap {
  std::vector<CalibrationEntry> entries;

  int classes() const { return static_cast<int>(entries.size()); }
};

/// Weighted isotonic least-squares via pool-adjacent-violators. Scores with
/// exact ties are pre-pooled; fitted block values are the weighted means of
/// their members.
CalibrationEntry pav_fit(const std::vector<double>& scores, const std::vector<double>& targets,
                         const std::vector<double>& weights);

/// Step-function evaluation; clamps below the first and above the last block.
double apply_calibration(const CalibrationEntry& entry, double score);

/// Per-class one-vs-rest isotonic fit on trusted predictions. A class with
/// fewer than min_class_points positive examples falls back to an identity
/// map with a warning.
CalibrationMap fit_multiclass_calibrator(const Matrix& preds, const std::vector<int>& labels,
                                         int classes, int min_class_points = 10);

/// Applies the per-class maps, floors each entry at 1e-6, renormalizes.
std::vector<double> calibrate_row(const CalibrationMap& map, std::span<const double> pred);
Matrix calibrate_batch(const CalibrationMap& map, const Matrix& preds);

/// Expected calibration error over equal-width top-class-confidence bins,
/// in percent: 100 * sum_b (n_b/n) * |acc_b - conf_b|.
double expected_calibration_error(const Matrix& preds, const std::vector<int>& labels, int bins);

struct ReliabilityBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  double mean_conf = 0.0;  // nan when the bin is empty
  double accuracy = 0.0;   // nan when the bin is empty
};

struct ReliabilityReport {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;  // percent
};

ReliabilityReport reliability_report(const Matrix& preds, const std::vector<int>& labels,
                                     int bins);

/// bin_lo,bin_hi,count,mean_conf,accuracy rows plus an `ece` footer row.
void save_reliability_csv(const ReliabilityReport& report, const std::string& path);

}  // namespace colabel
