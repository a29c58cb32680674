#include "colabel/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "colabel/csv.hpp"
#include "colabel/log.hpp"

namespace colabel {

CalibrationEntry pav_fit(const std::vector<double>& scores, const std::vector<double>& targets,
                         const std::vector<double>& weights) {
  const std::size_t n = scores.size();
  if (n == 0) throw ValidationError("pav_fit: empty input");
  if (targets.size() != n || weights.size() != n)
    throw ValidationError("pav_fit: input length mismatch");
  for (double w : weights)
    if (!(w > 0.0)) throw ValidationError("pav_fit: weights must be positive");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Blocks carry (lowest score, weighted target sum, weight). Ties in score
  // are pre-pooled, then adjacent blocks merge while they violate
  // monotonicity of the weighted means.
  struct Block {
    double score;
    double wsum;
    double weight;
    double mean() const { return wsum / weight; }
  };
  std::vector<Block> stack;
  std::size_t i = 0;
  while (i < n) {
    Block b{scores[order[i]], 0.0, 0.0};
    std::size_t j = i;
    while (j < n && scores[order[j]] == b.score) {
      b.wsum += weights[order[j]] * targets[order[j]];
      b.weight += weights[order[j]];
      ++j;
    }
    i = j;
    while (!stack.empty() && stack.back().mean() > b.mean()) {
      b.wsum += stack.back().wsum;
      b.weight += stack.back().weight;
      b.score = stack.back().score;
      stack.pop_back();
    }
    stack.push_back(b);
  }

  CalibrationEntry entry;
  entry.breakpoints.reserve(stack.size());
  entry.values.reserve(stack.size());
  for (const Block& b : stack) {
    entry.breakpoints.push_back(b.score);
    entry.values.push_back(b.mean());
  }
  return entry;
}

double apply_calibration(const CalibrationEntry& entry, double score) {
  if (!entry.fitted()) throw ValidationError("apply_calibration: unfitted map");
  if (entry.identity) return score;
  // Last block whose lowest score is <= score; below the first block clamps.
  auto it = std::upper_bound(entry.breakpoints.begin(), entry.breakpoints.end(), score);
  if (it == entry.breakpoints.begin()) return entry.values.front();
  std::size_t idx = static_cast<std::size_t>(it - entry.breakpoints.begin()) - 1;
  return entry.values[idx];
}

CalibrationMap fit_multiclass_calibrator(const Matrix& preds, const std::vector<int>& labels,
                                         int classes, int min_class_points) {
  if (preds.rows == 0) throw ValidationError("fit_multiclass_calibrator: empty predictions");
  if (static_cast<int>(labels.size()) != preds.rows)
    throw ValidationError("fit_multiclass_calibrator: label count mismatch");
  if (preds.cols != classes)
    throw ValidationError("fit_multiclass_calibrator: prediction width != class count");

  std::vector<int> positives(static_cast<std::size_t>(classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= classes) throw ValidationError("fit_multiclass_calibrator: label out of range");
    ++positives[static_cast<std::size_t>(y)];
  }

  CalibrationMap map;
  map.entries.resize(static_cast<std::size_t>(classes));
  std::vector<double> scores(static_cast<std::size_t>(preds.rows));
  std::vector<double> targets(static_cast<std::size_t>(preds.rows));
  std::vector<double> weights(static_cast<std::size_t>(preds.rows), 1.0);
  for (int k = 0; k < classes; ++k) {
    if (positives[static_cast<std::size_t>(k)] < min_class_points) {
      log_warn("calibration: class " + std::to_string(k) + " has only " +
               std::to_string(positives[static_cast<std::size_t>(k)]) +
               " trusted points; using identity map");
      map.entries[static_cast<std::size_t>(k)].identity = true;
      continue;
    }
    for (int i = 0; i < preds.rows; ++i) {
      scores[static_cast<std::size_t>(i)] = preds.at(i, k);
      targets[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] == k ? 1.0 : 0.0;
    }
    map.entries[static_cast<std::size_t>(k)] = pav_fit(scores, targets, weights);
  }
  return map;
}

std::vector<double> calibrate_row(const CalibrationMap& map, std::span<const double> pred) {
  const int C = map.classes();
  if (static_cast<int>(pred.size()) != C)
    throw ValidationError("calibrate_row: width mismatch");
  std::vector<double> out(static_cast<std::size_t>(C));
  double total = 0.0;
  for (int k = 0; k < C; ++k) {
    double v = apply_calibration(map.entries[static_cast<std::size_t>(k)], pred[static_cast<std::size_t>(k)]);
    v = std::max(v, 1e-6);
    out[static_cast<std::size_t>(k)] = v;
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

Matrix calibrate_batch(const CalibrationMap& map, const Matrix& preds) {
  Matrix out(preds.rows, preds.cols);
  for (int i = 0; i < preds.rows; ++i) {
    auto row = calibrate_row(map, preds.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

namespace {

struct BinStats {
  std::vector<int> counts;
  std::vector<double> conf_sum;
  std::vector<int> hits;
  int n = 0;
};

BinStats collect_bins(const Matrix& preds, const std::vector<int>& labels, int bins) {
  if (bins < 1) throw ValidationError("calibration bins must be >= 1");
  if (preds.rows == 0) throw ValidationError("empty evaluation set");
  if (static_cast<int>(labels.size()) != preds.rows)
    throw ValidationError("label count mismatch");
  BinStats stats;
  stats.counts.assign(static_cast<std::size_t>(bins), 0);
  stats.conf_sum.assign(static_cast<std::size_t>(bins), 0.0);
  stats.hits.assign(static_cast<std::size_t>(bins), 0);
  stats.n = preds.rows;
  for (int i = 0; i < preds.rows; ++i) {
    auto r = preds.row(i);
    auto top = std::max_element(r.begin(), r.end());
    double conf = *top;
    int pred = static_cast<int>(top - r.begin());
    int b = std::min(static_cast<int>(conf * bins), bins - 1);
    if (b < 0) b = 0;
    ++stats.counts[static_cast<std::size_t>(b)];
    stats.conf_sum[static_cast<std::size_t>(b)] += conf;
    if (pred == labels[static_cast<std::size_t>(i)]) ++stats.hits[static_cast<std::size_t>(b)];
  }
  return stats;
}

}  // namespace

double expected_calibration_error(const Matrix& preds, const std::vector<int>& labels, int bins) {
  BinStats stats = collect_bins(preds, labels, bins);
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    const int nb = stats.counts[static_cast<std::size_t>(b)];
    if (nb == 0) continue;
    double conf = stats.conf_sum[static_cast<std::size_t>(b)] / nb;
    double acc = static_cast<double>(stats.hits[static_cast<std::size_t>(b)]) / nb;
    ece += (static_cast<double>(nb) / stats.n) * std::abs(acc - conf);
  }
  return 100.0 * ece;
}

ReliabilityReport reliability_report(const Matrix& preds, const std::vector<int>& labels,
                                     int bins) {
  BinStats stats = collect_bins(preds, labels, bins);
  ReliabilityReport report;
  report.bins.resize(static_cast<std::size_t>(bins));
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    ReliabilityBin& bin = report.bins[static_cast<std::size_t>(b)];
    bin.lo = static_cast<double>(b) / bins;
    bin.hi = static_cast<double>(b + 1) / bins;
    bin.count = stats.counts[static_cast<std::size_t>(b)];
    if (bin.count == 0) {
      bin.mean_conf = std::nan("");
      bin.accuracy = std::nan("");
      continue;
    }
    bin.mean_conf = stats.conf_sum[static_cast<std::size_t>(b)] / bin.count;
    bin.accuracy = static_cast<double>(stats.hits[static_cast<std::size_t>(b)]) / bin.count;
    ece += (static_cast<double>(bin.count) / stats.n) * std::abs(bin.accuracy - bin.mean_conf);
  }
  report.ece = 100.0 * ece;
  return report;
}

void save_reliability_csv(const ReliabilityReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "bin_lo,bin_hi,count,mean_conf,accuracy\n";
  for (const auto& bin : report.bins) {
    out << format_double(bin.lo) << ',' << format_double(bin.hi) << ',' << bin.count << ','
        << format_double(bin.mean_conf) << ',' << format_double(bin.accuracy) << '\n';
  }
  out << "ece,,,," << format_double(report.ece) << '\n';
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

}  // namespace colabel
