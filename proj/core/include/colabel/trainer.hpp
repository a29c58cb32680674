#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "colabel/aggregator.hpp"
#include "colabel/calibration.hpp"
#include "colabel/classifier.hpp"
#include "colabel/types.hpp"

namespace colabel {

enum class Variant { kTcl, kTcls, kDlMv };
enum class RetrainMode { kFull, kNoisyOnly, kNone };
enum class ColabelInit { kAuto, kMajorityVote, kTrustedNb };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);
RetrainMode parse_retrain_mode(const std::string& name);
ColabelInit parse_colabel_init(const std::string& name);

struct TrainConfig {
  int iterations = 10;  // alternate-optimization rounds
  std::uint64_t seed = 0;

  std::vector<int> classifier_hidden{32};
  std::vector<int> aggregator_hidden{64, 32};
  OptimizerConfig classifier_opt{0.1, 0.9, 0.0005, 128, 1, {}};   // epochs = per iteration
  OptimizerConfig aggregator_opt{0.1, 0.9, 0.0005, 128, 3, {}};   // epochs = per iteration

  int retrain_epochs = 60;
  RetrainMode retrain_mode = RetrainMode::kFull;
  int trusted_upweight = 1;  // trusted rows are replicated this many times when retraining

  bool calibration = true;
  bool calibrate_aggregator = false;  // sparse variant only; complete-data always calibrates both
  int calibration_bins = 15;
  int calibration_min_class_points = 10;

  double prior_alpha = 1.0;
  double confusion_alpha = 0.01;
  ColabelInit colabel_init = ColabelInit::kAuto;  // auto: majority vote (tcl), trusted-nb (tcls)

  bool finetune = false;
  int finetune_epochs = 20;
  double finetune_lr_scale = 0.1;
};

struct IterationMetrics {
  int iter = 0;
  double colabel_acc = 0.0;  // vs hidden truth; nan when truth unavailable
  double clf_val_acc = 0.0;
  double agg_val_acc = 0.0;
  double ece_pre = 0.0;
  double ece_post = 0.0;  // nan when calibration is off
  double clf_loss = 0.0;
  double agg_loss = 0.0;
};

struct TrainHistory {
  std::vector<IterationMetrics> iterations;
  int colabel_updates = 0;  // bookkeeping: two per iteration
};

struct TrainResult {
  Mlp classifier;
  TrainHistory history;
  SoftLabelMatrix colabels;                       // final, aligned with untrusted rows
  std::optional<ConfusionMatrixSet> confusions;   // sparse-variant aggregator state
  std::optional<Mlp> aggregator;                  // complete-data aggregator
  double final_val_acc = 0.0;      // classifier after retraining/fine-tuning
  double final_colabel_acc = 0.0;  // nan when truth unavailable
  double final_ece_pre = 0.0;
  double final_ece_post = 0.0;     // nan when calibration is off
  ReliabilityReport final_reliability;
};

/// Alternate optimization for sparse data: confusion-based aggregation, a
/// calibrated classifier view, and two co-label updates per iteration,
/// followed by the retraining stage. val_X/val_y (optional) supply held-out
/// labeled data for history metrics; the trusted set is used otherwise.
TrainResult run_tcl(const UntrustedDataset& untrusted, const TrustedDataset& trusted, int classes,
                    const TrainConfig& cfg, const Matrix* val_X = nullptr,
                    const std::vector<int>* val_y = nullptr);

/// Complete-data variant: neural aggregator, both views calibrated,
/// co-labels initialized from the trusted annotations.
TrainResult run_tcls(const UntrustedDataset& untrusted, const TrustedDataset& trusted, int classes,
                     const TrainConfig& cfg, const Matrix* val_X = nullptr,
                     const std::vector<int>* val_y = nullptr);

/// Baseline: train on hard majority-vote labels (ties to the lowest class),
/// optionally fine-tune on the trusted set.
TrainResult run_baseline_mv(const UntrustedDataset& untrusted, const TrustedDataset& trusted,
                            int classes, const TrainConfig& cfg, bool finetune,
                            const Matrix* val_X = nullptr,
                            const std::vector<int>* val_y = nullptr);

/// The retraining stage: a freshly initialized classifier trained on the
/// untrusted rows with soft co-label targets plus (unless trusted == nullptr)
/// the trusted rows with one-hot targets, jointly shuffled, equal per-sample
/// weight apart from the configured trusted replication factor.
Mlp retrain(const Matrix& features, const SoftLabelMatrix& colabels,
            const TrustedDataset* trusted, int classes, const TrainConfig& cfg, RngStream& rng);

/// iter,colabel_acc,clf_val_acc,agg_val_acc,ece_pre,ece_post,clf_loss,agg_loss
void write_metrics_csv(const TrainHistory& history, const std::string& path);

}  // namespace colabel
