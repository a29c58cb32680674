#include "colabel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "colabel/combiner.hpp"
#include "colabel/csv.hpp"
#include "colabel/log.hpp"

namespace colabel {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

Variant parse_variant(const std::string& name) {
  if (name == "tcl") return Variant::kTcl;
  if (name == "tcls") return Variant::kTcls;
  if (name == "dl-mv") return Variant::kDlMv;
  throw ValidationError("unknown variant '" + name + "' (expected tcl, tcls or dl-mv)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kTcl: return "tcl";
    case Variant::kTcls: return "tcls";
    case Variant::kDlMv: return "dl-mv";
  }
  return "?";
}

RetrainMode parse_retrain_mode(const std::string& name) {
  if (name == "full") return RetrainMode::kFull;
  if (name == "noisy-only") return RetrainMode::kNoisyOnly;
  if (name == "none") return RetrainMode::kNone;
  throw ValidationError("unknown retraining mode '" + name + "'");
}

ColabelInit parse_colabel_init(const std::string& name) {
  if (name == "auto") return ColabelInit::kAuto;
  if (name == "mv") return ColabelInit::kMajorityVote;
  if (name == "trusted-nb") return ColabelInit::kTrustedNb;
  throw ValidationError("unknown co-label initialization '" + name + "'");
}

namespace {

struct EvalSet {
  const Matrix* X;
  const std::vector<int>* y;
};

EvalSet pick_eval(const Matrix* val_X, const std::vector<int>* val_y, const Matrix& trusted_X,
                  const std::vector<int>& trusted_y) {
  if (val_X != nullptr && val_y != nullptr && val_X->rows > 0) {
    if (static_cast<int>(val_y->size()) != val_X->rows)
      throw ValidationError("validation label count does not match feature rows");
    return {val_X, val_y};
  }
  return {&trusted_X, &trusted_y};
}

double labels_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw ValidationError("labels_accuracy: size mismatch");
  if (pred.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

SoftLabelMatrix fuse_views(const Matrix& clf_view, bool clf_calibrated, const Matrix& agg_view,
                           bool agg_calibrated, bool require_both, const ClassPrior& prior) {
  if (clf_calibrated) {
    PredictionBatch bd;
    bd.rows = clf_view;
    bd.source = PredictionSource::kDataClassifier;
    bd.calibrated = true;
    PredictionBatch bl;
    bl.rows = agg_view;
    bl.source = PredictionSource::kLabelAggregator;
    bl.calibrated = agg_calibrated;
    return combine_batch(bd, bl, prior, require_both);
  }
  // Calibration disabled: the batch contract rejects a raw classifier view,
  // so the ablation path fuses rowwise.
  SoftLabelMatrix out(clf_view.rows, clf_view.cols);
  for (int i = 0; i < clf_view.rows; ++i) {
    auto row = combine(clf_view.row(i), agg_view.row(i), prior);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

OptimizerConfig make_finetune_opt(const TrainConfig& cfg) {
  OptimizerConfig opt = cfg.classifier_opt;
  opt.lr *= cfg.finetune_lr_scale;
  opt.epochs = cfg.finetune_epochs;
  opt.schedule.clear();
  return opt;
}

void finalize_result(TrainResult* result, const UntrustedDataset& untrusted,
                     const Matrix& trusted_X, const std::vector<int>& trusted_y, EvalSet eval,
                     const TrainConfig& cfg, int classes) {
  const Mlp& clf = result->classifier;
  result->final_val_acc = accuracy(clf, *eval.X, *eval.y);
  result->final_colabel_acc =
      untrusted.hidden_truth
          ? labels_accuracy(result->colabels.argmax_labels(), *untrusted.hidden_truth)
          : kNan;
  Matrix eval_raw = predict_proba(clf, *eval.X);
  result->final_ece_pre = expected_calibration_error(eval_raw, *eval.y, cfg.calibration_bins);
  if (cfg.calibration) {
    CalibrationMap map = fit_multiclass_calibrator(predict_proba(clf, trusted_X), trusted_y,
                                                   classes, cfg.calibration_min_class_points);
    Matrix eval_cal = calibrate_batch(map, eval_raw);
    result->final_ece_post = expected_calibration_error(eval_cal, *eval.y, cfg.calibration_bins);
    result->final_reliability = reliability_report(eval_cal, *eval.y, cfg.calibration_bins);
  } else {
    result->final_ece_post = kNan;
    result->final_reliability = reliability_report(eval_raw, *eval.y, cfg.calibration_bins);
  }
}

void run_retrain_stage(TrainResult* result, const UntrustedDataset& untrusted,
                       const TrustedDataset& trusted, int classes, const TrainConfig& cfg,
                       RngStream& root) {
  RngStream retrain_rng = root.fork("retrain");
  switch (cfg.retrain_mode) {
    case RetrainMode::kFull:
      result->classifier =
          retrain(untrusted.features, result->colabels, &trusted, classes, cfg, retrain_rng);
      break;
    case RetrainMode::kNoisyOnly:
      result->classifier =
          retrain(untrusted.features, result->colabels, nullptr, classes, cfg, retrain_rng);
      break;
    case RetrainMode::kNone:
      break;
  }
  if (cfg.finetune) {
    RngStream ft_rng = root.fork("finetune");
    fine_tune(result->classifier, trusted, classes, make_finetune_opt(cfg), ft_rng);
  }
}

void log_iteration(const IterationMetrics& row) {
  log_debug("iter " + std::to_string(row.iter) + ": colabel_acc=" + format_double(row.colabel_acc) +
            " clf_val_acc=" + format_double(row.clf_val_acc) +
            " clf_loss=" + format_double(row.clf_loss));
}

}  // namespace

Mlp retrain(const Matrix& features, const SoftLabelMatrix& colabels,
            const TrustedDataset* trusted, int classes, const TrainConfig& cfg, RngStream& rng) {
  if (features.rows != colabels.size()) throw ValidationError("retrain: row count mismatch");
  RngStream init_rng = rng.fork("init");
  RngStream train_rng = rng.fork("train");
  Mlp clf = init_classifier(features.cols, cfg.classifier_hidden, classes, init_rng);

  const int upweight = std::max(1, cfg.trusted_upweight);
  const int extra = trusted != nullptr ? trusted->size() * upweight : 0;
  Matrix X(features.rows + extra, features.cols);
  Matrix targets(features.rows + extra, classes);
  for (int i = 0; i < features.rows; ++i) {
    auto fr = features.row(i);
    std::copy(fr.begin(), fr.end(), X.row(i).begin());
    auto cr = colabels.row(i);
    std::copy(cr.begin(), cr.end(), targets.row(i).begin());
  }
  if (trusted != nullptr) {
    int dst = features.rows;
    for (int r = 0; r < upweight; ++r) {
      for (const auto& ex : trusted->examples) {
        std::copy(ex.features.begin(), ex.features.end(), X.row(dst).begin());
        targets.at(dst, ex.label) = 1.0;
        ++dst;
      }
    }
  }
  OptimizerConfig opt = cfg.classifier_opt;
  opt.epochs = cfg.retrain_epochs;
  train_epochs(clf, X, targets, opt, train_rng);
  return clf;
}

TrainResult run_tcl(const UntrustedDataset& untrusted, const TrustedDataset& trusted, int classes,
                    const TrainConfig& cfg, const Matrix* val_X, const std::vector<int>* val_y) {
  const AnnotationMatrix& ann = untrusted.annotations;
  const int n = untrusted.size();
  if (n == 0) throw ValidationError("run_tcl: empty untrusted dataset");
  if (cfg.iterations < 1) throw ValidationError("run_tcl: iterations must be >= 1");

  RngStream root(cfg.seed);
  ClassPrior prior = estimate_class_prior(trusted, classes, cfg.prior_alpha);
  Matrix trusted_X = trusted_features(trusted);
  std::vector<int> trusted_y = trusted_labels(trusted);
  EvalSet eval = pick_eval(val_X, val_y, trusted_X, trusted_y);

  TrainResult result;
  ColabelInit init = cfg.colabel_init == ColabelInit::kAuto ? ColabelInit::kMajorityVote
                                                            : cfg.colabel_init;
  result.colabels = init == ColabelInit::kMajorityVote
                        ? majority_vote(ann, classes)
                        : init_colabels_trusted_nb(trusted, ann, prior, cfg.confusion_alpha,
                                                   classes);

  RngStream clf_init_rng = root.fork("clf-init");
  result.classifier =
      init_classifier(untrusted.feature_dim(), cfg.classifier_hidden, classes, clf_init_rng);
  RngStream clf_train_rng = root.fork("clf-train");

  ConfusionMatrixSet confusions;
  const int epochs_per_iter = cfg.classifier_opt.epochs;
  for (int t = 1; t <= cfg.iterations; ++t) {
    // Aggregator refresh: confusions from current co-labels, then posteriors.
    confusions = fit_nb_confusions(ann, result.colabels, cfg.confusion_alpha);
    const double agg_loss = nb_loss(ann, result.colabels, confusions, prior) / n;
    SoftLabelMatrix agg_pred = nb_posterior_batch(ann, confusions, prior);

    Matrix agg_view = agg_pred.probs;
    bool agg_calibrated = false;
    if (cfg.calibration && cfg.calibrate_aggregator) {
      if (!trusted.annotations)
        throw ValidationError("calibrate_aggregator requires trusted annotations");
      SoftLabelMatrix agg_trusted = nb_posterior_batch(*trusted.annotations, confusions, prior);
      CalibrationMap map = fit_multiclass_calibrator(agg_trusted.probs, trusted_y, classes,
                                                     cfg.calibration_min_class_points);
      agg_view = calibrate_batch(map, agg_pred.probs);
      agg_calibrated = true;
    }

    // First combination: calibrated classifier view x aggregator posterior.
    {
      Matrix clf_raw = predict_proba(result.classifier, untrusted.features);
      Matrix clf_view = clf_raw;
      bool clf_calibrated = false;
      if (cfg.calibration) {
        CalibrationMap map =
            fit_multiclass_calibrator(predict_proba(result.classifier, trusted_X), trusted_y,
                                      classes, cfg.calibration_min_class_points);
        clf_view = calibrate_batch(map, clf_raw);
        clf_calibrated = true;
      }
      result.colabels =
          fuse_views(clf_view, clf_calibrated, agg_view, agg_calibrated, false, prior);
      ++result.history.colabel_updates;
    }

    // One schedule unit of classifier training on the fresh co-labels.
    double clf_loss = kNan;
    {
      auto trace = train_epochs(result.classifier, untrusted.features, result.colabels.probs,
                                cfg.classifier_opt, clf_train_rng, (t - 1) * epochs_per_iter);
      if (!trace.empty()) clf_loss = trace.back();
    }

    // Recalibrate and combine again.
    double ece_pre = kNan;
    double ece_post = kNan;
    {
      Matrix clf_raw = predict_proba(result.classifier, untrusted.features);
      Matrix eval_raw = predict_proba(result.classifier, *eval.X);
      ece_pre = expected_calibration_error(eval_raw, *eval.y, cfg.calibration_bins);
      Matrix clf_view = clf_raw;
      bool clf_calibrated = false;
      if (cfg.calibration) {
        CalibrationMap map =
            fit_multiclass_calibrator(predict_proba(result.classifier, trusted_X), trusted_y,
                                      classes, cfg.calibration_min_class_points);
        clf_view = calibrate_batch(map, clf_raw);
        clf_calibrated = true;
        ece_post = expected_calibration_error(calibrate_batch(map, eval_raw), *eval.y,
                                              cfg.calibration_bins);
      }
      result.colabels =
          fuse_views(clf_view, clf_calibrated, agg_view, agg_calibrated, false, prior);
      ++result.history.colabel_updates;
    }

    IterationMetrics row;
    row.iter = t;
    row.colabel_acc = untrusted.hidden_truth
                          ? labels_accuracy(result.colabels.argmax_labels(), *untrusted.hidden_truth)
                          : kNan;
    row.clf_val_acc = accuracy(result.classifier, *eval.X, *eval.y);
    row.agg_val_acc = untrusted.hidden_truth
                          ? labels_accuracy(agg_pred.argmax_labels(), *untrusted.hidden_truth)
                          : kNan;
    row.ece_pre = ece_pre;
    row.ece_post = ece_post;
    row.clf_loss = clf_loss;
    row.agg_loss = agg_loss;
    log_iteration(row);
    result.history.iterations.push_back(row);
  }
  result.confusions = std::move(confusions);

  run_retrain_stage(&result, untrusted, trusted, classes, cfg, root);
  finalize_result(&result, untrusted, trusted_X, trusted_y, eval, cfg, classes);
  return result;
}

TrainResult run_tcls(const UntrustedDataset& untrusted, const TrustedDataset& trusted, int classes,
                     const TrainConfig& cfg, const Matrix* val_X, const std::vector<int>* val_y) {
  const AnnotationMatrix& ann = untrusted.annotations;
  const int n = untrusted.size();
  if (n == 0) throw ValidationError("run_tcls: empty untrusted dataset");
  if (cfg.iterations < 1) throw ValidationError("run_tcls: iterations must be >= 1");
  if (!ann.complete())
    throw ValidationError("TCLS requires complete annotations: untrusted data has missing cells");
  if (!trusted.annotations)
    throw ValidationError("TCLS requires complete annotations on the trusted set");
  if (!trusted.annotations->complete())
    throw ValidationError("TCLS requires complete annotations: trusted data has missing cells");

  RngStream root(cfg.seed);
  ClassPrior prior = estimate_class_prior(trusted, classes, cfg.prior_alpha);
  Matrix trusted_X = trusted_features(trusted);
  std::vector<int> trusted_y = trusted_labels(trusted);
  EvalSet eval = pick_eval(val_X, val_y, trusted_X, trusted_y);
  Matrix trusted_enc = encode_annotations(*trusted.annotations, classes);

  TrainResult result;
  ColabelInit init = cfg.colabel_init == ColabelInit::kAuto ? ColabelInit::kTrustedNb
                                                            : cfg.colabel_init;
  result.colabels = init == ColabelInit::kTrustedNb
                        ? init_colabels_trusted_nb(trusted, ann, prior, cfg.confusion_alpha,
                                                   classes)
                        : majority_vote(ann, classes);

  RngStream clf_init_rng = root.fork("clf-init");
  result.classifier =
      init_classifier(untrusted.feature_dim(), cfg.classifier_hidden, classes, clf_init_rng);
  RngStream agg_init_rng = root.fork("agg-init");
  Mlp aggregator = init_neural_aggregator(ann.m, classes, cfg.aggregator_hidden, agg_init_rng);
  RngStream clf_train_rng = root.fork("clf-train");
  RngStream agg_train_rng = root.fork("agg-train");

  const int clf_epochs_per_iter = cfg.classifier_opt.epochs;
  const int agg_epochs_per_iter = cfg.aggregator_opt.epochs;
  for (int t = 1; t <= cfg.iterations; ++t) {
    auto agg_trace = fit_neural_aggregator(ann, result.colabels, aggregator, cfg.aggregator_opt,
                                           agg_train_rng, (t - 1) * agg_epochs_per_iter);
    const double agg_loss = agg_trace.empty() ? kNan : agg_trace.back();
    SoftLabelMatrix agg_pred = neural_aggregator_predict_batch(aggregator, ann, classes);

    // Both views are calibrated on the trusted set before combining. The
    // aggregator does not change again within this iteration, so its
    // calibrated view is shared by both combinations.
    Matrix agg_view = agg_pred.probs;
    bool agg_calibrated = false;
    if (cfg.calibration) {
      CalibrationMap map = fit_multiclass_calibrator(predict_proba(aggregator, trusted_enc),
                                                     trusted_y, classes,
                                                     cfg.calibration_min_class_points);
      agg_view = calibrate_batch(map, agg_pred.probs);
      agg_calibrated = true;
    }

    {
      Matrix clf_raw = predict_proba(result.classifier, untrusted.features);
      Matrix clf_view = clf_raw;
      bool clf_calibrated = false;
      if (cfg.calibration) {
        CalibrationMap map =
            fit_multiclass_calibrator(predict_proba(result.classifier, trusted_X), trusted_y,
                                      classes, cfg.calibration_min_class_points);
        clf_view = calibrate_batch(map, clf_raw);
        clf_calibrated = true;
      }
      result.colabels = fuse_views(clf_view, clf_calibrated, agg_view, agg_calibrated,
                                   cfg.calibration, prior);
      ++result.history.colabel_updates;
    }

    double clf_loss = kNan;
    {
      auto trace = train_epochs(result.classifier, untrusted.features, result.colabels.probs,
                                cfg.classifier_opt, clf_train_rng, (t - 1) * clf_epochs_per_iter);
      if (!trace.empty()) clf_loss = trace.back();
    }

    double ece_pre = kNan;
    double ece_post = kNan;
    {
      Matrix clf_raw = predict_proba(result.classifier, untrusted.features);
      Matrix eval_raw = predict_proba(result.classifier, *eval.X);
      ece_pre = expected_calibration_error(eval_raw, *eval.y, cfg.calibration_bins);
      Matrix clf_view = clf_raw;
      bool clf_calibrated = false;
      if (cfg.calibration) {
        CalibrationMap map =
            fit_multiclass_calibrator(predict_proba(result.classifier, trusted_X), trusted_y,
                                      classes, cfg.calibration_min_class_points);
        clf_view = calibrate_batch(map, clf_raw);
        clf_calibrated = true;
        ece_post = expected_calibration_error(calibrate_batch(map, eval_raw), *eval.y,
                                              cfg.calibration_bins);
      }
      result.colabels = fuse_views(clf_view, clf_calibrated, agg_view, agg_calibrated,
                                   cfg.calibration, prior);
      ++result.history.colabel_updates;
    }

    IterationMetrics row;
    row.iter = t;
    row.colabel_acc = untrusted.hidden_truth
                          ? labels_accuracy(result.colabels.argmax_labels(), *untrusted.hidden_truth)
                          : kNan;
    row.clf_val_acc = accuracy(result.classifier, *eval.X, *eval.y);
    row.agg_val_acc = untrusted.hidden_truth
                          ? labels_accuracy(agg_pred.argmax_labels(), *untrusted.hidden_truth)
                          : kNan;
    row.ece_pre = ece_pre;
    row.ece_post = ece_post;
    row.clf_loss = clf_loss;
    row.agg_loss = agg_loss;
    log_iteration(row);
    result.history.iterations.push_back(row);
  }
  result.aggregator = std::move(aggregator);

  run_retrain_stage(&result, untrusted, trusted, classes, cfg, root);
  finalize_result(&result, untrusted, trusted_X, trusted_y, eval, cfg, classes);
  return result;
}

TrainResult run_baseline_mv(const UntrustedDataset& untrusted, const TrustedDataset& trusted,
                            int classes, const TrainConfig& cfg, bool finetune,
                            const Matrix* val_X, const std::vector<int>* val_y) {
  const AnnotationMatrix& ann = untrusted.annotations;
  if (untrusted.size() == 0) throw ValidationError("run_baseline_mv: empty untrusted dataset");

  RngStream root(cfg.seed);
  Matrix trusted_X = trusted_features(trusted);
  std::vector<int> trusted_y = trusted_labels(trusted);
  EvalSet eval = pick_eval(val_X, val_y, trusted_X, trusted_y);

  std::vector<int> hard = hard_majority_vote(ann, classes);
  TrainResult result;
  result.colabels = SoftLabelMatrix::one_hot(hard, classes);

  RngStream clf_init_rng = root.fork("clf-init");
  result.classifier =
      init_classifier(untrusted.feature_dim(), cfg.classifier_hidden, classes, clf_init_rng);
  RngStream clf_train_rng = root.fork("clf-train");
  OptimizerConfig opt = cfg.classifier_opt;
  opt.epochs = cfg.retrain_epochs;  // the baseline gets the retraining budget
  auto trace = train_epochs(result.classifier, untrusted.features, result.colabels.probs, opt,
                            clf_train_rng);
  if (finetune) {
    RngStream ft_rng = root.fork("finetune");
    fine_tune(result.classifier, trusted, classes, make_finetune_opt(cfg), ft_rng);
  }

  IterationMetrics row;
  row.iter = 0;
  row.colabel_acc =
      untrusted.hidden_truth ? labels_accuracy(hard, *untrusted.hidden_truth) : kNan;
  row.clf_val_acc = accuracy(result.classifier, *eval.X, *eval.y);
  row.agg_val_acc = kNan;
  row.ece_pre = expected_calibration_error(predict_proba(result.classifier, *eval.X), *eval.y,
                                           cfg.calibration_bins);
  row.ece_post = kNan;
  row.clf_loss = trace.empty() ? kNan : trace.back();
  row.agg_loss = kNan;
  result.history.iterations.push_back(row);

  TrainConfig no_cal = cfg;
  no_cal.calibration = false;  // the baseline reports raw probabilities
  finalize_result(&result, untrusted, trusted_X, trusted_y, eval, no_cal, classes);
  return result;
}

void write_metrics_csv(const TrainHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "iter,colabel_acc,clf_val_acc,agg_val_acc,ece_pre,ece_post,clf_loss,agg_loss\n";
  for (const auto& row : history.iterations) {
    out << row.iter << ',' << format_double(row.colabel_acc) << ','
        << format_double(row.clf_val_acc) << ',' << format_double(row.agg_val_acc) << ','
        << format_double(row.ece_pre) << ',' << format_double(row.ece_post) << ','
        << format_double(row.clf_loss) << ',' << format_double(row.agg_loss) << '\n';
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

}  // namespace colabel
