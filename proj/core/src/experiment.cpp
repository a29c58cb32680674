#include "colabel/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include "colabel/log.hpp"
#include "json.hpp"

namespace colabel {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ValidationError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": bad value for '" + key + "'");
  }
}

OptimizerConfig parse_optimizer(const json& obj, const OptimizerConfig& defaults,
                                std::vector<int>* hidden, const std::string& where) {
  check_keys(obj,
             {"hidden", "lr", "momentum", "weight_decay", "batch_size", "epochs_per_iteration",
              "schedule"},
             where);
  OptimizerConfig opt = defaults;
  opt.lr = get_or(obj, "lr", opt.lr, where);
  opt.momentum = get_or(obj, "momentum", opt.momentum, where);
  opt.weight_decay = get_or(obj, "weight_decay", opt.weight_decay, where);
  opt.batch_size = get_or(obj, "batch_size", opt.batch_size, where);
  opt.epochs = get_or(obj, "epochs_per_iteration", opt.epochs, where);
  if (obj.contains("schedule")) {
    opt.schedule.clear();
    for (const auto& entry : obj.at("schedule")) {
      if (!entry.is_array() || entry.size() != 2)
        throw ValidationError(where + ": schedule entries must be [epoch, multiplier]");
      opt.schedule.emplace_back(entry[0].get<int>(), entry[1].get<double>());
    }
  }
  if (obj.contains("hidden")) *hidden = obj.at("hidden").get<std::vector<int>>();
  return opt;
}

NoiseSpec parse_noise_spec(const json& obj, const std::string& where) {
  check_keys(obj, {"kind", "eps", "correct_classes", "base", "count"}, where);
  NoiseSpec spec;
  if (!obj.contains("kind")) throw ValidationError(where + ": annotator needs a 'kind'");
  spec.kind = parse_noise_kind(obj.at("kind").get<std::string>());
  spec.eps = get_or(obj, "eps", 0.0, where);
  spec.correct_classes = get_or(obj, "correct_classes", std::vector<int>{}, where);
  spec.base_annotator = get_or(obj, "base", -1, where);
  if ((spec.kind == NoiseKind::kSymmetric || spec.kind == NoiseKind::kPair) &&
      !obj.contains("eps"))
    throw ValidationError(where + ": '" + noise_kind_name(spec.kind) + "' needs 'eps'");
  if (spec.kind == NoiseKind::kClassWise && spec.correct_classes.empty())
    throw ValidationError(where + ": 'classwise' needs nonempty 'correct_classes'");
  if (noise_kind_correlated(spec.kind) && spec.base_annotator < 0)
    throw ValidationError(where + ": correlated annotator needs 'base'");
  return spec;
}

SimulationSpec parse_simulation(const json& obj) {
  const std::string where = "config.simulate";
  check_keys(obj,
             {"classes", "feature_dim", "n_untrusted", "n_trusted", "center_separation",
              "cluster_std", "labels_per_instance", "annotators_per_spec", "annotators",
              "trusted_annotations"},
             where);
  SimulationSpec spec;
  spec.classes = get_or(obj, "classes", spec.classes, where);
  spec.feature_dim = get_or(obj, "feature_dim", spec.feature_dim, where);
  spec.n_untrusted = get_or(obj, "n_untrusted", spec.n_untrusted, where);
  spec.n_trusted = get_or(obj, "n_trusted", spec.n_trusted, where);
  spec.center_separation = get_or(obj, "center_separation", spec.center_separation, where);
  spec.cluster_std = get_or(obj, "cluster_std", spec.cluster_std, where);
  spec.trusted_annotations = get_or(obj, "trusted_annotations", spec.trusted_annotations, where);
  if (obj.contains("labels_per_instance")) {
    const auto& v = obj.at("labels_per_instance");
    if (v.is_string() && v.get<std::string>() == "all")
      spec.group.labels_per_instance = 0;
    else
      spec.group.labels_per_instance = v.get<int>();
  }
  spec.group.annotators_per_spec = get_or(obj, "annotators_per_spec", 1, where);
  if (!obj.contains("annotators") || obj.at("annotators").empty())
    throw ValidationError(where + ": needs a nonempty 'annotators' list");
  int index = 0;
  for (const auto& entry : obj.at("annotators")) {
    NoiseSpec noise = parse_noise_spec(entry, where + ".annotators[" + std::to_string(index) + "]");
    // Per-annotator "count" expands here so correlated 'base' keeps meaning
    // an expanded annotator index (only valid with annotators_per_spec == 1).
    int count = get_or(entry, "count", 1, where);
    if (count > 1 && spec.group.annotators_per_spec != 1)
      throw ValidationError(where + ": use either per-annotator 'count' or 'annotators_per_spec'");
    for (int r = 0; r < count; ++r) spec.group.specs.push_back(noise);
    ++index;
  }
  return spec;
}

TrainConfig parse_train(const json& obj, int* validation_size) {
  const std::string where = "config.train";
  check_keys(obj,
             {"iterations", "validation_size", "classifier", "aggregator", "retrain_epochs",
              "retrain_mode", "trusted_upweight", "calibration", "calibrate_aggregator",
              "calibration_bins", "min_class_points", "prior_alpha", "confusion_alpha",
              "colabel_init", "finetune_epochs", "finetune_lr_scale"},
             where);
  TrainConfig cfg;
  cfg.iterations = get_or(obj, "iterations", cfg.iterations, where);
  *validation_size = get_or(obj, "validation_size", *validation_size, where);
  if (obj.contains("classifier"))
    cfg.classifier_opt = parse_optimizer(obj.at("classifier"), cfg.classifier_opt,
                                         &cfg.classifier_hidden, where + ".classifier");
  if (obj.contains("aggregator"))
    cfg.aggregator_opt = parse_optimizer(obj.at("aggregator"), cfg.aggregator_opt,
                                         &cfg.aggregator_hidden, where + ".aggregator");
  cfg.retrain_epochs = get_or(obj, "retrain_epochs", cfg.retrain_epochs, where);
  if (obj.contains("retrain_mode"))
    cfg.retrain_mode = parse_retrain_mode(obj.at("retrain_mode").get<std::string>());
  cfg.trusted_upweight = get_or(obj, "trusted_upweight", cfg.trusted_upweight, where);
  cfg.calibration = get_or(obj, "calibration", cfg.calibration, where);
  cfg.calibrate_aggregator = get_or(obj, "calibrate_aggregator", cfg.calibrate_aggregator, where);
  cfg.calibration_bins = get_or(obj, "calibration_bins", cfg.calibration_bins, where);
  cfg.calibration_min_class_points =
      get_or(obj, "min_class_points", cfg.calibration_min_class_points, where);
  cfg.prior_alpha = get_or(obj, "prior_alpha", cfg.prior_alpha, where);
  cfg.confusion_alpha = get_or(obj, "confusion_alpha", cfg.confusion_alpha, where);
  if (obj.contains("colabel_init"))
    cfg.colabel_init = parse_colabel_init(obj.at("colabel_init").get<std::string>());
  cfg.finetune_epochs = get_or(obj, "finetune_epochs", cfg.finetune_epochs, where);
  cfg.finetune_lr_scale = get_or(obj, "finetune_lr_scale", cfg.finetune_lr_scale, where);
  return cfg;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  const std::string where = "config";
  check_keys(doc,
             {"seed", "out", "variant", "finetune", "classes", "data", "simulate", "train",
              "ablate"},
             where);
  ExperimentConfig cfg;
  cfg.seed = get_or(doc, "seed", cfg.seed, where);
  cfg.out_dir = get_or(doc, "out", cfg.out_dir, where);
  if (doc.contains("variant")) cfg.variant = parse_variant(doc.at("variant").get<std::string>());
  cfg.finetune = get_or(doc, "finetune", cfg.finetune, where);
  cfg.classes_override = get_or(doc, "classes", cfg.classes_override, where);
  if (doc.contains("data")) {
    const auto& d = doc.at("data");
    check_keys(d, {"features", "annotations", "trusted", "truth"}, "config.data");
    DatasetPaths paths;
    paths.features = get_or(d, "features", std::string(), "config.data");
    paths.annotations = get_or(d, "annotations", std::string(), "config.data");
    paths.trusted = get_or(d, "trusted", std::string(), "config.data");
    paths.truth = get_or(d, "truth", std::string(), "config.data");
    if (paths.features.empty() || paths.annotations.empty() || paths.trusted.empty())
      throw ValidationError("config.data: features, annotations and trusted are required");
    cfg.data = std::move(paths);
  }
  if (doc.contains("simulate")) cfg.simulation = parse_simulation(doc.at("simulate"));
  if (cfg.data && cfg.simulation)
    throw ValidationError("config: give either 'data' or 'simulate', not both");
  if (doc.contains("train")) cfg.train = parse_train(doc.at("train"), &cfg.validation_size);
  if (doc.contains("ablate")) {
    const auto& a = doc.at("ablate");
    check_keys(a, {"axis", "trusted_sizes"}, "config.ablate");
    cfg.ablation.axis = get_or(a, "axis", cfg.ablation.axis, "config.ablate");
    cfg.ablation.trusted_sizes =
        get_or(a, "trusted_sizes", cfg.ablation.trusted_sizes, "config.ablate");
  }
  cfg.train.seed = cfg.seed;
  cfg.train.finetune = cfg.finetune;
  return cfg;
}

void apply_overrides(ExperimentConfig* cfg, const FlagOverrides& flags) {
  if (flags.seed) {
    cfg->seed = *flags.seed;
    cfg->train.seed = *flags.seed;
  }
  if (flags.out_dir) cfg->out_dir = *flags.out_dir;
  if (flags.variant) cfg->variant = parse_variant(*flags.variant);
  if (flags.finetune) {
    cfg->finetune = true;
    cfg->train.finetune = true;
  }
  if (flags.iterations) cfg->train.iterations = *flags.iterations;
  for (const std::string& setting : flags.ablate_settings) {
    auto eq = setting.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--ablate expects KEY=VALUE, got '" + setting + "'");
    std::string key = setting.substr(0, eq);
    std::string value = setting.substr(eq + 1);
    if (key == "calibration") {
      if (value != "on" && value != "off")
        throw ValidationError("--ablate calibration must be on or off");
      cfg->train.calibration = value == "on";
    } else if (key == "calibrate_aggregator") {
      if (value != "on" && value != "off")
        throw ValidationError("--ablate calibrate_aggregator must be on or off");
      cfg->train.calibrate_aggregator = value == "on";
    } else if (key == "retraining") {
      cfg->train.retrain_mode = parse_retrain_mode(value);
    } else if (key == "colabel_init") {
      cfg->train.colabel_init = parse_colabel_init(value);
    } else {
      throw ValidationError("--ablate: unknown key '" + key + "'");
    }
  }
}

namespace {

std::string padded_id(char prefix, int index) {
  std::string digits = std::to_string(index);
  std::string out(1, prefix);
  for (std::size_t i = digits.size(); i < 6; ++i) out += '0';
  return out + digits;
}

}  // namespace

SimulatedData simulate_experiment(const SimulationSpec& spec, std::uint64_t seed) {
  if (spec.n_untrusted < 1) throw ValidationError("simulate: n_untrusted must be positive");
  if (spec.n_trusted < 1) throw ValidationError("simulate: n_trusted must be positive");

  RngStream root(seed);
  RngStream blob_rng = root.fork("blobs");
  BlobSpec blobs{spec.classes, spec.feature_dim, spec.center_separation, spec.cluster_std};
  Matrix X;
  std::vector<int> y;
  make_blobs(spec.n_untrusted + spec.n_trusted, blobs, blob_rng, &X, &y);

  SimulatedData data;
  data.untrusted.features = Matrix(spec.n_untrusted, spec.feature_dim);
  std::vector<int> untrusted_truth(static_cast<std::size_t>(spec.n_untrusted));
  for (int i = 0; i < spec.n_untrusted; ++i) {
    auto src = X.row(i);
    std::copy(src.begin(), src.end(), data.untrusted.features.row(i).begin());
    untrusted_truth[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)];
    data.untrusted_ids.push_back(padded_id('u', i));
  }
  for (int i = 0; i < spec.n_trusted; ++i) {
    LabeledExample ex;
    ex.id = padded_id('t', i);
    auto src = X.row(spec.n_untrusted + i);
    ex.features.assign(src.begin(), src.end());
    ex.label = y[static_cast<std::size_t>(spec.n_untrusted + i)];
    data.trusted.examples.push_back(std::move(ex));
    data.trusted_ids.push_back(padded_id('t', i));
  }

  RngStream ann_rng = root.fork("annotations");
  data.untrusted.annotations = generate_group(untrusted_truth, spec.classes, spec.group, ann_rng);
  data.untrusted.ids = data.untrusted_ids;
  data.untrusted.hidden_truth = std::move(untrusted_truth);

  if (spec.trusted_annotations) {
    AnnotatorGroupSpec complete_group = spec.group;
    complete_group.labels_per_instance = 0;  // trusted annotations are complete
    RngStream trusted_ann_rng = root.fork("trusted-annotations");
    data.trusted.annotations = generate_group(trusted_labels(data.trusted), spec.classes,
                                              complete_group, trusted_ann_rng);
  }
  return data;
}

namespace {

int infer_classes(const ExperimentConfig& cfg, const UntrustedDataset& untrusted,
                  const TrustedDataset& trusted) {
  if (cfg.classes_override > 0) return cfg.classes_override;
  if (cfg.simulation) return cfg.simulation->classes;
  int max_label = -1;
  for (const auto& ex : trusted.examples) max_label = std::max(max_label, ex.label);
  for (int v : untrusted.annotations.cells) max_label = std::max(max_label, v);
  if (trusted.annotations)
    for (int v : trusted.annotations->cells) max_label = std::max(max_label, v);
  if (untrusted.hidden_truth)
    for (int v : *untrusted.hidden_truth) max_label = std::max(max_label, v);
  if (max_label < 1) throw ValidationError("cannot infer class count from data");
  return max_label + 1;
}

struct PreparedRun {
  UntrustedDataset train_untrusted;
  std::vector<std::string> train_ids;
  TrustedDataset trusted;
  Matrix val_X;
  std::vector<int> val_y;
  bool has_val = false;
  int classes = 0;
};

// Loads or simulates the dataset, validates it, and carves out the held-out
// validation rows (seed-derived, sorted index order).
PreparedRun prepare_run(const ExperimentConfig& cfg, bool write_simulated_dataset) {
  UntrustedDataset untrusted;
  TrustedDataset trusted;
  std::vector<std::string> ids;
  if (cfg.simulation) {
    SimulatedData sim = simulate_experiment(*cfg.simulation, cfg.seed);
    untrusted = std::move(sim.untrusted);
    trusted = std::move(sim.trusted);
    ids = std::move(sim.untrusted_ids);
    if (write_simulated_dataset) {
      namespace fs = std::filesystem;
      fs::path dir = fs::path(cfg.out_dir) / "dataset";
      fs::create_directories(dir);
      Matrix all_X(untrusted.size() + trusted.size(), untrusted.feature_dim());
      std::vector<std::string> all_ids = ids;
      for (int i = 0; i < untrusted.size(); ++i) {
        auto src = untrusted.features.row(i);
        std::copy(src.begin(), src.end(), all_X.row(i).begin());
      }
      for (int i = 0; i < trusted.size(); ++i) {
        const auto& ex = trusted.examples[static_cast<std::size_t>(i)];
        std::copy(ex.features.begin(), ex.features.end(),
                  all_X.row(untrusted.size() + i).begin());
        all_ids.push_back(ex.id);
      }
      write_features_csv((dir / "features.csv").string(), all_ids, all_X);
      write_annotations_csv((dir / "annotations.csv").string(), ids, untrusted.annotations);
      write_trusted_csv((dir / "trusted.csv").string(), sim.trusted_ids,
                        trusted_labels(trusted),
                        trusted.annotations ? &*trusted.annotations : nullptr);
      write_truth_csv((dir / "truth.csv").string(), ids, *untrusted.hidden_truth);
    }
  } else if (cfg.data) {
    LoadedDataset loaded = load_dataset(*cfg.data);
    untrusted = std::move(loaded.untrusted);
    trusted = std::move(loaded.trusted);
    ids = untrusted.ids;
  } else {
    throw ValidationError("config needs a 'data' or 'simulate' block");
  }
  log_debug("prepared " + std::to_string(untrusted.size()) + " untrusted and " +
            std::to_string(trusted.size()) + " trusted instances");

  PreparedRun run;
  run.classes = infer_classes(cfg, untrusted, trusted);
  auto violations = validate_dataset(untrusted, trusted, run.classes);
  if (!violations.empty()) {
    std::string msg = "dataset validation failed:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }

  const int v = cfg.validation_size;
  if (v == 0) {
    run.train_untrusted = std::move(untrusted);
    run.train_ids = std::move(ids);
    run.trusted = std::move(trusted);
    return run;
  }
  if (v < 0 || v >= untrusted.size())
    throw ValidationError("validation_size must lie in [0, untrusted size)");
  if (!untrusted.hidden_truth)
    throw ValidationError("validation split needs truth labels (simulation data only)");

  // Partial Fisher-Yates pick of v indices, then sorted so both splits keep
  // the original row order.
  RngStream split_rng = RngStream(cfg.seed).fork("valsplit");
  const int n = untrusted.size();
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int t = 0; t < v; ++t) {
    int pick = t + split_rng.uniform_int(n - t);
    std::swap(idx[static_cast<std::size_t>(t)], idx[static_cast<std::size_t>(pick)]);
  }
  std::vector<bool> in_val(static_cast<std::size_t>(n), false);
  for (int t = 0; t < v; ++t) in_val[static_cast<std::size_t>(idx[static_cast<std::size_t>(t)])] = true;

  run.val_X = Matrix(v, untrusted.feature_dim());
  run.val_y.resize(static_cast<std::size_t>(v));
  run.train_untrusted.features = Matrix(n - v, untrusted.feature_dim());
  run.train_untrusted.annotations = AnnotationMatrix(n - v, untrusted.annotations.m);
  std::vector<int> train_truth;
  train_truth.reserve(static_cast<std::size_t>(n - v));
  int vi = 0;
  int ti = 0;
  for (int i = 0; i < n; ++i) {
    auto src = untrusted.features.row(i);
    if (in_val[static_cast<std::size_t>(i)]) {
      std::copy(src.begin(), src.end(), run.val_X.row(vi).begin());
      run.val_y[static_cast<std::size_t>(vi)] = (*untrusted.hidden_truth)[static_cast<std::size_t>(i)];
      ++vi;
    } else {
      std::copy(src.begin(), src.end(), run.train_untrusted.features.row(ti).begin());
      for (int j = 0; j < untrusted.annotations.m; ++j)
        run.train_untrusted.annotations.at(ti, j) = untrusted.annotations.at(i, j);
      train_truth.push_back((*untrusted.hidden_truth)[static_cast<std::size_t>(i)]);
      run.train_ids.push_back(ids[static_cast<std::size_t>(i)]);
      ++ti;
    }
  }
  run.train_untrusted.ids = run.train_ids;
  run.train_untrusted.hidden_truth = std::move(train_truth);
  run.trusted = std::move(trusted);
  run.has_val = true;
  return run;
}

TrainResult dispatch_run(const PreparedRun& run, const ExperimentConfig& cfg) {
  const Matrix* val_X = run.has_val ? &run.val_X : nullptr;
  const std::vector<int>* val_y = run.has_val ? &run.val_y : nullptr;
  switch (cfg.variant) {
    case Variant::kTcl:
      return run_tcl(run.train_untrusted, run.trusted, run.classes, cfg.train, val_X, val_y);
    case Variant::kTcls:
      return run_tcls(run.train_untrusted, run.trusted, run.classes, cfg.train, val_X, val_y);
    case Variant::kDlMv:
      return run_baseline_mv(run.train_untrusted, run.trusted, run.classes, cfg.train,
                             cfg.finetune, val_X, val_y);
  }
  throw std::runtime_error("unreachable variant");
}

}  // namespace

int cmd_simulate(const ExperimentConfig& cfg) {
  if (!cfg.simulation) throw ValidationError("simulate needs a 'simulate' block in the config");
  const SimulationSpec& spec = *cfg.simulation;
  log_debug("simulating with seed " + std::to_string(cfg.seed));
  SimulatedData data = simulate_experiment(spec, cfg.seed);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  fs::path dir(cfg.out_dir);

  Matrix all_X(data.untrusted.size() + data.trusted.size(), spec.feature_dim);
  std::vector<std::string> all_ids = data.untrusted_ids;
  for (int i = 0; i < data.untrusted.size(); ++i) {
    auto src = data.untrusted.features.row(i);
    std::copy(src.begin(), src.end(), all_X.row(i).begin());
  }
  for (int i = 0; i < data.trusted.size(); ++i) {
    const auto& ex = data.trusted.examples[static_cast<std::size_t>(i)];
    std::copy(ex.features.begin(), ex.features.end(),
              all_X.row(data.untrusted.size() + i).begin());
    all_ids.push_back(ex.id);
  }
  write_features_csv((dir / "features.csv").string(), all_ids, all_X);
  write_annotations_csv((dir / "annotations.csv").string(), data.untrusted_ids,
                        data.untrusted.annotations);
  write_trusted_csv((dir / "trusted.csv").string(), data.trusted_ids,
                    trusted_labels(data.trusted),
                    data.trusted.annotations ? &*data.trusted.annotations : nullptr);
  write_truth_csv((dir / "truth.csv").string(), data.untrusted_ids,
                  *data.untrusted.hidden_truth);

  // Per-annotator empirical accuracy over observed cells.
  const auto& ann = data.untrusted.annotations;
  const auto& truth = *data.untrusted.hidden_truth;
  std::cout << "wrote dataset to " << cfg.out_dir << " (" << data.untrusted.size()
            << " untrusted, " << data.trusted.size() << " trusted, " << ann.m << " annotators)\n";
  for (int j = 0; j < ann.m; ++j) {
    int observed = 0;
    int correct = 0;
    for (int i = 0; i < ann.n; ++i) {
      int v = ann.at(i, j);
      if (v == kMissing) continue;
      ++observed;
      if (v == truth[static_cast<std::size_t>(i)]) ++correct;
    }
    double acc = observed > 0 ? static_cast<double>(correct) / observed : 0.0;
    std::cout << "annotator " << j << ": " << observed << " labels, accuracy "
              << format_double(acc) << "\n";
  }
  return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  PreparedRun run = prepare_run(cfg, /*write_simulated_dataset=*/true);
  TrainResult result = dispatch_run(run, cfg);

  fs::path dir(cfg.out_dir);
  write_metrics_csv(result.history, (dir / "metrics.csv").string());
  write_colabels_csv((dir / "colabels.csv").string(), run.train_ids, result.colabels);
  save_checkpoint(result.classifier, (dir / "checkpoint.json").string());
  if (result.confusions)
    save_confusions_json(*result.confusions, (dir / "confusions.json").string());
  if (result.aggregator)
    save_checkpoint(*result.aggregator, (dir / "aggregator_checkpoint.json").string());
  save_reliability_csv(result.final_reliability, (dir / "reliability_bins.csv").string());

  std::cout << "variant: " << variant_name(cfg.variant) << "\n";
  std::cout << "final colabel accuracy: " << format_double(result.final_colabel_acc) << "\n";
  std::cout << "final validation accuracy: " << format_double(result.final_val_acc) << "\n";
  std::cout << "final ece pre/post: " << format_double(result.final_ece_pre) << "/"
            << format_double(result.final_ece_post) << "\n";
  std::cout << "artifacts written to " << cfg.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& features_path,
                 const std::string& labels_path, const std::string& out_dir, int bins) {
  Mlp params = load_checkpoint(checkpoint_path);
  std::vector<std::string> feature_ids;
  Matrix X;
  read_features_csv(features_path, &feature_ids, &X);
  std::vector<std::string> label_ids;
  std::vector<int> labels;
  read_labels_csv(labels_path, &label_ids, &labels);
  // The labels file defines the evaluation set; pick its feature rows by id
  // (the features file may hold additional instances).
  {
    std::unordered_map<std::string, int> feature_row;
    feature_row.reserve(feature_ids.size());
    for (std::size_t i = 0; i < feature_ids.size(); ++i)
      if (!feature_row.emplace(feature_ids[i], static_cast<int>(i)).second)
        throw ValidationError(features_path + ": duplicate id '" + feature_ids[i] + "'");
    Matrix selected(static_cast<int>(label_ids.size()), X.cols);
    for (std::size_t i = 0; i < label_ids.size(); ++i) {
      auto it = feature_row.find(label_ids[i]);
      if (it == feature_row.end())
        throw ValidationError(features_path + ": no features for id '" + label_ids[i] + "'");
      auto src = X.row(it->second);
      std::copy(src.begin(), src.end(), selected.row(static_cast<int>(i)).begin());
    }
    X = std::move(selected);
  }
  if (X.cols != params.input_dim())
    throw ValidationError("shape mismatch: checkpoint expects " +
                          std::to_string(params.input_dim()) + " features, data has " +
                          std::to_string(X.cols));
  const int C = params.output_dim();
  for (int y : labels)
    if (y < 0 || y >= C) throw ValidationError(labels_path + ": label out of range");

  Matrix probs = predict_proba(params, X);
  std::vector<int> pred(static_cast<std::size_t>(probs.rows));
  for (int i = 0; i < probs.rows; ++i) {
    auto r = probs.row(i);
    pred[static_cast<std::size_t>(i)] =
        static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  int hits = 0;
  std::vector<int> class_total(static_cast<std::size_t>(C), 0);
  std::vector<int> class_hits(static_cast<std::size_t>(C), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++class_total[static_cast<std::size_t>(labels[i])];
    if (pred[i] == labels[i]) {
      ++hits;
      ++class_hits[static_cast<std::size_t>(labels[i])];
    }
  }
  const double acc = labels.empty() ? 0.0 : static_cast<double>(hits) / labels.size();
  ReliabilityReport report = reliability_report(probs, labels, bins);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  save_reliability_csv(report, (dir / "reliability_bins.csv").string());
  {
    std::ofstream out((dir / "evaluation.csv").string());
    if (!out) throw std::runtime_error("cannot write evaluation.csv");
    out << "metric,value\n";
    out << "accuracy," << format_double(acc) << '\n';
    out << "ece," << format_double(report.ece) << '\n';
    for (int k = 0; k < C; ++k) {
      double ca = class_total[static_cast<std::size_t>(k)] > 0
                      ? static_cast<double>(class_hits[static_cast<std::size_t>(k)]) /
                            class_total[static_cast<std::size_t>(k)]
                      : std::nan("");
      out << "accuracy_class_" << k << ',' << format_double(ca) << '\n';
    }
    if (!out.flush()) throw std::runtime_error("write failed: evaluation.csv");
  }
  std::cout << "accuracy: " << format_double(acc) << "\n";
  std::cout << "ece: " << format_double(report.ece) << "\n";
  for (int k = 0; k < C; ++k) {
    double ca = class_total[static_cast<std::size_t>(k)] > 0
                    ? static_cast<double>(class_hits[static_cast<std::size_t>(k)]) /
                          class_total[static_cast<std::size_t>(k)]
                    : std::nan("");
    std::cout << "accuracy class " << k << ": " << format_double(ca) << "\n";
  }
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  struct Cell {
    std::string name;
    ExperimentConfig config;
  };
  std::vector<Cell> cells;
  const std::string& axis = cfg.ablation.axis;
  if (axis == "calibration") {
    for (bool on : {true, false}) {
      Cell cell{std::string("calibration=") + (on ? "on" : "off"), cfg};
      cell.config.train.calibration = on;
      cells.push_back(std::move(cell));
    }
  } else if (axis == "retraining") {
    for (const char* mode : {"full", "noisy-only", "none"}) {
      Cell cell{std::string("retraining=") + mode, cfg};
      cell.config.train.retrain_mode = parse_retrain_mode(mode);
      cells.push_back(std::move(cell));
    }
  } else if (axis == "colabel_init") {
    for (const char* init : {"mv", "trusted-nb"}) {
      Cell cell{std::string("colabel_init=") + init, cfg};
      cell.config.train.colabel_init = parse_colabel_init(init);
      cells.push_back(std::move(cell));
    }
  } else if (axis == "trusted_size") {
    if (!cfg.simulation)
      throw ValidationError("trusted_size sweep needs a 'simulate' block");
    for (int size : cfg.ablation.trusted_sizes) {
      Cell cell{"trusted_size=" + std::to_string(size), cfg};
      cell.config.simulation->n_trusted = size;
      cells.push_back(std::move(cell));
    }
  } else {
    throw ValidationError("unknown ablation axis '" + axis + "'");
  }

  fs::path report_path = fs::path(cfg.out_dir) / "ablation_report.csv";
  std::ofstream out(report_path.string());
  if (!out) throw std::runtime_error("cannot write " + report_path.string());
  out << "cell,colabel_acc,val_acc,ece_pre,ece_post\n";
  for (const Cell& cell : cells) {
    PreparedRun run = prepare_run(cell.config, /*write_simulated_dataset=*/false);
    TrainResult result = dispatch_run(run, cell.config);
    out << cell.name << ',' << format_double(result.final_colabel_acc) << ','
        << format_double(result.final_val_acc) << ',' << format_double(result.final_ece_pre)
        << ',' << format_double(result.final_ece_post) << '\n';
    std::cout << cell.name << ": colabel_acc=" << format_double(result.final_colabel_acc)
              << " val_acc=" << format_double(result.final_val_acc) << "\n";
  }
  if (!out.flush()) throw std::runtime_error("write failed: " + report_path.string());
  std::cout << "report written to " << report_path.string() << "\n";
  return 0;
}

}  // namespace colabel
