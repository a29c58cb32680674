#pragma once

#include <optional>
#include <string>
#include <vector>

#include "colabel/csv.hpp"
#include "colabel/noise_sim.hpp"
#include "colabel/trainer.hpp"

namespace colabel {

/// Synthetic-dataset block of the experiment config.
struct SimulationSpec {
  int classes = 3;
  int feature_dim = 2;
  int n_untrusted = 4000;  // includes rows later held out for validation
  int n_trusted = 150;
  double center_separation = 2.5;
  double cluster_std = 1.0;
  AnnotatorGroupSpec group;
  bool trusted_annotations = false;  // complete annotations on the trusted set
};

struct AblationSpec {
  std::string axis = "calibration";  // calibration | retraining | colabel_init | trusted_size
  std::vector<int> trusted_sizes{20, 50, 100, 150, 300};
};

/// Experiment description: exactly one of `data` (file paths) or `simulation`
/// must be present for data-bearing commands.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  Variant variant = Variant::kTcl;
  bool finetune = false;
  int classes_override = 0;  // 0 = infer from data / simulation block
  int validation_size = 0;   // untrusted rows held out for history metrics
  std::optional<DatasetPaths> data;
  std::optional<SimulationSpec> simulation;
  TrainConfig train;
  AblationSpec ablation;
};

/// Parses the JSON config file; unknown keys are rejected so typos fail loud.
ExperimentConfig load_config(const std::string& path);

/// Flag values that override the config file.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> variant;
  bool finetune = false;
  std::optional<int> iterations;
  std::vector<std::string> ablate_settings;  // KEY=VALUE, e.g. calibration=off
};

void apply_overrides(ExperimentConfig* cfg, const FlagOverrides& flags);

struct SimulatedData {
  std::vector<std::string> untrusted_ids;
  std::vector<std::string> trusted_ids;
  UntrustedDataset untrusted;
  TrustedDataset trusted;
};

/// Blob features plus noisy annotations per the simulation block. The first
/// n_untrusted generated instances become the untrusted set, the rest the
/// trusted set; trusted annotations (when enabled) are always complete.
SimulatedData simulate_experiment(const SimulationSpec& spec, std::uint64_t seed);

int cmd_simulate(const ExperimentConfig& cfg);
int cmd_train(const ExperimentConfig& cfg);
int cmd_evaluate(const std::string& checkpoint_path, const std::string& features_path,
                 const std::string& labels_path, const std::string& out_dir, int bins);
int cmd_ablate(const ExperimentConfig& cfg);

}  // namespace colabel
