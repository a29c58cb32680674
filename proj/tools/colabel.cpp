#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "colabel/experiment.hpp"

namespace {

colabel::ExperimentConfig resolve_config(const std::string& config_path,
                                         const colabel::FlagOverrides& flags) {
  colabel::ExperimentConfig cfg = colabel::load_config(config_path);
  colabel::apply_overrides(&cfg, flags);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-label training toolkit: learn a classifier from noisy annotators"};
  app.require_subcommand(1);

  std::string config_path;
  colabel::FlagOverrides flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "RNG seed (overrides the config)");
    sub->add_option("--out", flags.out_dir, "output directory (overrides the config)");
  };
  auto add_train_flags = [&](CLI::App* sub) {
    sub->add_option("--variant", flags.variant, "tcl | tcls | dl-mv")
        ->check(CLI::IsMember({"tcl", "tcls", "dl-mv"}));
    sub->add_flag("--finetune", flags.finetune, "fine-tune on the trusted set after training");
    sub->add_option("--iterations", flags.iterations, "alternate-optimization rounds");
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic annotated dataset");
  add_common(sim);

  CLI::App* train = app.add_subcommand("train", "run co-label training");
  add_common(train);
  add_train_flags(train);
  train->add_option("--ablate", flags.ablate_settings,
                    "override one training setting, KEY=VALUE (repeatable)");

  CLI::App* eval = app.add_subcommand("evaluate", "score a checkpoint on labeled data");
  std::string checkpoint_path;
  std::string features_path;
  std::string labels_path;
  std::string eval_out = "out";
  int eval_bins = 15;
  eval->add_option("--checkpoint", checkpoint_path, "classifier checkpoint (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--features", features_path, "features CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--labels", labels_path, "id,label CSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "output directory");
  eval->add_option("--bins", eval_bins, "reliability histogram bins");

  CLI::App* ablate = app.add_subcommand("ablate", "sweep one training setting");
  add_common(ablate);
  add_train_flags(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // bad flags are a validation failure
  }

  try {
    if (app.got_subcommand(sim)) return colabel::cmd_simulate(resolve_config(config_path, flags));
    if (app.got_subcommand(train)) return colabel::cmd_train(resolve_config(config_path, flags));
    if (app.got_subcommand(eval))
      return colabel::cmd_evaluate(checkpoint_path, features_path, labels_path, eval_out,
                                   eval_bins);
    if (app.got_subcommand(ablate))
      return colabel::cmd_ablate(resolve_config(config_path, flags));
  } catch (const colabel::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
