#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "colabel/rng.hpp"
#include "colabel/types.hpp"

namespace colabel {

/// One affine layer; w is out x in, row-major.
struct MlpLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;
};

/// Feed-forward net: rectified-linear hidden layers, softmax output.
/// Serves as both ClassifierParams (features -> classes) and
/// NeuralAggregatorParams (one-hot annotation encoding -> classes).
struct Mlp {
  std::vector<MlpLayer> layers;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out; }
};

using ClassifierParams = Mlp;

struct OptimizerConfig {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int batch_size = 128;
  int epochs = 1;
  /// (epoch, multiplier) pairs: once the cumulative epoch index reaches
  /// `epoch`, the step size is multiplied by `multiplier` (multipliers
  /// compose across entries).
  std::vector<std::pair<int, double>> schedule;
};

/// -sum_k target_k * log(max(pred_k, 1e-12)).
double soft_cross_entropy(std::span<const double> pred, std::span<const double> target);

/// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
Mlp init_classifier(int input_dim, const std::vector<int>& hidden_dims, int classes,
                    RngStream& rng);

/// Softmax probabilities for a feature batch; rows sum to 1.
Matrix predict_proba(const Mlp& params, const Matrix& features);

/// Mini-batch SGD with momentum and weight decay on the soft cross-entropy.
/// Rows are reshuffled from `rng` each epoch. epoch_offset shifts the
/// schedule's epoch counter so successive calls can share one decay timeline.
/// Returns the per-epoch mean loss. Throws on non-finite loss.
std::vector<double> train_epochs(Mlp& params, const Matrix& features, const Matrix& targets,
                                 const OptimizerConfig& opt, RngStream& rng, int epoch_offset = 0);

/// train_epochs on the trusted set with one-hot targets.
std::vector<double> fine_tune(Mlp& params, const TrustedDataset& trusted, int classes,
                              const OptimizerConfig& opt, RngStream& rng);

/// Mean loss and analytic parameter gradients over a batch (test support and
/// the backbone of train_epochs). Gradient layout mirrors Mlp layer order:
/// per layer, all of w then all of b.
double loss_and_gradients(const Mlp& params, const Matrix& features, const Matrix& targets,
                          std::vector<std::vector<double>>* grad_w,
                          std::vector<std::vector<double>>* grad_b);

/// Fraction of rows whose argmax prediction equals the label.
double accuracy(const Mlp& params, const Matrix& features, const std::vector<int>& labels);

/// JSON checkpoint {"layer_0": {"w": [...], "b": [...]}, ...}; layer shapes
/// are recovered from the array lengths.
void save_checkpoint(const Mlp& params, const std::string& path);
Mlp load_checkpoint(const std::string& path);

}  // namespace colabel
