#include "colabel/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace colabel {

namespace {

constexpr double kLogFloor = 1e-12;

void softmax_inplace(std::span<double> z) {
  double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Forward pass for a batch of rows; returns per-layer activations where
// acts[0] is the input and acts.back() holds softmax probabilities.
std::vector<Matrix> forward(const Mlp& params, const Matrix& input) {
  std::vector<Matrix> acts;
  acts.reserve(params.layers.size() + 1);
  acts.push_back(input);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const MlpLayer& layer = params.layers[l];
    const Matrix& prev = acts.back();
    Matrix next(prev.rows, layer.out);
    for (int i = 0; i < prev.rows; ++i) {
      auto in_row = prev.row(i);
      auto out_row = next.row(i);
      for (int o = 0; o < layer.out; ++o) {
        const double* w = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
        double z = layer.b[static_cast<std::size_t>(o)];
        for (int c = 0; c < layer.in; ++c) z += w[c] * in_row[static_cast<std::size_t>(c)];
        out_row[static_cast<std::size_t>(o)] = z;
      }
      if (l + 1 == params.layers.size()) {
        softmax_inplace(out_row);
      } else {
        for (double& v : out_row) v = v > 0.0 ? v : 0.0;
      }
    }
    acts.push_back(std::move(next));
  }
  return acts;
}

void check_input_dim(const Mlp& params, const Matrix& features, const char* who) {
  if (params.layers.empty()) throw ValidationError(std::string(who) + ": uninitialized network");
  if (features.cols != params.input_dim())
    throw ValidationError(std::string(who) + ": feature dimension " +
                          std::to_string(features.cols) + " does not match network input " +
                          std::to_string(params.input_dim()));
}

}  // namespace

double soft_cross_entropy(std::span<const double> pred, std::span<const double> target) {
  double loss = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k)
    loss -= target[k] * std::log(std::max(pred[k], kLogFloor));
  return loss;
}

Mlp init_classifier(int input_dim, const std::vector<int>& hidden_dims, int classes,
                    RngStream& rng) {
  if (input_dim < 1 || classes < 2) throw ValidationError("init_classifier: bad dimensions");
  for (int h : hidden_dims)
    if (h < 1) throw ValidationError("init_classifier: bad hidden dimension");
  Mlp params;
  int prev = input_dim;
  std::vector<int> dims(hidden_dims);
  dims.push_back(classes);
  for (int out : dims) {
    MlpLayer layer;
    layer.in = prev;
    layer.out = out;
    layer.w.resize(static_cast<std::size_t>(out) * prev);
    layer.b.assign(static_cast<std::size_t>(out), 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(prev));
    for (double& w : layer.w) w = rng.uniform(-scale, scale);
    params.layers.push_back(std::move(layer));
    prev = out;
  }
  return params;
}

Matrix predict_proba(const Mlp& params, const Matrix& features) {
  check_input_dim(params, features, "predict_proba");
  return forward(params, features).back();
}

double loss_and_gradients(const Mlp& params, const Matrix& features, const Matrix& targets,
                          std::vector<std::vector<double>>* grad_w,
                          std::vector<std::vector<double>>* grad_b) {
  check_input_dim(params, features, "loss_and_gradients");
  if (targets.rows != features.rows || targets.cols != params.output_dim())
    throw ValidationError("loss_and_gradients: target shape mismatch");
  const int B = features.rows;
  const std::size_t L = params.layers.size();
  grad_w->assign(L, {});
  grad_b->assign(L, {});
  for (std::size_t l = 0; l < L; ++l) {
    (*grad_w)[l].assign(params.layers[l].w.size(), 0.0);
    (*grad_b)[l].assign(params.layers[l].b.size(), 0.0);
  }

  std::vector<Matrix> acts = forward(params, features);
  double loss = 0.0;
  for (int i = 0; i < B; ++i) loss += soft_cross_entropy(acts.back().row(i), targets.row(i));
  loss /= B;

  // delta starts as d(mean loss)/d(logits) = (p - t)/B and is propagated
  // backwards through each layer.
  Matrix delta(B, params.output_dim());
  for (int i = 0; i < B; ++i)
    for (int k = 0; k < params.output_dim(); ++k)
      delta.at(i, k) = (acts.back().at(i, k) - targets.at(i, k)) / B;

  for (std::size_t l = L; l-- > 0;) {
    const MlpLayer& layer = params.layers[l];
    const Matrix& input = acts[l];
    auto& gw = (*grad_w)[l];
    auto& gb = (*grad_b)[l];
    for (int i = 0; i < B; ++i) {
      auto d_row = delta.row(i);
      auto in_row = input.row(i);
      for (int o = 0; o < layer.out; ++o) {
        const double d = d_row[static_cast<std::size_t>(o)];
        if (d == 0.0) continue;
        double* g = gw.data() + static_cast<std::size_t>(o) * layer.in;
        for (int c = 0; c < layer.in; ++c) g[c] += d * in_row[static_cast<std::size_t>(c)];
        gb[static_cast<std::size_t>(o)] += d;
      }
    }
    if (l == 0) break;
    Matrix prev_delta(B, layer.in);
    for (int i = 0; i < B; ++i) {
      auto d_row = delta.row(i);
      auto in_row = input.row(i);
      auto p_row = prev_delta.row(i);
      for (int c = 0; c < layer.in; ++c) {
        // Hidden activations are rectified; gradient passes only where the
        // unit was active.
        if (in_row[static_cast<std::size_t>(c)] <= 0.0) {
          p_row[static_cast<std::size_t>(c)] = 0.0;
          continue;
        }
        double acc = 0.0;
        for (int o = 0; o < layer.out; ++o)
          acc += d_row[static_cast<std::size_t>(o)] * layer.w[static_cast<std::size_t>(o) * layer.in + c];
        p_row[static_cast<std::size_t>(c)] = acc;
      }
    }
    delta = std::move(prev_delta);
  }
  return loss;
}

namespace {

double lr_at_epoch(const OptimizerConfig& opt, int epoch) {
  double lr = opt.lr;
  for (const auto& [at, mult] : opt.schedule)
    if (epoch >= at) lr *= mult;
  return lr;
}

}  // namespace

std::vector<double> train_epochs(Mlp& params, const Matrix& features, const Matrix& targets,
                                 const OptimizerConfig& opt, RngStream& rng, int epoch_offset) {
  check_input_dim(params, features, "train_epochs");
  if (targets.rows != features.rows || targets.cols != params.output_dim())
    throw ValidationError("train_epochs: target shape mismatch");
  if (opt.batch_size < 1) throw ValidationError("train_epochs: batch_size must be positive");

  const int n = features.rows;
  const std::size_t L = params.layers.size();
  std::vector<std::vector<double>> vel_w(L), vel_b(L);
  for (std::size_t l = 0; l < L; ++l) {
    vel_w[l].assign(params.layers[l].w.size(), 0.0);
    vel_b[l].assign(params.layers[l].b.size(), 0.0);
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<double> epoch_losses;
  std::vector<std::vector<double>> gw, gb;
  for (int e = 0; e < opt.epochs; ++e) {
    const double lr = lr_at_epoch(opt, epoch_offset + e);
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += opt.batch_size) {
      const int bsz = std::min(opt.batch_size, n - start);
      Matrix bx(bsz, features.cols);
      Matrix bt(bsz, targets.cols);
      for (int i = 0; i < bsz; ++i) {
        int src = order[static_cast<std::size_t>(start + i)];
        auto fr = features.row(src);
        std::copy(fr.begin(), fr.end(), bx.row(i).begin());
        auto tr = targets.row(src);
        std::copy(tr.begin(), tr.end(), bt.row(i).begin());
      }
      double batch_loss = loss_and_gradients(params, bx, bt, &gw, &gb);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train_epochs: non-finite loss at epoch " +
                                 std::to_string(epoch_offset + e));
      loss_sum += batch_loss * bsz;
      for (std::size_t l = 0; l < L; ++l) {
        MlpLayer& layer = params.layers[l];
        // Weight decay applies to weights only, never biases.
        for (std::size_t p = 0; p < layer.w.size(); ++p) {
          double v = opt.momentum * vel_w[l][p] - lr * (gw[l][p] + opt.weight_decay * layer.w[p]);
          vel_w[l][p] = v;
          layer.w[p] += v;
        }
        for (std::size_t p = 0; p < layer.b.size(); ++p) {
          double v = opt.momentum * vel_b[l][p] - lr * gb[l][p];
          vel_b[l][p] = v;
          layer.b[p] += v;
        }
      }
    }
    epoch_losses.push_back(loss_sum / n);
  }
  return epoch_losses;
}

std::vector<double> fine_tune(Mlp& params, const TrustedDataset& trusted, int classes,
                              const OptimizerConfig& opt, RngStream& rng) {
  if (trusted.size() == 0) throw ValidationError("fine_tune: trusted set is empty");
  Matrix X = trusted_features(trusted);
  std::vector<int> y = trusted_labels(trusted);
  SoftLabelMatrix targets = SoftLabelMatrix::one_hot(y, classes);
  return train_epochs(params, X, targets.probs, opt, rng);
}

double accuracy(const Mlp& params, const Matrix& features, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != features.rows)
    throw ValidationError("accuracy: label count mismatch");
  if (features.rows == 0) return 0.0;
  Matrix probs = predict_proba(params, features);
  int hits = 0;
  for (int i = 0; i < probs.rows; ++i) {
    auto r = probs.row(i);
    int pred = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    if (pred == labels[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / features.rows;
}

void save_checkpoint(const Mlp& params, const std::string& path) {
  nlohmann::json doc = nlohmann::json::object();
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    nlohmann::json entry;
    entry["w"] = params.layers[l].w;
    entry["b"] = params.layers[l].b;
    doc["layer_" + std::to_string(l)] = std::move(entry);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("checkpoint " + path + ": " + e.what());
  }
  Mlp params;
  for (std::size_t l = 0;; ++l) {
    auto key = "layer_" + std::to_string(l);
    if (!doc.contains(key)) break;
    const auto& entry = doc.at(key);
    MlpLayer layer;
    layer.w = entry.at("w").get<std::vector<double>>();
    layer.b = entry.at("b").get<std::vector<double>>();
    if (layer.b.empty() || layer.w.size() % layer.b.size() != 0)
      throw ValidationError("checkpoint " + path + ": inconsistent shapes in " + key);
    layer.out = static_cast<int>(layer.b.size());
    layer.in = static_cast<int>(layer.w.size() / layer.b.size());
    if (!params.layers.empty() && params.layers.back().out != layer.in)
      throw ValidationError("checkpoint " + path + ": layer dimensions do not chain at " + key);
    params.layers.push_back(std::move(layer));
  }
  if (params.layers.empty()) throw ValidationError("checkpoint " + path + ": no layers");
  return params;
}

}  // namespace colabel
