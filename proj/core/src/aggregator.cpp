#include "colabel/aggregator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "colabel/log.hpp"
#include "json.hpp"

namespace colabel {

namespace {

constexpr double kLogFloor = 1e-12;

double floored_log(double p) { return std::log(std::max(p, kLogFloor)); }

}  // namespace

SoftLabelMatrix majority_vote(const AnnotationMatrix& annotations, int classes) {
  SoftLabelMatrix out(annotations.n, classes);
  std::vector<int> counts(static_cast<std::size_t>(classes));
  for (int i = 0; i < annotations.n; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    int observed = 0;
    for (int v : annotations.row(i)) {
      if (v == kMissing) continue;
      ++counts[static_cast<std::size_t>(v)];
      ++observed;
    }
    if (observed == 0)
      throw ValidationError("majority_vote: all-missing row at index " + std::to_string(i));
    int best = *std::max_element(counts.begin(), counts.end());
    int ties = 0;
    for (int c : counts)
      if (c == best) ++ties;
    for (int k = 0; k < classes; ++k)
      if (counts[static_cast<std::size_t>(k)] == best) out.probs.at(i, k) = 1.0 / ties;
  }
  return out;
}

std::vector<int> hard_majority_vote(const AnnotationMatrix& annotations, int classes) {
  SoftLabelMatrix soft = majority_vote(annotations, classes);
  std::vector<int> labels(static_cast<std::size_t>(annotations.n));
  for (int i = 0; i < annotations.n; ++i) {
    auto r = soft.row(i);
    // argmax picks the first maximal entry, i.e. the lowest tied class.
    labels[static_cast<std::size_t>(i)] =
        static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return labels;
}

std::vector<double> nb_posterior(std::span<const int> row, const ConfusionMatrixSet& confusions,
                                 const ClassPrior& prior) {
  const int C = prior.classes();
  if (confusions.annotators() != static_cast<int>(row.size()))
    throw ValidationError("nb_posterior: row length does not match confusion count");
  std::vector<double> log_score(static_cast<std::size_t>(C));
  for (int k = 0; k < C; ++k) log_score[static_cast<std::size_t>(k)] = floored_log(prior.probs[static_cast<std::size_t>(k)]);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const int s = row[j];
    if (s == kMissing) continue;  // unobserved factor integrates to 1
    const Matrix& pi = confusions.matrices[j];
    if (s < 0 || s >= pi.cols)
      throw ValidationError("nb_posterior: annotation out of range");
    for (int k = 0; k < C; ++k) log_score[static_cast<std::size_t>(k)] += floored_log(pi.at(k, s));
  }
  double zmax = *std::max_element(log_score.begin(), log_score.end());
  double total = 0.0;
  std::vector<double> out(static_cast<std::size_t>(C));
  for (int k = 0; k < C; ++k) {
    out[static_cast<std::size_t>(k)] = std::exp(log_score[static_cast<std::size_t>(k)] - zmax);
    total += out[static_cast<std::size_t>(k)];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    log_warn("nb_posterior: degenerate scores, falling back to uniform");
    std::fill(out.begin(), out.end(), 1.0 / C);
    return out;
  }
  for (double& p : out) p /= total;
  return out;
}

SoftLabelMatrix nb_posterior_batch(const AnnotationMatrix& annotations,
                                   const ConfusionMatrixSet& confusions, const ClassPrior& prior) {
  SoftLabelMatrix out(annotations.n, prior.classes());
  for (int i = 0; i < annotations.n; ++i) {
    auto p = nb_posterior(annotations.row(i), confusions, prior);
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

ConfusionMatrixSet fit_nb_confusions(const AnnotationMatrix& annotations,
                                     const SoftLabelMatrix& colabels, double alpha) {
  if (annotations.n != colabels.size())
    throw ValidationError("fit_nb_confusions: row count mismatch");
  const int C = colabels.classes();
  const int m = annotations.m;
  ConfusionMatrixSet set;
  set.matrices.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    Matrix counts(C, C, 0.0);
    bool any = false;
    for (int i = 0; i < annotations.n; ++i) {
      const int s = annotations.at(i, j);
      if (s == kMissing) continue;
      any = true;
      auto cl = colabels.row(i);
      for (int k = 0; k < C; ++k) counts.at(k, s) += cl[static_cast<std::size_t>(k)];
    }
    Matrix pi(C, C, 0.0);
    if (!any) {
      log_warn("fit_nb_confusions: annotator " + std::to_string(j) +
               " has no observations; using uniform matrix");
      for (double& v : pi.data) v = 1.0 / C;
    } else {
      for (int k = 0; k < C; ++k) {
        double row_mass = 0.0;
        for (int s = 0; s < C; ++s) row_mass += counts.at(k, s);
        const double denom = row_mass + alpha * C;
        if (denom <= 0.0) {
          // alpha == 0 and no co-label mass on class k: nothing to estimate
          for (int s = 0; s < C; ++s) pi.at(k, s) = 1.0 / C;
          continue;
        }
        for (int s = 0; s < C; ++s) pi.at(k, s) = (counts.at(k, s) + alpha) / denom;
      }
    }
    set.matrices.push_back(std::move(pi));
  }
  return set;
}

double nb_loss(const AnnotationMatrix& annotations, const SoftLabelMatrix& colabels,
               const ConfusionMatrixSet& confusions, const ClassPrior& prior) {
  if (annotations.n != colabels.size()) throw ValidationError("nb_loss: row count mismatch");
  double loss = 0.0;
  for (int i = 0; i < annotations.n; ++i) {
    auto post = nb_posterior(annotations.row(i), confusions, prior);
    auto cl = colabels.row(i);
    for (int k = 0; k < colabels.classes(); ++k)
      loss -= cl[static_cast<std::size_t>(k)] * floored_log(post[static_cast<std::size_t>(k)]);
  }
  return loss;
}

void encode_annotation_row(std::span<const int> row, int classes, std::span<double> out) {
  if (out.size() != row.size() * static_cast<std::size_t>(classes))
    throw ValidationError("encode_annotation_row: output span size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < row.size(); ++j) {
    const int s = row[j];
    if (s == kMissing)
      throw ValidationError("complete annotations required: missing entry for annotator " +
                            std::to_string(j));
    if (s < 0 || s >= classes) throw ValidationError("encode_annotation_row: label out of range");
    out[j * static_cast<std::size_t>(classes) + static_cast<std::size_t>(s)] = 1.0;
  }
}

Matrix encode_annotations(const AnnotationMatrix& annotations, int classes) {
  Matrix X(annotations.n, annotations.m * classes);
  for (int i = 0; i < annotations.n; ++i)
    encode_annotation_row(annotations.row(i), classes, X.row(i));
  return X;
}

Mlp init_neural_aggregator(int annotators, int classes, const std::vector<int>& hidden_dims,
                           RngStream& rng) {
  return init_classifier(annotators * classes, hidden_dims, classes, rng);
}

std::vector<double> fit_neural_aggregator(const AnnotationMatrix& annotations,
                                          const SoftLabelMatrix& colabels, Mlp& params,
                                          const OptimizerConfig& opt, RngStream& rng,
                                          int epoch_offset) {
  const int classes = colabels.classes();
  Matrix X = encode_annotations(annotations, classes);
  return train_epochs(params, X, colabels.probs, opt, rng, epoch_offset);
}

std::vector<double> neural_aggregator_predict(const Mlp& params, std::span<const int> row,
                                              int classes) {
  Matrix X(1, static_cast<int>(row.size()) * classes);
  encode_annotation_row(row, classes, X.row(0));
  Matrix probs = predict_proba(params, X);
  auto r = probs.row(0);
  return {r.begin(), r.end()};
}

SoftLabelMatrix neural_aggregator_predict_batch(const Mlp& params,
                                                const AnnotationMatrix& annotations, int classes) {
  Matrix X = encode_annotations(annotations, classes);
  return SoftLabelMatrix(predict_proba(params, X));
}

SoftLabelMatrix init_colabels_trusted_nb(const TrustedDataset& trusted,
                                         const AnnotationMatrix& untrusted_annotations,
                                         const ClassPrior& prior, double alpha, int classes) {
  if (!trusted.annotations)
    throw ValidationError("init_colabels_trusted_nb: trusted annotations required");
  if (!trusted.annotations->complete())
    throw ValidationError("init_colabels_trusted_nb: trusted annotations must be complete");
  SoftLabelMatrix truth = SoftLabelMatrix::one_hot(trusted_labels(trusted), classes);
  ConfusionMatrixSet confusions = fit_nb_confusions(*trusted.annotations, truth, alpha);
  return nb_posterior_batch(untrusted_annotations, confusions, prior);
}

void save_confusions_json(const ConfusionMatrixSet& confusions, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (int j = 0; j < confusions.annotators(); ++j) {
    const Matrix& pi = confusions.matrices[static_cast<std::size_t>(j)];
    nlohmann::json rows = nlohmann::json::array();
    for (int k = 0; k < pi.rows; ++k) {
      auto r = pi.row(k);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    doc.push_back({{"annotator", j}, {"matrix", std::move(rows)}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
  if (!out.flush()) throw std::runtime_error("write failed: " + path);
}

ConfusionMatrixSet load_confusions_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  ConfusionMatrixSet set;
  set.matrices.resize(doc.size());
  for (const auto& entry : doc) {
    const int j = entry.at("annotator").get<int>();
    if (j < 0 || j >= static_cast<int>(set.matrices.size()))
      throw ValidationError(path + ": annotator index out of range");
    const auto& rows = entry.at("matrix");
    Matrix pi(static_cast<int>(rows.size()), static_cast<int>(rows.empty() ? 0 : rows[0].size()));
    for (int k = 0; k < pi.rows; ++k)
      for (int s = 0; s < pi.cols; ++s) pi.at(k, s) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)].get<double>();
    set.matrices[static_cast<std::size_t>(j)] = std::move(pi);
  }
  return set;
}

}  // namespace colabel
