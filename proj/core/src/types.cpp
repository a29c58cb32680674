#include "colabel/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace colabel {

int AnnotationMatrix::observed_in_row(int i) const {
  int count = 0;
  for (int j = 0; j < m; ++j)
    if (at(i, j) != kMissing) ++count;
  return count;
}

bool AnnotationMatrix::complete() const {
  for (int v : cells)
    if (v == kMissing) return false;
  return true;
}

bool SoftLabelMatrix::row_stochastic(double tol) const {
  for (int i = 0; i < size(); ++i) {
    double sum = 0.0;
    for (double p : row(i)) {
      if (!(p >= 0.0 && p <= 1.0 + tol)) return false;
      sum += p;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

std::vector<int> SoftLabelMatrix::argmax_labels() const {
  std::vector<int> out(static_cast<std::size_t>(size()));
  for (int i = 0; i < size(); ++i) {
    auto r = row(i);
    out[static_cast<std::size_t>(i)] =
        static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

SoftLabelMatrix SoftLabelMatrix::one_hot(std::span<const int> labels, int C) {
  SoftLabelMatrix m(static_cast<int>(labels.size()), C);
  for (int i = 0; i < m.size(); ++i) m.probs.at(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  return m;
}

Matrix trusted_features(const TrustedDataset& trusted) {
  const int u = trusted.size();
  const int d = u > 0 ? static_cast<int>(trusted.examples[0].features.size()) : 0;
  Matrix X(u, d);
  for (int i = 0; i < u; ++i) {
    const auto& f = trusted.examples[static_cast<std::size_t>(i)].features;
    std::copy(f.begin(), f.end(), X.row(i).begin());
  }
  return X;
}

std::vector<int> trusted_labels(const TrustedDataset& trusted) {
  std::vector<int> y(static_cast<std::size_t>(trusted.size()));
  for (int i = 0; i < trusted.size(); ++i) y[static_cast<std::size_t>(i)] = trusted.examples[static_cast<std::size_t>(i)].label;
  return y;
}

std::vector<std::string> validate_dataset(const UntrustedDataset& untrusted,
                                          const TrustedDataset& trusted, int classes) {
  std::vector<std::string> report;
  const auto& ann = untrusted.annotations;

  if (untrusted.features.rows != ann.n)
    report.push_back("row count mismatch: features n=" + std::to_string(untrusted.features.rows) +
                     " vs annotations n=" + std::to_string(ann.n));
  if (!untrusted.ids.empty() && static_cast<int>(untrusted.ids.size()) != untrusted.features.rows)
    report.push_back("row count mismatch: ids vs features");

  for (int i = 0; i < ann.n; ++i) {
    if (ann.observed_in_row(i) == 0)
      report.push_back("all-missing row at index " + std::to_string(i));
    for (int j = 0; j < ann.m; ++j) {
      int v = ann.at(i, j);
      if (v != kMissing && (v < 0 || v >= classes)) {
        report.push_back("annotation out of range at (" + std::to_string(i) + "," +
                         std::to_string(j) + "): " + std::to_string(v));
        break;  // one report per row is enough
      }
    }
  }
  for (int j = 0; j < ann.m; ++j) {
    bool any = false;
    for (int i = 0; i < ann.n && !any; ++i) any = ann.at(i, j) != kMissing;
    if (!any && ann.n > 0) report.push_back("annotator column " + std::to_string(j) + " entirely missing");
  }

  if (untrusted.hidden_truth) {
    if (static_cast<int>(untrusted.hidden_truth->size()) != ann.n)
      report.push_back("row count mismatch: hidden truth vs annotations");
    for (std::size_t i = 0; i < untrusted.hidden_truth->size(); ++i)
      if ((*untrusted.hidden_truth)[i] < 0 || (*untrusted.hidden_truth)[i] >= classes) {
        report.push_back("hidden truth label out of range at index " + std::to_string(i));
        break;
      }
  }

  if (trusted.size() == 0) report.push_back("trusted set is empty");
  const int d = untrusted.feature_dim();
  for (int i = 0; i < trusted.size(); ++i) {
    const auto& ex = trusted.examples[static_cast<std::size_t>(i)];
    if (untrusted.size() > 0 && static_cast<int>(ex.features.size()) != d) {
      report.push_back("trusted feature dimension mismatch at index " + std::to_string(i));
      break;
    }
    if (ex.label < 0 || ex.label >= classes) {
      report.push_back("trusted label out of range at index " + std::to_string(i));
      break;
    }
  }
  if (trusted.annotations) {
    if (trusted.annotations->n != trusted.size())
      report.push_back("row count mismatch: trusted annotations vs examples");
    for (int i = 0; i < trusted.annotations->n; ++i)
      for (int j = 0; j < trusted.annotations->m; ++j) {
        int v = trusted.annotations->at(i, j);
        if (v != kMissing && (v < 0 || v >= classes)) {
          report.push_back("trusted annotation out of range at (" + std::to_string(i) + "," +
                           std::to_string(j) + ")");
          i = trusted.annotations->n;  // stop after first
          break;
        }
      }
  }
  return report;
}

ClassPrior estimate_class_prior(const TrustedDataset& trusted, int classes, double alpha) {
  if (trusted.size() == 0) throw ValidationError("estimate_class_prior: trusted set is empty");
  std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
  for (const auto& ex : trusted.examples) counts[static_cast<std::size_t>(ex.label)] += 1.0;
  const double denom = trusted.size() + alpha * classes;
  ClassPrior prior;
  prior.probs.resize(static_cast<std::size_t>(classes));
  for (int k = 0; k < classes; ++k) prior.probs[static_cast<std::size_t>(k)] = (counts[static_cast<std::size_t>(k)] + alpha) / denom;
  return prior;
}

}  // namespace colabel
