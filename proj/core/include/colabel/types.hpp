#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace colabel {

/// Sentinel for an unobserved annotation cell. Files use the same value.
inline constexpr int kMissing = -1;

/// Raised when inputs violate a documented precondition or file contract.
/// The CLI maps this to exit code 1; other exceptions map to 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
  std::span<const double> row(int r) const {
    return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }
};

struct LabeledExample {
  std::string id;
  std::vector<double> features;
  int label = 0;
};

/// n x m grid of weak labels; kMissing marks unobserved cells.
struct AnnotationMatrix {
  int n = 0;
  int m = 0;
  std::vector<int> cells;

  AnnotationMatrix() = default;
  AnnotationMatrix(int n_, int m_)
      : n(n_), m(m_), cells(static_cast<std::size_t>(n_) * m_, kMissing) {}

  int& at(int i, int j) { return cells[static_cast<std::size_t>(i) * m + j]; }
  int at(int i, int j) const { return cells[static_cast<std::size_t>(i) * m + j]; }

  std::span<const int> row(int i) const {
    return {cells.data() + static_cast<std::size_t>(i) * m, static_cast<std::size_t>(m)};
  }

  int observed_in_row(int i) const;
  bool complete() const;
};

/// n x C matrix whose rows are probability distributions over classes.
struct SoftLabelMatrix {
  Matrix probs;

  SoftLabelMatrix() = default;
  explicit SoftLabelMatrix(Matrix p) : probs(std::move(p)) {}
  SoftLabelMatrix(int n, int C) : probs(n, C) {}

  int size() const { return probs.rows; }
  int classes() const { return probs.cols; }
  std::span<double> row(int i) { return probs.row(i); }
  std::span<const double> row(int i) const { return probs.row(i); }

  bool row_stochastic(double tol = 1e-9) const;
  std::vector<int> argmax_labels() const;

  static SoftLabelMatrix one_hot(std::span<const int> labels, int C);
};

struct ClassPrior {
  std::vector<double> probs;

  int classes() const { return static_cast<int>(probs.size()); }
};

struct UntrustedDataset {
  std::vector<std::string> ids;
  Matrix features;                             // n x d
  AnnotationMatrix annotations;                // n x m
  std::optional<std::vector<int>> hidden_truth;  // simulation only

  int size() const { return features.rows; }
  int feature_dim() const { return features.cols; }
};

struct TrustedDataset {
  std::vector<LabeledExample> examples;
  std::optional<AnnotationMatrix> annotations;  // aligned with examples; required by the complete-data variant

  int size() const { return static_cast<int>(examples.size()); }
};

/// Feature rows of the trusted examples as a matrix.
Matrix trusted_features(const TrustedDataset& trusted);
std::vector<int> trusted_labels(const TrustedDataset& trusted);

/// Checks cross-field consistency of a dataset pair. Returns human-readable
/// violations; an empty list means the pair is usable.
std::vector<std::string> validate_dataset(const UntrustedDataset& untrusted,
                                          const TrustedDataset& trusted, int classes);

/// Smoothed class frequencies of the trusted labels:
/// probs[k] = (count_k + alpha) / (u + alpha * C).
ClassPrior estimate_class_prior(const TrustedDataset& trusted, int classes, double alpha);

}  // namespace colabel
