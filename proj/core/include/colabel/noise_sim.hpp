#pragma once

#include <string>
#include <vector>

#include "colabel/rng.hpp"
#include "colabel/types.hpp"

namespace colabel {

enum class NoiseKind { kSymmetric, kPair, kClassWise, kImitative, kSupportive, kOpposite };

bool noise_kind_correlated(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);
std::string noise_kind_name(NoiseKind kind);

/// One annotator's behavior. eps applies to Symmetric/Pair, correct_classes
/// to ClassWise, base_annotator to the correlated kinds (it indexes the
/// expanded annotator list and must point at an earlier annotator).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kSymmetric;
  double eps = 0.0;
  std::vector<int> correct_classes;
  int base_annotator = -1;
};

/// A panel of annotators. labels_per_instance == 0 means complete data
/// (every annotator labels every instance); a positive value keeps that many
/// labels per instance from distinct, uniformly chosen annotators.
struct AnnotatorGroupSpec {
  std::vector<NoiseSpec> specs;
  int labels_per_instance = 0;
  int annotators_per_spec = 1;
};

/// Diagonal 1-eps, remaining mass spread evenly over the other classes.
Matrix build_confusion_symmetric(int classes, double eps);

/// Row k keeps 1-eps at k and sends eps to the circular neighbor (k+1) mod C.
Matrix build_confusion_pair(int classes, double eps);

/// Identity rows for the listed classes; all other rows uniform 1/C.
Matrix build_confusion_classwise(int classes, const std::vector<int>& correct_classes);

/// Confusion matrix for an independent spec.
Matrix build_confusion(int classes, const NoiseSpec& spec);

/// Draws labels[i] from confusion row truth[i], independently per instance.
std::vector<int> sample_independent_labels(const std::vector<int>& truth, const Matrix& confusion,
                                           RngStream& rng);

/// Imitative: copy of base. Supportive: truth where base is correct, else a
/// uniform wrong label. Opposite: truth where base is wrong, else a uniform
/// wrong label.
std::vector<int> sample_correlated_labels(const std::vector<int>& truth,
                                          const std::vector<int>& base_labels, NoiseKind kind,
                                          int classes, RngStream& rng);

/// Expanded annotator list: each spec repeated annotators_per_spec times.
std::vector<NoiseSpec> expand_specs(const AnnotatorGroupSpec& group);

/// Generates the annotation matrix for the group: complete columns first, in
/// annotator order (so correlated annotators see their base), then sparse
/// masking when labels_per_instance > 0.
AnnotationMatrix generate_group(const std::vector<int>& truth, int classes,
                                const AnnotatorGroupSpec& group, RngStream& rng);

/// Isotropic Gaussian blobs. Class centers sit on a circle of radius
/// center_separation in the first two feature dimensions (on a line if
/// dim == 1); remaining dimensions carry noise only.
struct BlobSpec {
  int classes = 2;
  int dim = 2;
  double center_separation = 2.5;
  double cluster_std = 1.0;
};

void make_blobs(int n, const BlobSpec& spec, RngStream& rng, Matrix* features,
                std::vector<int>* labels);

}  // namespace colabel
