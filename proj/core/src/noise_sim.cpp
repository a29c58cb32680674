#include "colabel/noise_sim.hpp"

#include <algorithm>
#include <cmath>

namespace colabel {

bool noise_kind_correlated(NoiseKind kind) {
  return kind == NoiseKind::kImitative || kind == NoiseKind::kSupportive ||
         kind == NoiseKind::kOpposite;
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "symmetric") return NoiseKind::kSymmetric;
  if (name == "pair") return NoiseKind::kPair;
  if (name == "classwise") return NoiseKind::kClassWise;
  if (name == "imitative") return NoiseKind::kImitative;
  if (name == "supportive") return NoiseKind::kSupportive;
  if (name == "opposite") return NoiseKind::kOpposite;
  throw ValidationError("unknown noise kind '" + name + "'");
}

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kSymmetric: return "symmetric";
    case NoiseKind::kPair: return "pair";
    case NoiseKind::kClassWise: return "classwise";
    case NoiseKind::kImitative: return "imitative";
    case NoiseKind::kSupportive: return "supportive";
    case NoiseKind::kOpposite: return "opposite";
  }
  return "?";
}

namespace {

void require_classes(int classes) {
  if (classes < 2) throw ValidationError("confusion matrix needs at least 2 classes");
}

void require_eps(double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ValidationError("eps must lie in [0,1]");
}

}  // namespace

Matrix build_confusion_symmetric(int classes, double eps) {
  require_classes(classes);
  require_eps(eps);
  Matrix q(classes, classes, eps / (classes - 1));
  for (int k = 0; k < classes; ++k) q.at(k, k) = 1.0 - eps;
  return q;
}

Matrix build_confusion_pair(int classes, double eps) {
  require_classes(classes);
  require_eps(eps);
  Matrix q(classes, classes, 0.0);
  for (int k = 0; k < classes; ++k) {
    q.at(k, k) = 1.0 - eps;
    q.at(k, (k + 1) % classes) += eps;  // += keeps C=1-proof if ever relaxed
  }
  return q;
}

Matrix build_confusion_classwise(int classes, const std::vector<int>& correct_classes) {
  require_classes(classes);
  if (correct_classes.empty()) throw ValidationError("classwise spec needs a nonempty class set");
  for (int k : correct_classes)
    if (k < 0 || k >= classes) throw ValidationError("classwise correct class out of range");
  Matrix q(classes, classes, 1.0 / classes);
  for (int k : correct_classes) {
    for (int s = 0; s < classes; ++s) q.at(k, s) = 0.0;
    q.at(k, k) = 1.0;
  }
  return q;
}

Matrix build_confusion(int classes, const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::kSymmetric: return build_confusion_symmetric(classes, spec.eps);
    case NoiseKind::kPair: return build_confusion_pair(classes, spec.eps);
    case NoiseKind::kClassWise: return build_confusion_classwise(classes, spec.correct_classes);
    default:
      throw ValidationError("correlated noise kind has no standalone confusion matrix");
  }
}

std::vector<int> sample_independent_labels(const std::vector<int>& truth, const Matrix& confusion,
                                           RngStream& rng) {
  std::vector<int> out(truth.size());
  std::vector<double> row(static_cast<std::size_t>(confusion.cols));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto r = confusion.row(truth[i]);
    row.assign(r.begin(), r.end());
    out[i] = rng.categorical(row);
  }
  return out;
}

namespace {

// Uniform draw over the classes != truth.
int uniform_wrong_label(int truth, int classes, RngStream& rng) {
  int pick = rng.uniform_int(classes - 1);
  return pick >= truth ? pick + 1 : pick;
}

}  // namespace

std::vector<int> sample_correlated_labels(const std::vector<int>& truth,
                                          const std::vector<int>& base_labels, NoiseKind kind,
                                          int classes, RngStream& rng) {
  require_classes(classes);
  if (truth.size() != base_labels.size())
    throw ValidationError("correlated sampling: truth and base label sizes differ");
  std::vector<int> out(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool base_correct = base_labels[i] == truth[i];
    switch (kind) {
      case NoiseKind::kImitative:
        out[i] = base_labels[i];
        break;
      case NoiseKind::kSupportive:
        out[i] = base_correct ? truth[i] : uniform_wrong_label(truth[i], classes, rng);
        break;
      case NoiseKind::kOpposite:
        out[i] = base_correct ? uniform_wrong_label(truth[i], classes, rng) : truth[i];
        break;
      default:
        throw ValidationError("sample_correlated_labels: independent kind given");
    }
  }
  return out;
}

std::vector<NoiseSpec> expand_specs(const AnnotatorGroupSpec& group) {
  if (group.annotators_per_spec < 1)
    throw ValidationError("annotators_per_spec must be at least 1");
  std::vector<NoiseSpec> expanded;
  expanded.reserve(group.specs.size() * static_cast<std::size_t>(group.annotators_per_spec));
  for (const auto& spec : group.specs)
    for (int r = 0; r < group.annotators_per_spec; ++r) expanded.push_back(spec);
  for (std::size_t j = 0; j < expanded.size(); ++j) {
    if (noise_kind_correlated(expanded[j].kind) &&
        (expanded[j].base_annotator < 0 || expanded[j].base_annotator >= static_cast<int>(j)))
      throw ValidationError("correlated annotator " + std::to_string(j) +
                            " must reference an earlier annotator");
  }
  return expanded;
}

AnnotationMatrix generate_group(const std::vector<int>& truth, int classes,
                                const AnnotatorGroupSpec& group, RngStream& rng) {
  require_classes(classes);
  const auto specs = expand_specs(group);
  const int m = static_cast<int>(specs.size());
  const int n = static_cast<int>(truth.size());
  if (group.labels_per_instance < 0 || group.labels_per_instance > m)
    throw ValidationError("labels_per_instance exceeds annotator count");

  // Complete columns first; column j's stream is forked so its draws do not
  // depend on how other columns consumed randomness.
  std::vector<std::vector<int>> columns(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    RngStream col_rng = rng.fork(static_cast<std::uint64_t>(j));
    const auto& spec = specs[static_cast<std::size_t>(j)];
    if (noise_kind_correlated(spec.kind)) {
      columns[static_cast<std::size_t>(j)] = sample_correlated_labels(
          truth, columns[static_cast<std::size_t>(spec.base_annotator)], spec.kind, classes, col_rng);
    } else {
      Matrix q = build_confusion(classes, spec);
      columns[static_cast<std::size_t>(j)] = sample_independent_labels(truth, q, col_rng);
    }
  }

  AnnotationMatrix ann(n, m);
  if (group.labels_per_instance == 0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) ann.at(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    return ann;
  }

  // Sparse masking: per instance, keep labels from k distinct annotators
  // drawn uniformly without replacement (partial Fisher-Yates).
  RngStream mask_rng = rng.fork("mask");
  std::vector<int> pool(static_cast<std::size_t>(m));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) pool[static_cast<std::size_t>(j)] = j;
    for (int t = 0; t < group.labels_per_instance; ++t) {
      int pick = t + mask_rng.uniform_int(m - t);
      std::swap(pool[static_cast<std::size_t>(t)], pool[static_cast<std::size_t>(pick)]);
      int j = pool[static_cast<std::size_t>(t)];
      ann.at(i, j) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
  }
  return ann;
}

void make_blobs(int n, const BlobSpec& spec, RngStream& rng, Matrix* features,
                std::vector<int>* labels) {
  if (spec.classes < 2) throw ValidationError("make_blobs: need at least 2 classes");
  if (spec.dim < 1) throw ValidationError("make_blobs: need at least 1 dimension");

  Matrix centers(spec.classes, spec.dim, 0.0);
  for (int k = 0; k < spec.classes; ++k) {
    if (spec.dim == 1) {
      centers.at(k, 0) = spec.center_separation * (k - 0.5 * (spec.classes - 1));
    } else {
      double angle = 2.0 * 3.141592653589793 * k / spec.classes;
      centers.at(k, 0) = spec.center_separation * std::cos(angle);
      centers.at(k, 1) = spec.center_separation * std::sin(angle);
    }
  }

  *features = Matrix(n, spec.dim);
  labels->resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int y = rng.uniform_int(spec.classes);
    (*labels)[static_cast<std::size_t>(i)] = y;
    for (int j = 0; j < spec.dim; ++j)
      features->at(i, j) = centers.at(y, j) + spec.cluster_std * rng.normal();
  }
}

}  // namespace colabel
