#include <benchmark/benchmark.h>

#include <vector>

#include "colabel/aggregator.hpp"
#include "colabel/calibration.hpp"
#include "colabel/classifier.hpp"
#include "colabel/combiner.hpp"
#include "colabel/noise_sim.hpp"
#include "colabel/rng.hpp"
#include "colabel/types.hpp"

using namespace colabel;

namespace {

AnnotationMatrix random_annotations(int n, int m, int classes, double missing, RngStream& rng) {
  AnnotationMatrix ann(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (j == 0 || rng.uniform() >= missing) ann.at(i, j) = rng.uniform_int(classes);
  return ann;
}

SoftLabelMatrix random_soft(int n, int classes, RngStream& rng) {
  SoftLabelMatrix soft(n, classes);
  for (int i = 0; i < n; ++i) {
    double z = 0.0;
    auto row = soft.row(i);
    for (double& v : row) {
      v = 0.05 + rng.uniform();
      z += v;
    }
    for (double& v : row) v /= z;
  }
  return soft;
}

void bm_nb_posterior_batch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int classes = 10;
  const int m = 5;
  RngStream rng(1);
  auto ann = random_annotations(n, m, classes, 0.4, rng);
  auto colabels = random_soft(n, classes, rng);
  auto confusions = fit_nb_confusions(ann, colabels, 0.01);
  ClassPrior prior{std::vector<double>(classes, 1.0 / classes)};
  for (auto _ : state) {
    auto post = nb_posterior_batch(ann, confusions, prior);
    benchmark::DoNotOptimize(post.probs.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_nb_posterior_batch)->Arg(1000)->Arg(10000);

void bm_fit_nb_confusions(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream rng(2);
  auto ann = random_annotations(n, 5, 10, 0.4, rng);
  auto colabels = random_soft(n, 10, rng);
  for (auto _ : state) {
    auto confusions = fit_nb_confusions(ann, colabels, 0.01);
    benchmark::DoNotOptimize(confusions.matrices.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_fit_nb_confusions)->Arg(1000)->Arg(10000);

void bm_pav_fit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream rng(3);
  std::vector<double> scores(static_cast<std::size_t>(n));
  std::vector<double> targets(static_cast<std::size_t>(n));
  std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
    targets[static_cast<std::size_t>(i)] = rng.uniform();
  }
  for (auto _ : state) {
    auto entry = pav_fit(scores, targets, weights);
    benchmark::DoNotOptimize(entry.values.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_pav_fit)->Arg(100)->Arg(1000)->Arg(10000);

void bm_combine_batch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int classes = 10;
  RngStream rng(4);
  PredictionBatch d{random_soft(n, classes, rng).probs, PredictionSource::kDataClassifier, true};
  PredictionBatch l{random_soft(n, classes, rng).probs, PredictionSource::kLabelAggregator, true};
  ClassPrior prior{std::vector<double>(classes, 1.0 / classes)};
  for (auto _ : state) {
    auto fused = combine_batch(d, l, prior);
    benchmark::DoNotOptimize(fused.probs.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_combine_batch)->Arg(1000)->Arg(10000);

void bm_train_epoch(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream rng(5);
  BlobSpec blobs;
  blobs.classes = 3;
  Matrix X;
  std::vector<int> y;
  make_blobs(n, blobs, rng, &X, &y);
  auto targets = SoftLabelMatrix::one_hot(y, 3);
  RngStream init_rng = rng.fork("init");
  Mlp net = init_classifier(2, {32}, 3, init_rng);
  OptimizerConfig opt;
  RngStream train_rng = rng.fork("train");
  for (auto _ : state) {
    auto losses = train_epochs(net, X, targets.probs, opt, train_rng);
    benchmark::DoNotOptimize(losses.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_train_epoch)->Arg(1000)->Arg(10000);

void bm_generate_group(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  RngStream truth_rng(6);
  std::vector<int> truth(static_cast<std::size_t>(n));
  for (int& t : truth) t = truth_rng.uniform_int(10);
  AnnotatorGroupSpec group;
  NoiseSpec sym;
  sym.eps = 0.3;
  NoiseSpec pair;
  pair.kind = NoiseKind::kPair;
  pair.eps = 0.4;
  NoiseSpec imitative;
  imitative.kind = NoiseKind::kImitative;
  imitative.base_annotator = 0;
  group.specs = {sym, pair, imitative};
  group.labels_per_instance = 2;
  for (auto _ : state) {
    RngStream rng(7);
    auto ann = generate_group(truth, 10, group, rng);
    benchmark::DoNotOptimize(ann.cells.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(bm_generate_group)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
