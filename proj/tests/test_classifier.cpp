#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "colabel/classifier.hpp"
#include "colabel/noise_sim.hpp"
#include "colabel/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace colabel;

namespace {

Mlp single_layer(std::vector<double> w, std::vector<double> b, int in) {
  Mlp net;
  MlpLayer layer;
  layer.in = in;
  layer.out = static_cast<int>(b.size());
  layer.w = std::move(w);
  layer.b = std::move(b);
  net.layers.push_back(std::move(layer));
  return net;
}

}  // namespace

TEST_CASE("soft cross entropy") {
  // -0.5*ln(0.2) - 0.5*ln(0.8) = -0.5*ln(0.16) = ln(2.5)
  std::vector<double> pred{0.2, 0.8};
  std::vector<double> target{0.5, 0.5};
  CHECK(soft_cross_entropy(pred, target) == doctest::Approx(0.9162907318741551).epsilon(1e-12));

  // Zero predictions are floored at 1e-12: loss = -ln(1e-12) = 12*ln(10).
  std::vector<double> hard_pred{1.0, 0.0};
  std::vector<double> hard_target{0.0, 1.0};
  CHECK(soft_cross_entropy(hard_pred, hard_target) ==
        doctest::Approx(27.631021115928548).epsilon(1e-12));
}

TEST_CASE("initialization shapes and ranges") {
  RngStream rng(1);
  auto net = init_classifier(4, {8, 5}, 3, rng);
  REQUIRE(net.layers.size() == 3);
  CHECK(net.input_dim() == 4);
  CHECK(net.output_dim() == 3);
  CHECK(net.layers[0].out == 8);
  CHECK(net.layers[1].in == 8);
  CHECK(net.layers[1].out == 5);
  for (const auto& layer : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double w : layer.w) {
      CHECK(w >= -bound);
      CHECK(w <= bound);
    }
    for (double b : layer.b) CHECK(b == 0.0);
  }
  CHECK_THROWS_AS(init_classifier(0, {}, 2, rng), ValidationError);
  CHECK_THROWS_AS(init_classifier(2, {0}, 2, rng), ValidationError);
}

TEST_CASE("softmax forward pass") {
  // One affine layer, weights (1, -1): logit gap at x is 2x, so
  // x = ln(3)/2 makes the gap ln 3 and the posterior (3/4, 1/4).
  auto net = single_layer({1.0, -1.0}, {0.0, 0.0}, 1);
  Matrix X(2, 1);
  X.at(0, 0) = 0.0;
  X.at(1, 0) = std::log(3.0) / 2.0;
  auto probs = predict_proba(net, X);
  CHECK(probs.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(probs.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(probs.at(1, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(probs.at(1, 1) == doctest::Approx(0.25).epsilon(1e-12));

  Matrix wrong(1, 3);
  CHECK_THROWS_AS(predict_proba(net, wrong), ValidationError);
}

TEST_CASE("analytic gradients match central finite differences") {
  RngStream rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + rng.uniform_int(3);
    const int C = 2 + rng.uniform_int(2);
    std::vector<int> hidden;
    if (trial % 2 == 0) hidden.push_back(2 + rng.uniform_int(3));
    RngStream init_rng = rng.fork(trial);
    Mlp net = init_classifier(in, hidden, C, init_rng);

    const int n = 1 + rng.uniform_int(4);
    Matrix X(n, in);
    for (double& v : X.data) v = rng.normal();
    Matrix T(n, C);
    for (int i = 0; i < n; ++i) {
      auto p = oracle::random_simplex(C, rng);
      std::copy(p.begin(), p.end(), T.row(i).begin());
    }

    std::vector<std::vector<double>> gw, gb;
    loss_and_gradients(net, X, T, &gw, &gb);

    const double h = 1e-5;
    std::vector<std::vector<double>> tw, tb;
    auto check_param = [&](double* p, double analytic) {
      const double saved = *p;
      *p = saved + h;
      const double up = loss_and_gradients(net, X, T, &tw, &tb);
      *p = saved - h;
      const double down = loss_and_gradients(net, X, T, &tw, &tb);
      *p = saved;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, oracle::rel_err(analytic, fd));
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (std::size_t p = 0; p < net.layers[l].w.size(); ++p)
        check_param(&net.layers[l].w[p], gw[l][p]);
      for (std::size_t p = 0; p < net.layers[l].b.size(); ++p)
        check_param(&net.layers[l].b[p], gb[l][p]);
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("full-batch step equals one analytic gradient step") {
  RngStream init_rng(3);
  Mlp net = init_classifier(2, {}, 2, init_rng);
  Mlp before = net;

  Matrix X(3, 2);
  X.data = {0.5, -1.0, 2.0, 0.25, -0.75, 1.5};
  Matrix T(3, 2);
  T.data = {1.0, 0.0, 0.0, 1.0, 0.5, 0.5};

  OptimizerConfig opt;
  opt.lr = 0.2;
  opt.momentum = 0.0;
  opt.weight_decay = 0.0;
  opt.batch_size = 16;  // one batch holds everything
  opt.epochs = 1;

  std::vector<std::vector<double>> gw, gb;
  const double loss = loss_and_gradients(before, X, T, &gw, &gb);

  RngStream train_rng(4);
  auto losses = train_epochs(net, X, T, opt, train_rng);
  REQUIRE(losses.size() == 1);
  CHECK(losses[0] == doctest::Approx(loss).epsilon(1e-12));
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    for (std::size_t p = 0; p < net.layers[l].w.size(); ++p)
      CHECK(net.layers[l].w[p] ==
            doctest::Approx(before.layers[l].w[p] - 0.2 * gw[l][p]).epsilon(1e-12));
    for (std::size_t p = 0; p < net.layers[l].b.size(); ++p)
      CHECK(net.layers[l].b[p] ==
            doctest::Approx(before.layers[l].b[p] - 0.2 * gb[l][p]).epsilon(1e-12));
  }
}

TEST_CASE("weight decay shrinks weights but never biases") {
  // Equal logits and a uniform target make the data gradient exactly zero,
  // leaving only the decay term: w <- w - lr*wd*w.
  auto net = single_layer({1.0, 1.0}, {0.0, 0.0}, 1);
  Matrix X(1, 1);
  X.at(0, 0) = 0.7;
  Matrix T(1, 2);
  T.at(0, 0) = 0.5;
  T.at(0, 1) = 0.5;

  OptimizerConfig opt;
  opt.lr = 0.1;
  opt.momentum = 0.9;
  opt.weight_decay = 0.5;
  opt.batch_size = 8;
  opt.epochs = 1;
  RngStream rng(5);
  train_epochs(net, X, T, opt, rng);
  CHECK(net.layers[0].w[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(net.layers[0].w[1] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(net.layers[0].b[0] == 0.0);
  CHECK(net.layers[0].b[1] == 0.0);
}

TEST_CASE("learning-rate schedule and epoch offset") {
  RngStream init_rng(6);
  Mlp net = init_classifier(2, {4}, 2, init_rng);
  Matrix X(4, 2);
  for (double& v : X.data) v = 0.3;
  Matrix T(4, 2);
  for (int i = 0; i < 4; ++i) T.at(i, i % 2) = 1.0;

  OptimizerConfig opt;
  opt.epochs = 1;
  opt.schedule = {{5, 0.0}};  // multiplier 0 once the cumulative epoch hits 5

  SUBCASE("before the breakpoint the step is live") {
    Mlp copy = net;
    RngStream rng(7);
    train_epochs(copy, X, T, opt, rng);
    CHECK(copy.layers[0].w != net.layers[0].w);
  }
  SUBCASE("offset past the breakpoint freezes the parameters") {
    Mlp copy = net;
    RngStream rng(7);
    train_epochs(copy, X, T, opt, rng, /*epoch_offset=*/5);
    CHECK(copy.layers[0].w == net.layers[0].w);
    CHECK(copy.layers[1].b == net.layers[1].b);
  }
  SUBCASE("multiplier from epoch zero freezes immediately") {
    opt.schedule = {{0, 0.0}};
    Mlp copy = net;
    RngStream rng(7);
    train_epochs(copy, X, T, opt, rng);
    CHECK(copy.layers[0].w == net.layers[0].w);
  }
}

TEST_CASE("training separable blobs reaches high accuracy") {
  BlobSpec spec;
  spec.classes = 3;
  spec.dim = 2;
  spec.center_separation = 3.0;
  spec.cluster_std = 0.6;
  RngStream data_rng(8);
  Matrix X;
  std::vector<int> y;
  make_blobs(600, spec, data_rng, &X, &y);
  auto T = SoftLabelMatrix::one_hot(y, 3);

  RngStream init_rng(9);
  Mlp net = init_classifier(2, {16}, 3, init_rng);
  OptimizerConfig opt;
  opt.epochs = 40;
  RngStream train_rng(10);
  auto losses = train_epochs(net, X, T.probs, opt, train_rng);
  CHECK(losses.front() > losses.back());
  CHECK(accuracy(net, X, y) > 0.95);
}

TEST_CASE("fine-tuning improves trusted fit") {
  TrustedDataset trusted;
  RngStream data_rng(11);
  BlobSpec spec;
  spec.classes = 2;
  spec.dim = 2;
  spec.center_separation = 2.5;
  Matrix X;
  std::vector<int> y;
  make_blobs(80, spec, data_rng, &X, &y);
  for (int i = 0; i < X.rows; ++i) {
    auto r = X.row(i);
    trusted.examples.push_back(
        {"t" + std::to_string(i), {r.begin(), r.end()}, y[static_cast<std::size_t>(i)]});
  }

  RngStream init_rng(12);
  Mlp net = init_classifier(2, {8}, 2, init_rng);
  const double before = accuracy(net, X, y);
  OptimizerConfig opt;
  opt.epochs = 30;
  RngStream tune_rng(13);
  fine_tune(net, trusted, 2, opt, tune_rng);
  CHECK(accuracy(net, X, y) >= before);
  CHECK(accuracy(net, X, y) > 0.9);

  TrustedDataset empty;
  CHECK_THROWS_AS(fine_tune(net, empty, 2, opt, tune_rng), ValidationError);
}

TEST_CASE("checkpoints round-trip exactly") {
  RngStream rng(14);
  Mlp net = init_classifier(3, {5}, 2, rng);
  auto dir = std::filesystem::temp_directory_path() /
             ("colabel_clf_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto path = (dir / "ckpt.json").string();
  save_checkpoint(net, path);
  Mlp loaded = load_checkpoint(path);
  REQUIRE(loaded.layers.size() == net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(loaded.layers[l].in == net.layers[l].in);
    CHECK(loaded.layers[l].out == net.layers[l].out);
    CHECK(loaded.layers[l].w == net.layers[l].w);  // bitwise: shortest round-trip
    CHECK(loaded.layers[l].b == net.layers[l].b);
  }

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint((dir / "nope.json").string()), ValidationError);
  }
  SUBCASE("malformed json") {
    std::ofstream((dir / "bad.json").string()) << "{broken";
    CHECK_THROWS_AS(load_checkpoint((dir / "bad.json").string()), ValidationError);
  }
  SUBCASE("layers must chain") {
    std::ofstream((dir / "chain.json").string())
        << R"({"layer_0":{"w":[1,2],"b":[1,1]},"layer_1":{"w":[1,2,3],"b":[1]}})";
    CHECK_THROWS_AS(load_checkpoint((dir / "chain.json").string()), ValidationError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("training is deterministic given seed") {
  Matrix X(6, 2);
  RngStream data_rng(15);
  for (double& v : X.data) v = data_rng.normal();
  Matrix T(6, 2);
  for (int i = 0; i < 6; ++i) T.at(i, i % 2) = 1.0;

  auto run = [&]() {
    RngStream init_rng(16);
    Mlp net = init_classifier(2, {4}, 2, init_rng);
    OptimizerConfig opt;
    opt.epochs = 5;
    opt.batch_size = 2;
    RngStream train_rng(17);
    train_epochs(net, X, T, opt, train_rng);
    return net;
  };
  Mlp a = run();
  Mlp b = run();
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    CHECK(a.layers[l].b == b.layers[l].b);
  }
}
