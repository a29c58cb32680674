#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "colabel/calibration.hpp"
#include "colabel/csv.hpp"
#include "colabel/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace colabel;

TEST_CASE("pav pools violators to weighted means") {
  // Targets 0,1,1,0,1 over increasing scores: the middle three pool to 2/3.
  std::vector<double> scores{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> targets{0.0, 1.0, 1.0, 0.0, 1.0};
  std::vector<double> weights(5, 1.0);
  auto entry = pav_fit(scores, targets, weights);
  const double expected[5] = {0.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0};
  for (int i = 0; i < 5; ++i)
    CHECK(apply_calibration(entry, scores[static_cast<std::size_t>(i)]) ==
          doctest::Approx(expected[i]).epsilon(1e-12));
  // Blocks: {0}, {1,1,0}, {1} -> three breakpoints.
  CHECK(entry.values.size() == 3);
  CHECK_FALSE(entry.identity);
}

TEST_CASE("pav pre-pools exact score ties") {
  std::vector<double> scores{0.5, 0.5};
  std::vector<double> targets{1.0, 0.0};
  std::vector<double> weights{1.0, 1.0};
  auto entry = pav_fit(scores, targets, weights);
  CHECK(entry.values.size() == 1);
  CHECK(apply_calibration(entry, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pav respects weights when merging") {
  // Means (1*1 + 3*0) / 4 = 0.25 after the single violator merge.
  std::vector<double> scores{0.1, 0.2};
  std::vector<double> targets{1.0, 0.0};
  std::vector<double> weights{1.0, 3.0};
  auto entry = pav_fit(scores, targets, weights);
  CHECK(entry.values.size() == 1);
  CHECK(apply_calibration(entry, 0.15) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("pav leaves feasible inputs untouched") {
  std::vector<double> scores{0.1, 0.4, 0.9};
  std::vector<double> targets{0.1, 0.5, 0.9};
  std::vector<double> weights(3, 1.0);
  auto entry = pav_fit(scores, targets, weights);
  REQUIRE(entry.values.size() == 3);
  for (int i = 0; i < 3; ++i)
    CHECK(apply_calibration(entry, scores[static_cast<std::size_t>(i)]) ==
          doctest::Approx(targets[static_cast<std::size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("pav matches the exhaustive isotonic minimizer") {
  RngStream rng(201);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + rng.uniform_int(8);
    std::vector<double> scores;
    while (static_cast<int>(scores.size()) < n) {
      double s = rng.uniform();
      bool dup = false;
      for (double t : scores) dup = dup || std::abs(t - s) < 1e-9;
      if (!dup) scores.push_back(s);
    }
    std::sort(scores.begin(), scores.end());
    std::vector<double> targets(static_cast<std::size_t>(n));
    std::vector<double> weights(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      targets[static_cast<std::size_t>(i)] = rng.uniform();
      weights[static_cast<std::size_t>(i)] = 0.1 + 2.0 * rng.uniform();
    }
    auto entry = pav_fit(scores, targets, weights);
    auto want = oracle::isotonic_fit(targets, weights);
    for (int i = 0; i < n; ++i)
      CHECK(std::abs(apply_calibration(entry, scores[static_cast<std::size_t>(i)]) -
                     want[static_cast<std::size_t>(i)]) < 1e-9);
  }
}

TEST_CASE("calibration map is a clamped step function") {
  CalibrationEntry entry;
  entry.breakpoints = {0.2, 0.6};
  entry.values = {0.3, 0.9};
  CHECK(apply_calibration(entry, 0.0) == 0.3);
  CHECK(apply_calibration(entry, 0.2) == 0.3);
  CHECK(apply_calibration(entry, 0.59) == 0.3);
  CHECK(apply_calibration(entry, 0.6) == 0.9);
  CHECK(apply_calibration(entry, 1.0) == 0.9);

  CalibrationEntry identity;
  identity.identity = true;
  CHECK(apply_calibration(identity, 0.37) == 0.37);
}

TEST_CASE("multiclass calibrator fits one-vs-rest maps") {
  // 20 rows predicting (0.9, 0.1) where only half are class 0, plus 20 rows
  // predicting (0.2, 0.8) where 4 are class 0: the fitted maps recover the
  // empirical frequencies.
  Matrix preds(40, 2);
  std::vector<int> labels(40);
  for (int i = 0; i < 20; ++i) {
    preds.at(i, 0) = 0.9;
    preds.at(i, 1) = 0.1;
    labels[static_cast<std::size_t>(i)] = i < 10 ? 0 : 1;
  }
  for (int i = 20; i < 40; ++i) {
    preds.at(i, 0) = 0.2;
    preds.at(i, 1) = 0.8;
    labels[static_cast<std::size_t>(i)] = i < 24 ? 0 : 1;
  }
  auto map = fit_multiclass_calibrator(preds, labels, 2);
  REQUIRE(map.classes() == 2);
  CHECK_FALSE(map.entries[0].identity);
  CHECK(apply_calibration(map.entries[0], 0.9) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(apply_calibration(map.entries[0], 0.2) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(apply_calibration(map.entries[1], 0.1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(apply_calibration(map.entries[1], 0.8) == doctest::Approx(0.8).epsilon(1e-12));

  auto row = calibrate_row(map, preds.row(0));
  CHECK(row[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(row[1] == doctest::Approx(0.5).epsilon(1e-9));
  auto batch = calibrate_batch(map, preds);
  CHECK(SoftLabelMatrix(batch).row_stochastic());
}

TEST_CASE("sparse classes fall back to the identity map") {
  Matrix preds(14, 2);
  std::vector<int> labels(14);
  for (int i = 0; i < 14; ++i) {
    preds.at(i, 0) = 0.1 + 0.05 * i;
    preds.at(i, 1) = 1.0 - preds.at(i, 0);
    labels[static_cast<std::size_t>(i)] = i < 3 ? 0 : 1;  // class 0 has 3 < 10 positives
  }
  auto map = fit_multiclass_calibrator(preds, labels, 2);
  CHECK(map.entries[0].identity);
  CHECK_FALSE(map.entries[1].identity);
}

TEST_CASE("calibrated rows are floored and renormalized") {
  CalibrationMap map;
  map.entries.resize(2);
  map.entries[0].identity = true;
  map.entries[1].identity = true;
  std::vector<double> pred{1.0, 0.0};
  auto row = calibrate_row(map, pred);
  CHECK(row[1] > 0.0);
  CHECK(row[1] == doctest::Approx(1e-6).epsilon(1e-3));
  CHECK(row[0] + row[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expected calibration error in percent") {
  // Row 1: conf 0.9 correct; row 2: conf 0.8 wrong.
  Matrix preds(2, 2);
  preds.at(0, 0) = 0.9;
  preds.at(0, 1) = 0.1;
  preds.at(1, 0) = 0.8;
  preds.at(1, 1) = 0.2;
  std::vector<int> labels{0, 1};

  // One bin: |acc 0.5 - conf 0.85| = 0.35 -> 35%.
  CHECK(expected_calibration_error(preds, labels, 1) == doctest::Approx(35.0).epsilon(1e-12));
  // Fifteen bins: the rows land in different bins, each half the mass:
  // 0.5*|1-0.9| + 0.5*|0-0.8| -> 45%.
  CHECK(expected_calibration_error(preds, labels, 15) == doctest::Approx(45.0).epsilon(1e-12));
}

TEST_CASE("reliability report matches the ece and partitions rows") {
  RngStream rng(202);
  const int n = 500;
  Matrix preds(n, 3);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto p = oracle::random_simplex(3, rng);
    std::copy(p.begin(), p.end(), preds.row(i).begin());
    labels[static_cast<std::size_t>(i)] = rng.uniform_int(3);
  }
  auto report = reliability_report(preds, labels, 15);
  REQUIRE(report.bins.size() == 15);
  int total = 0;
  for (const auto& bin : report.bins) {
    total += bin.count;
    if (bin.count == 0) {
      CHECK(std::isnan(bin.mean_conf));
      CHECK(std::isnan(bin.accuracy));
    } else {
      CHECK(bin.mean_conf >= bin.lo - 1e-12);
    }
  }
  CHECK(total == n);
  CHECK(report.ece == doctest::Approx(expected_calibration_error(preds, labels, 15)).epsilon(1e-12));

  // Confidence 1.0 belongs to the last bin, not past it.
  Matrix certain(1, 2);
  certain.at(0, 0) = 1.0;
  auto edge = reliability_report(certain, {0}, 10);
  CHECK(edge.bins.back().count == 1);
}

TEST_CASE("reliability csv carries an ece footer") {
  ReliabilityReport report;
  report.bins.push_back({0.0, 0.5, 2, 0.4, 0.5});
  report.bins.push_back({0.5, 1.0, 0, std::nan(""), std::nan("")});
  report.ece = 12.5;
  auto dir = std::filesystem::temp_directory_path() /
             ("colabel_cal_test_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  auto path = (dir / "bins.csv").string();
  save_reliability_csv(report, path);
  auto table = read_csv(path);
  CHECK(table.header ==
        std::vector<std::string>{"bin_lo", "bin_hi", "count", "mean_conf", "accuracy"});
  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[1][3] == "nan");
  CHECK(table.rows[2][0] == "ece");
  CHECK(parse_double(table.rows[2][4], "t") == 12.5);
  std::filesystem::remove_all(dir);
}
