// Copyright (c) 2026 The infercal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "infercal/calibration.hpp"
#include "infercal/util.hpp"

using namespace infercal;

namespace {

Prediction pred(double confidence, bool correct) {
  Prediction p;
  p.confidence = confidence;
  p.correct = correct;
  return p;
}

}  // namespace

TEST_CASE("bin index uses upper-inclusive equal-width bins over (0,1]") {
  CHECK(bin_index(0.05, 10) == 1);
  CHECK(bin_index(0.95, 10) == 10);
  CHECK(bin_index(0.1, 10) == 1);   // boundary belongs to the lower bin
  CHECK(bin_index(0.10000001, 10) == 2);
  CHECK(bin_index(0.0, 10) == 1);   // zero confidence still lands in bin 1
  CHECK(bin_index(1.0, 10) == 10);
}

TEST_CASE("binning averages a singleton bin exactly") {
  const auto bins = bin_predictions({pred(0.7, true)}, 10);
  REQUIRE(bins.size() == 10);
  CHECK(bins[6].count == 1);
  CHECK(bins[6].avg_confidence == doctest::Approx(0.7));
  CHECK(bins[6].avg_accuracy == doctest::Approx(1.0));
  std::size_t total = 0;
  for (const auto& b : bins) total += b.count;
  CHECK(total == 1);
}

TEST_CASE("the two-prediction case evaluates to exactly 0.3") {
  const EceReport r = make_ece_report({pred(0.8, true), pred(0.6, true)}, 10);
  CHECK(std::fabs(r.ece - 0.3) <= 1e-12);
}

TEST_CASE("uniformly 70%-correct predictions at confidence 0.7 are perfectly calibrated") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(pred(0.7, i < 7));
  CHECK(make_ece_report(preds, 10).ece == doctest::Approx(0.0));
}

TEST_CASE("a single bin holding everything gives its own gap as the ECE") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 20; ++i) preds.push_back(pred(0.9, i < 10));
  const EceReport r = make_ece_report(preds, 10);
  CHECK(r.ece == doctest::Approx(0.4));
}

TEST_CASE("ECE with one bin equals the overall accuracy-confidence gap") {
  RandomSource rng(5);
  std::vector<Prediction> preds;
  double conf_sum = 0.0;
  double acc_sum = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double c = rng.uniform();
    const bool ok = rng.bernoulli(0.5);
    preds.push_back(pred(c, ok));
    conf_sum += c;
    acc_sum += ok ? 1.0 : 0.0;
  }
  const double expect = std::fabs(acc_sum / 500.0 - conf_sum / 500.0);
  CHECK(make_ece_report(preds, 1).ece == doctest::Approx(expect));
}

TEST_CASE("ECE does not depend on prediction order") {
  RandomSource rng(6);
  std::vector<Prediction> preds;
  for (int i = 0; i < 300; ++i) preds.push_back(pred(rng.uniform(), rng.bernoulli(0.6)));
  const double before = make_ece_report(preds, 10).ece;
  rng.shuffle(preds);
  CHECK(make_ece_report(preds, 10).ece == doctest::Approx(before));
  CHECK(before >= 0.0);
  CHECK(before <= 1.0);
}

TEST_CASE("a large calibrated sample has near-zero ECE") {
  RandomSource rng(99);
  std::vector<Prediction> preds;
  preds.reserve(100000);
  for (int i = 0; i < 100000; ++i) {
    // Confidence equals the true per-bin accuracy by construction.
    const double c = 0.05 + 0.1 * static_cast<double>(rng.uniform_int(10));
    preds.push_back(pred(c, rng.uniform() < c));
  }
  CHECK(make_ece_report(preds, 10).ece <= 0.01);
}

TEST_CASE("classification follows the gap rule") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 5; ++i) preds.push_back(pred(0.8, i < 3));   // conf .8, acc .6
  for (int i = 0; i < 10; ++i) preds.push_back(pred(0.4, i < 7));  // conf .4, acc .7
  const auto bins = bin_predictions(preds, 10);
  const auto classes = classify_predictions(preds, bins, 0.15);
  REQUIRE(classes.size() == preds.size());
  for (int i = 0; i < 5; ++i) CHECK(classes[i] == CalibrationClass::Over);
  for (int i = 5; i < 15; ++i) CHECK(classes[i] == CalibrationClass::Under);
}

TEST_CASE("zero-gap bins are well-calibrated for any positive threshold") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(pred(0.5, i < 5));
  const auto bins = bin_predictions(preds, 10);
  for (const CalibrationClass c : classify_predictions(preds, bins, 1e-9)) {
    CHECK(c == CalibrationClass::Well);
  }
}

TEST_CASE("an infinite threshold makes everything well-calibrated") {
  std::vector<Prediction> preds{pred(0.9, false), pred(0.1, true), pred(0.5, true)};
  const auto bins = bin_predictions(preds, 10);
  for (const CalibrationClass c : classify_predictions(preds, bins, 1e9)) {
    CHECK(c == CalibrationClass::Well);
  }
}

TEST_CASE("a zero threshold classifies every nonzero gap by its sign") {
  std::vector<Prediction> preds{pred(0.9, false), pred(0.1, true)};
  const auto bins = bin_predictions(preds, 10);
  const auto classes = classify_predictions(preds, bins, 0.0);
  CHECK(classes[0] == CalibrationClass::Over);
  CHECK(classes[1] == CalibrationClass::Under);
}

TEST_CASE("the reliability diagram reports signed gaps") {
  std::vector<Prediction> preds;
  for (int i = 0; i < 10; ++i) preds.push_back(pred(0.8, true));  // conf .8, acc 1.0
  const auto rows = reliability_diagram(make_ece_report(preds, 10));
  REQUIRE(!rows.empty());
  bool found = false;
  for (const DiagramRow& row : rows) {
    if (row.count == 0) continue;
    found = true;
    CHECK(row.bin_center == doctest::Approx(0.75));
    CHECK(row.gap == doctest::Approx(-0.2));
  }
  CHECK(found);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(bin_predictions({pred(1.5, true)}, 10), ComputeError);
  CHECK_THROWS_AS(bin_predictions({pred(-0.1, true)}, 10), ComputeError);
  CHECK_THROWS_AS(bin_predictions({pred(0.5, true)}, 0), UsageError);
  CHECK_THROWS_AS(make_ece_report({}, 10), UsageError);
  CHECK_THROWS_AS(classify_bins({}, -0.1), UsageError);
  CHECK_THROWS_AS(ece({CalibrationBin{0.0, 0.1, 3, 0.5, 0.5}}, 2), ComputeError);
}
