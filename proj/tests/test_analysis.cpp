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

#include <cmath>
#include <string>
#include <vector>

#include "infercal/analysis.hpp"
#include "infercal/corpus.hpp"
#include "infercal/util.hpp"

using namespace infercal;

namespace {

Prediction labeled(double confidence, const std::string& label_text) {
  Prediction p;
  p.confidence = confidence;
  p.label = label_from_string(label_text);
  p.correct = p.label->value == LabelValue::C;
  return p;
}

}  // namespace

TEST_CASE("cosine of hand-checked vectors") {
  CHECK(cosine({1, 0, 1}, {1, 1, 0}) == doctest::Approx(0.5));
  CHECK(cosine({1, 1}, {1, 1}) == doctest::Approx(1.0));
  CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(cosine({0, 0}, {1, 0}), ComputeError);
  CHECK_THROWS_AS(cosine({1, 0}, {1}), ComputeError);
}

TEST_CASE("relative change reproduces the worked percentage") {
  const double rc = relative_change(0.773, 0.876);
  CHECK(std::fabs(rc * 100.0 - (-11.76)) <= 0.01);
  CHECK(relative_change(0.5, 0.5) == doctest::Approx(0.0));
  CHECK(relative_change(1.0, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("indicators split labels into the error categories") {
  const std::vector<Prediction> preds{
      labeled(0.9, "C"),    // correct
      labeled(0.9, "S"),    // mis-translation
      labeled(0.9, "I"),    // over-translation
      labeled(0.9, "C+D"),  // correct, under-translation adjacent
      labeled(0.9, "S+D"),  // mis-translation and under-translation
  };
  const std::vector<CalibrationClass> classes{
      CalibrationClass::Well, CalibrationClass::Over, CalibrationClass::Over,
      CalibrationClass::Under, CalibrationClass::Well};

  const IndicatorSet set = build_indicators(preds, classes);
  CHECK(set.correct == IndicatorVector{1, 0, 0, 1, 0});
  CHECK(set.mis == IndicatorVector{0, 1, 0, 0, 1});
  CHECK(set.overtrans == IndicatorVector{0, 0, 1, 0, 0});
  CHECK(set.undertrans == IndicatorVector{0, 0, 0, 1, 1});
  CHECK(set.error == IndicatorVector{0, 1, 1, 1, 1});
  CHECK(set.well == IndicatorVector{1, 0, 0, 0, 1});
  CHECK(set.over == IndicatorVector{0, 1, 1, 0, 0});
  CHECK(set.under == IndicatorVector{0, 0, 0, 1, 0});
  CHECK(set.miscalibrated == IndicatorVector{0, 1, 1, 1, 0});

  // The narrow error set ignores the under-translation flag.
  const IndicatorSet narrow = build_indicators(preds, classes, ErrorSet::SubstInsert);
  CHECK(narrow.error == IndicatorVector{0, 1, 1, 0, 1});
}

TEST_CASE("indicators require labels and matching class counts") {
  Prediction unlabeled;
  unlabeled.confidence = 0.5;
  CHECK_THROWS_AS(build_indicators({unlabeled}, {CalibrationClass::Well}), ComputeError);
  CHECK_THROWS_AS(build_indicators({labeled(0.5, "C")}, {}), ComputeError);
}

TEST_CASE("correlation vector names match the report tables") {
  const IndicatorSet set =
      build_indicators({labeled(0.9, "C")}, {CalibrationClass::Well});
  std::vector<std::string> cal_names, tr_names;
  for (const auto& [name, vec] : set.calibration_vectors()) cal_names.push_back(name);
  for (const auto& [name, vec] : set.translation_vectors()) tr_names.push_back(name);
  CHECK(cal_names == std::vector<std::string>{"Well-Cali.", "Over-Est.", "Under-Est.",
                                              "Mis-Cali."});
  CHECK(tr_names == std::vector<std::string>{"Correct", "Mis-Tra.", "Over-Tra.",
                                             "Under-Tra.", "Error"});
}

TEST_CASE("frequency buckets follow rank thresholds and unknown tokens fall to Low") {
  VocabStats stats;
  stats.counts = {{"the", 100}, {"cat", 10}, {"sat", 5}, {"mat", 1}};
  stats.rank = {{"the", 1}, {"cat", 2}, {"sat", 3}, {"mat", 4}};
  CHECK(frequency_bucket("the", stats, 1, 3) == FreqBucket::High);
  CHECK(frequency_bucket("cat", stats, 1, 3) == FreqBucket::Medium);
  CHECK(frequency_bucket("sat", stats, 1, 3) == FreqBucket::Medium);
  CHECK(frequency_bucket("mat", stats, 1, 3) == FreqBucket::Low);
  CHECK(frequency_bucket("dog", stats, 1, 3) == FreqBucket::Low);
  CHECK_THROWS_AS(frequency_bucket("the", stats, 3, 3), UsageError);
}

TEST_CASE("default frequency thresholds scale down for small vocabularies") {
  const auto [hi_small, mid_small] = default_frequency_thresholds(100);
  CHECK(hi_small == 6);
  CHECK(mid_small == 24);
  const auto [hi_big, mid_big] = default_frequency_thresholds(50000);
  CHECK(hi_big == 3000);
  CHECK(mid_big == 12000);
}

TEST_CASE("position buckets split a sentence into thirds") {
  CHECK(position_bucket(0, 9) == PositionBucket::Left);
  CHECK(position_bucket(2, 9) == PositionBucket::Left);
  CHECK(position_bucket(3, 9) == PositionBucket::Middle);
  CHECK(position_bucket(5, 9) == PositionBucket::Middle);
  CHECK(position_bucket(6, 9) == PositionBucket::Right);
  CHECK(position_bucket(8, 9) == PositionBucket::Right);
  CHECK(position_bucket(0, 1) == PositionBucket::Left);
}

TEST_CASE("fertility classes count aligned source tokens") {
  // Alignment links are (source, target) index pairs.
  Alignment alignment{{0, 0}, {1, 0}, {2, 1}, {2, 2}, {3, 3}};
  // Target 0 aligns to two sources.
  CHECK(fertility_class(0, alignment, 5) == FertilityClass::TwoPlus);
  // Targets 1 and 2 share source 2, which spreads over two targets.
  CHECK(fertility_class(1, alignment, 5) == FertilityClass::Fractional);
  CHECK(fertility_class(2, alignment, 5) == FertilityClass::Fractional);
  // Target 3 aligns to exactly one dedicated source.
  CHECK(fertility_class(3, alignment, 5) == FertilityClass::One);
  // Target 4 aligns to nothing.
  CHECK(fertility_class(4, alignment, 5) == FertilityClass::Zero);
}

TEST_CASE("part-of-speech tags map onto the report categories") {
  CHECK(pos_category("NN") == PosCategory::Noun);
  CHECK(pos_category("NNS") == PosCategory::Noun);
  CHECK(pos_category("VBZ") == PosCategory::Verb);
  CHECK(pos_category("JJ") == PosCategory::Adj);
  CHECK(pos_category("IN") == PosCategory::Prep);
  CHECK(pos_category("DT") == PosCategory::Dete);
  CHECK(pos_category("SYM") == PosCategory::Punc);
  CHECK(pos_category("FW") == PosCategory::Others);
  CHECK(pos_category("made-up-tag") == PosCategory::Others);
}

TEST_CASE("granularity marks sub-word pieces and their continuations") {
  const Sentence s = make_sentence({"pre@@", "fix", "word"}, "@@");
  CHECK(granularity_class(s, 0) == GranularityClass::SubWord);
  CHECK(granularity_class(s, 1) == GranularityClass::SubWord);
  CHECK(granularity_class(s, 2) == GranularityClass::FullWord);
}

TEST_CASE("bucket proportions and relative changes are exact fractions") {
  const std::vector<std::string> buckets{"high", "high", "low", "low", "low", "high"};
  const std::vector<CalibrationClass> classes{
      CalibrationClass::Over, CalibrationClass::Well, CalibrationClass::Over,
      CalibrationClass::Well, CalibrationClass::Over, CalibrationClass::Well};
  const auto rows =
      bucket_report(buckets, classes, CalibrationClass::Over, {"high", "medium", "low"});
  REQUIRE(rows.size() == 2);  // no "medium" data, so no row
  CHECK(rows[0].bucket == "high");
  CHECK(rows[0].overall_proportion == doctest::Approx(0.5));
  CHECK(rows[0].subset_proportion == doctest::Approx(1.0 / 3.0));
  CHECK(rows[0].relative_change == doctest::Approx((1.0 / 3.0 - 0.5) / 0.5));
  CHECK(rows[1].bucket == "low");
  CHECK(rows[1].subset_proportion == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("an empty target class yields undefined subset columns") {
  const auto rows = bucket_report({"high", "low"},
                                  {CalibrationClass::Well, CalibrationClass::Well},
                                  CalibrationClass::Over, {"high", "medium", "low"});
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(std::isnan(row.subset_proportion));
    CHECK(std::isnan(row.relative_change));
    CHECK(row.overall_proportion == doctest::Approx(0.5));
  }
}

TEST_CASE("bucket names missing from the declared order are rejected") {
  CHECK_THROWS_AS(bucket_report({"mystery"}, {CalibrationClass::Over},
                                CalibrationClass::Over, {"high", "low"}),
                  ComputeError);
}
