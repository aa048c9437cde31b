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

#ifndef INFERCAL_ANALYSIS_HPP
#define INFERCAL_ANALYSIS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "infercal/calibration.hpp"
#include "infercal/corpus.hpp"

namespace infercal {

// One bit per hypothesis token over the whole evaluation set, corpus order.
using IndicatorVector = std::vector<std::uint8_t>;

double cosine(const IndicatorVector& u, const IndicatorVector& v);

// Which token labels count as a translation error: S, I and the mapped
// under-translation flag by default, or S and I only.
enum class ErrorSet { SubstInsertFlagged, SubstInsert };

// Per-token indicators for the calibration classes and the translation error
// categories; inputs must carry a TER label and a calibration class each.
struct IndicatorSet {
  IndicatorVector well, over, under, miscalibrated;
  IndicatorVector correct, mis, overtrans, undertrans, error;

  std::vector<std::pair<std::string, const IndicatorVector*>> calibration_vectors() const;
  std::vector<std::pair<std::string, const IndicatorVector*>> translation_vectors() const;
};

IndicatorSet build_indicators(const std::vector<Prediction>& preds,
                              const std::vector<CalibrationClass>& classes,
                              ErrorSet error_set = ErrorSet::SubstInsertFlagged);

// Signed fraction: (subset - overall) / overall.
double relative_change(double subset_prop, double overall_prop);

// --- linguistic attribute buckets -------------------------------------------

enum class FreqBucket { High, Medium, Low };
std::string freq_bucket_name(FreqBucket b);

// Thresholds are frequency ranks. Tokens outside the statistics fall to Low.
FreqBucket frequency_bucket(const std::string& surface, const VocabStats& stats,
                            std::size_t hi = 3000, std::size_t mid = 12000);

// Desk-scale vocabularies are far smaller than the standard 3000/12000 rank
// cutoffs; below 12000 types the thresholds scale to 6% / 24% of the vocabulary.
std::pair<std::size_t, std::size_t> default_frequency_thresholds(std::size_t vocab_size);

enum class PositionBucket { Left, Middle, Right };
std::string position_bucket_name(PositionBucket b);
PositionBucket position_bucket(int position_index, int sentence_length);

enum class FertilityClass { Zero, Fractional, One, TwoPlus };
std::string fertility_class_name(FertilityClass c);
FertilityClass fertility_class(int target_index, const Alignment& alignment,
                               int source_length);

enum class PosCategory { Noun, Verb, Adj, Prep, Dete, Punc, Others };
std::string pos_category_name(PosCategory c);
using TagsetMap = std::map<std::string, PosCategory>;
const TagsetMap& default_tagset();  // Penn-Treebank-style tags
PosCategory pos_category(const std::string& tag, const TagsetMap& tagset = default_tagset());

enum class GranularityClass { SubWord, FullWord };
std::string granularity_class_name(GranularityClass c);
// A token is a sub-word fragment if it carries the continuation marker or
// continues a marked token.
GranularityClass granularity_class(const Sentence& sentence, std::size_t index);

// --- bucket statistics -------------------------------------------------------

struct BucketReport {
  std::string bucket;
  double overall_proportion = 0.0;
  double subset_proportion = 0.0;
  double relative_change = 0.0;
};

// Proportion of each bucket over all predictions vs. over the predictions of
// one miscalibration class, with the relative change between the two. Buckets
// absent from the data produce no row.
std::vector<BucketReport> bucket_report(const std::vector<std::string>& bucket_of_pred,
                                        const std::vector<CalibrationClass>& class_of_pred,
                                        CalibrationClass target_class,
                                        const std::vector<std::string>& bucket_order);

}  // namespace infercal

#endif  // INFERCAL_ANALYSIS_HPP
