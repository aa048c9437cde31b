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

#include "infercal/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "infercal/util.hpp"

namespace infercal {

double cosine(const IndicatorVector& u, const IndicatorVector& v) {
  if (u.size() != v.size()) {
    throw ComputeError("cosine: vectors have different lengths (" +
                       std::to_string(u.size()) + " vs " + std::to_string(v.size()) + ")");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += static_cast<double>(u[i]) * v[i];
    nu += static_cast<double>(u[i]) * u[i];
    nv += static_cast<double>(v[i]) * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw ComputeError("cosine: zero vector has no direction");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

std::vector<std::pair<std::string, const IndicatorVector*>>
IndicatorSet::calibration_vectors() const {
  return {{"Well-Cali.", &well},
          {"Over-Est.", &over},
          {"Under-Est.", &under},
          {"Mis-Cali.", &miscalibrated}};
}

std::vector<std::pair<std::string, const IndicatorVector*>>
IndicatorSet::translation_vectors() const {
  return {{"Correct", &correct},
          {"Mis-Tra.", &mis},
          {"Over-Tra.", &overtrans},
          {"Under-Tra.", &undertrans},
          {"Error", &error}};
}

IndicatorSet build_indicators(const std::vector<Prediction>& preds,
                              const std::vector<CalibrationClass>& classes,
                              ErrorSet error_set) {
  if (preds.size() != classes.size()) {
    throw ComputeError("build_indicators: " + std::to_string(preds.size()) +
                       " predictions but " + std::to_string(classes.size()) + " classes");
  }
  IndicatorSet out;
  const std::size_t n = preds.size();
  for (IndicatorVector* v : {&out.well, &out.over, &out.under, &out.miscalibrated,
                             &out.correct, &out.mis, &out.overtrans, &out.undertrans,
                             &out.error}) {
    v->assign(n, 0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Prediction& p = preds[i];
    if (!p.label.has_value()) {
      std::ostringstream os;
      os << "build_indicators: token '" << p.token << "' (sentence " << p.sentence_index
         << ", position " << p.position_index << ") has no translation label";
      throw ComputeError(os.str());
    }
    switch (classes[i]) {
      case CalibrationClass::Well: out.well[i] = 1; break;
      case CalibrationClass::Over: out.over[i] = 1; out.miscalibrated[i] = 1; break;
      case CalibrationClass::Under: out.under[i] = 1; out.miscalibrated[i] = 1; break;
    }
    const TokenLabel& lbl = *p.label;
    switch (lbl.value) {
      case LabelValue::C: out.correct[i] = 1; break;
      case LabelValue::S: out.mis[i] = 1; break;
      case LabelValue::I: out.overtrans[i] = 1; break;
    }
    if (lbl.under_translation_adjacent) out.undertrans[i] = 1;
    bool is_error = lbl.value == LabelValue::S || lbl.value == LabelValue::I;
    if (error_set == ErrorSet::SubstInsertFlagged && lbl.under_translation_adjacent) {
      is_error = true;
    }
    if (is_error) out.error[i] = 1;
  }
  return out;
}

double relative_change(double subset_prop, double overall_prop) {
  if (!(overall_prop > 0.0)) {
    throw ComputeError("relative_change: overall proportion must be positive, got " +
                       std::to_string(overall_prop));
  }
  return (subset_prop - overall_prop) / overall_prop;
}

// --- linguistic attribute buckets -------------------------------------------

std::string freq_bucket_name(FreqBucket b) {
  switch (b) {
    case FreqBucket::High: return "high";
    case FreqBucket::Medium: return "medium";
    case FreqBucket::Low: return "low";
  }
  throw ComputeError("freq_bucket_name: invalid bucket");
}

FreqBucket frequency_bucket(const std::string& surface, const VocabStats& stats,
                            std::size_t hi, std::size_t mid) {
  if (hi >= mid) {
    throw UsageError("frequency thresholds must satisfy high < medium, got " +
                     std::to_string(hi) + " >= " + std::to_string(mid));
  }
  auto it = stats.rank.find(surface);
  if (it == stats.rank.end()) return FreqBucket::Low;
  std::size_t r = it->second;
  if (r <= hi) return FreqBucket::High;
  if (r <= mid) return FreqBucket::Medium;
  return FreqBucket::Low;
}

std::pair<std::size_t, std::size_t> default_frequency_thresholds(std::size_t vocab_size) {
  if (vocab_size >= 12000) return {3000, 12000};
  auto scaled = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(vocab_size)));
  };
  std::size_t hi = std::max<std::size_t>(1, scaled(0.06));
  std::size_t mid = std::max<std::size_t>(hi + 1, scaled(0.24));
  return {hi, mid};
}

std::string position_bucket_name(PositionBucket b) {
  switch (b) {
    case PositionBucket::Left: return "left";
    case PositionBucket::Middle: return "middle";
    case PositionBucket::Right: return "right";
  }
  throw ComputeError("position_bucket_name: invalid bucket");
}

PositionBucket position_bucket(int position_index, int sentence_length) {
  if (sentence_length <= 0) {
    throw ComputeError("position_bucket: sentence length must be positive, got " +
                       std::to_string(sentence_length));
  }
  if (position_index < 0 || position_index >= sentence_length) {
    throw ComputeError("position_bucket: position " + std::to_string(position_index) +
                       " outside sentence of length " + std::to_string(sentence_length));
  }
  int third = (3 * position_index) / sentence_length;
  switch (third) {
    case 0: return PositionBucket::Left;
    case 1: return PositionBucket::Middle;
    default: return PositionBucket::Right;
  }
}

std::string fertility_class_name(FertilityClass c) {
  switch (c) {
    case FertilityClass::Zero: return "0";
    case FertilityClass::Fractional: return "(0,1)";
    case FertilityClass::One: return "1";
    case FertilityClass::TwoPlus: return ">=2";
  }
  throw ComputeError("fertility_class_name: invalid class");
}

FertilityClass fertility_class(int target_index, const Alignment& alignment,
                               int source_length) {
  std::vector<int> sources;
  for (const auto& [s, t] : alignment) {
    if (s < 0 || s >= source_length) {
      throw ComputeError("fertility_class: alignment source index " + std::to_string(s) +
                         " outside source of length " + std::to_string(source_length));
    }
    if (t == target_index) sources.push_back(s);
  }
  if (sources.empty()) return FertilityClass::Zero;
  if (sources.size() >= 2) return FertilityClass::TwoPlus;
  // Exactly one source token: a full unit if this token is its only target,
  // a fraction if that source token is spread over several targets.
  int s = sources.front();
  std::size_t targets_of_s = 0;
  for (const auto& [src, tgt] : alignment) {
    (void)tgt;
    if (src == s) ++targets_of_s;
  }
  return targets_of_s > 1 ? FertilityClass::Fractional : FertilityClass::One;
}

std::string pos_category_name(PosCategory c) {
  switch (c) {
    case PosCategory::Noun: return "noun";
    case PosCategory::Verb: return "verb";
    case PosCategory::Adj: return "adj";
    case PosCategory::Prep: return "prep";
    case PosCategory::Dete: return "dete";
    case PosCategory::Punc: return "punc";
    case PosCategory::Others: return "others";
  }
  throw ComputeError("pos_category_name: invalid category");
}

const TagsetMap& default_tagset() {
  static const TagsetMap tagset = {
      {"NN", PosCategory::Noun},    {"NNS", PosCategory::Noun},
      {"NNP", PosCategory::Noun},   {"NNPS", PosCategory::Noun},
      {"VB", PosCategory::Verb},    {"VBD", PosCategory::Verb},
      {"VBG", PosCategory::Verb},   {"VBN", PosCategory::Verb},
      {"VBP", PosCategory::Verb},   {"VBZ", PosCategory::Verb},
      {"MD", PosCategory::Verb},
      {"JJ", PosCategory::Adj},     {"JJR", PosCategory::Adj},
      {"JJS", PosCategory::Adj},
      {"IN", PosCategory::Prep},    {"TO", PosCategory::Prep},
      {"DT", PosCategory::Dete},    {"PDT", PosCategory::Dete},
      {"WDT", PosCategory::Dete},
      {",", PosCategory::Punc},     {".", PosCategory::Punc},
      {":", PosCategory::Punc},     {";", PosCategory::Punc},
      {"``", PosCategory::Punc},    {"''", PosCategory::Punc},
      {"\"", PosCategory::Punc},    {"(", PosCategory::Punc},
      {")", PosCategory::Punc},     {"-LRB-", PosCategory::Punc},
      {"-RRB-", PosCategory::Punc}, {"HYPH", PosCategory::Punc},
      {"PUNC", PosCategory::Punc},  {"PUNCT", PosCategory::Punc},
      {"SYM", PosCategory::Punc},   {"$", PosCategory::Punc},
      {"#", PosCategory::Punc},
  };
  return tagset;
}

PosCategory pos_category(const std::string& tag, const TagsetMap& tagset) {
  auto it = tagset.find(tag);
  if (it != tagset.end()) return it->second;
  return PosCategory::Others;
}

std::string granularity_class_name(GranularityClass c) {
  switch (c) {
    case GranularityClass::SubWord: return "subword";
    case GranularityClass::FullWord: return "fullword";
  }
  throw ComputeError("granularity_class_name: invalid class");
}

GranularityClass granularity_class(const Sentence& sentence, std::size_t index) {
  if (index >= sentence.size()) {
    throw ComputeError("granularity_class: index " + std::to_string(index) +
                       " outside sentence of length " + std::to_string(sentence.size()));
  }
  if (sentence[index].is_subword) return GranularityClass::SubWord;
  if (index > 0 && sentence[index - 1].is_subword) return GranularityClass::SubWord;
  return GranularityClass::FullWord;
}

// --- bucket statistics -------------------------------------------------------

std::vector<BucketReport> bucket_report(const std::vector<std::string>& bucket_of_pred,
                                        const std::vector<CalibrationClass>& class_of_pred,
                                        CalibrationClass target_class,
                                        const std::vector<std::string>& bucket_order) {
  if (bucket_of_pred.size() != class_of_pred.size()) {
    throw ComputeError("bucket_report: " + std::to_string(bucket_of_pred.size()) +
                       " buckets but " + std::to_string(class_of_pred.size()) + " classes");
  }
  if (bucket_of_pred.empty()) {
    throw ComputeError("bucket_report: no predictions");
  }
  std::map<std::string, std::size_t> overall_counts, subset_counts;
  std::size_t subset_total = 0;
  for (std::size_t i = 0; i < bucket_of_pred.size(); ++i) {
    ++overall_counts[bucket_of_pred[i]];
    if (class_of_pred[i] == target_class) {
      ++subset_counts[bucket_of_pred[i]];
      ++subset_total;
    }
  }
  for (const auto& [name, cnt] : overall_counts) {
    (void)cnt;
    if (std::find(bucket_order.begin(), bucket_order.end(), name) == bucket_order.end()) {
      throw ComputeError("bucket_report: bucket '" + name + "' missing from bucket order");
    }
  }
  const double total = static_cast<double>(bucket_of_pred.size());
  std::vector<BucketReport> rows;
  for (const std::string& name : bucket_order) {
    auto it = overall_counts.find(name);
    if (it == overall_counts.end()) continue;  // bucket absent from the data
    BucketReport row;
    row.bucket = name;
    row.overall_proportion = static_cast<double>(it->second) / total;
    if (subset_total == 0) {
      // An empty subset has no defined composition; report that, not zeros.
      row.subset_proportion = std::numeric_limits<double>::quiet_NaN();
      row.relative_change = std::numeric_limits<double>::quiet_NaN();
    } else {
      auto sit = subset_counts.find(name);
      std::size_t sc = sit == subset_counts.end() ? 0 : sit->second;
      row.subset_proportion = static_cast<double>(sc) / static_cast<double>(subset_total);
      row.relative_change = relative_change(row.subset_proportion, row.overall_proportion);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace infercal
