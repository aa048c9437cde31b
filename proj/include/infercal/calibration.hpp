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

#ifndef INFERCAL_CALIBRATION_HPP
#define INFERCAL_CALIBRATION_HPP

#include <optional>
#include <string>
#include <vector>

#include "infercal/ter.hpp"

namespace infercal {

// One generated (or teacher-forced) token with the model's confidence in it.
// `label` carries the TER annotation for inference-mode predictions and is
// absent in training mode, where `correct` is plain ground-truth matching.
struct Prediction {
  std::string token;
  double confidence = 0.0;
  bool correct = false;
  int position_index = 0;
  int sentence_length = 0;
  int sentence_index = 0;
  std::optional<TokenLabel> label;
};

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double avg_confidence = 0.0;
  double avg_accuracy = 0.0;
};

struct EceReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
  std::size_t n = 0;
};

enum class CalibrationClass { Well, Over, Under };

std::string calibration_class_name(CalibrationClass c);

// Equal-width bins over (0,1], upper bound inclusive; confidence 0 falls into
// the first bin. Returns the 1-based bin index.
int bin_index(double confidence, int m);

std::vector<CalibrationBin> bin_predictions(const std::vector<Prediction>& preds, int m);

// Eq.-style weighted average of per-bin |accuracy - confidence|. `n` must
// equal the total count over the bins.
double ece(const std::vector<CalibrationBin>& bins, std::size_t n);

EceReport make_ece_report(const std::vector<Prediction>& preds, int m);

// Bin-level gap rule: gaps below the threshold are well-calibrated, otherwise
// the sign of confidence - accuracy picks over- or under-estimation. Every
// prediction inherits its bin's class.
std::vector<CalibrationClass> classify_bins(const std::vector<CalibrationBin>& bins,
                                            double threshold);
std::vector<CalibrationClass> classify_predictions(const std::vector<Prediction>& preds,
                                                   const std::vector<CalibrationBin>& bins,
                                                   double threshold);

struct DiagramRow {
  double bin_center = 0.0;
  double avg_confidence = 0.0;
  double avg_accuracy = 0.0;
  double gap = 0.0;  // signed: confidence - accuracy
  std::size_t count = 0;
};

std::vector<DiagramRow> reliability_diagram(const EceReport& report);

}  // namespace infercal

#endif  // INFERCAL_CALIBRATION_HPP
