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

#include "infercal/calibration.hpp"

#include <cmath>

#include "infercal/util.hpp"

namespace infercal {

std::string calibration_class_name(CalibrationClass c) {
  switch (c) {
    case CalibrationClass::Well: return "well";
    case CalibrationClass::Over: return "over";
    case CalibrationClass::Under: return "under";
  }
  return "?";
}

int bin_index(double confidence, int m) {
  if (m < 1) throw UsageError("bin count must be at least 1");
  if (confidence < 0.0 || confidence > 1.0)
    throw ComputeError("confidence " + std::to_string(confidence) + " outside [0,1]");
  if (confidence <= 0.0) return 1;
  const int idx = static_cast<int>(std::ceil(confidence * m));
  return std::min(std::max(idx, 1), m);
}

std::vector<CalibrationBin> bin_predictions(const std::vector<Prediction>& preds, int m) {
  if (m < 1) throw UsageError("bin count must be at least 1");
  if (preds.empty()) throw UsageError("cannot bin an empty prediction set");

  std::vector<CalibrationBin> bins(m);
  for (int k = 0; k < m; ++k) {
    bins[k].lower = static_cast<double>(k) / m;
    bins[k].upper = static_cast<double>(k + 1) / m;
  }
  std::vector<double> conf_sum(m, 0.0), acc_sum(m, 0.0);
  for (const auto& p : preds) {
    const int k = bin_index(p.confidence, m) - 1;
    ++bins[k].count;
    conf_sum[k] += p.confidence;
    acc_sum[k] += p.correct ? 1.0 : 0.0;
  }
  for (int k = 0; k < m; ++k) {
    if (bins[k].count > 0) {
      bins[k].avg_confidence = conf_sum[k] / bins[k].count;
      bins[k].avg_accuracy = acc_sum[k] / bins[k].count;
    }
  }
  return bins;
}

double ece(const std::vector<CalibrationBin>& bins, std::size_t n) {
  std::size_t total = 0;
  for (const auto& b : bins) total += b.count;
  if (n == 0 || total != n)
    throw ComputeError("ECE sample count mismatch: bins hold " + std::to_string(total) +
                       ", caller claims " + std::to_string(n));
  double sum = 0.0;
  for (const auto& b : bins) {
    if (b.count == 0) continue;  // empty bins contribute nothing
    sum += (static_cast<double>(b.count) / static_cast<double>(n)) *
           std::abs(b.avg_accuracy - b.avg_confidence);
  }
  return sum;
}

EceReport make_ece_report(const std::vector<Prediction>& preds, int m) {
  EceReport report;
  report.bins = bin_predictions(preds, m);
  report.n = preds.size();
  report.ece = ece(report.bins, report.n);
  return report;
}

std::vector<CalibrationClass> classify_bins(const std::vector<CalibrationBin>& bins,
                                            double threshold) {
  if (threshold < 0.0) throw UsageError("classification threshold must be non-negative");
  std::vector<CalibrationClass> out(bins.size(), CalibrationClass::Well);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const auto& b = bins[k];
    const double gap = std::abs(b.avg_accuracy - b.avg_confidence);
    if (gap < threshold) continue;
    if (b.avg_confidence > b.avg_accuracy)
      out[k] = CalibrationClass::Over;
    else if (b.avg_confidence < b.avg_accuracy)
      out[k] = CalibrationClass::Under;
    // equal averages can only reach here at threshold 0; they stay Well
  }
  return out;
}

std::vector<CalibrationClass> classify_predictions(const std::vector<Prediction>& preds,
                                                   const std::vector<CalibrationBin>& bins,
                                                   double threshold) {
  const auto bin_class = classify_bins(bins, threshold);
  const int m = static_cast<int>(bins.size());
  std::vector<CalibrationClass> out;
  out.reserve(preds.size());
  for (const auto& p : preds) out.push_back(bin_class[bin_index(p.confidence, m) - 1]);
  return out;
}

std::vector<DiagramRow> reliability_diagram(const EceReport& report) {
  std::vector<DiagramRow> rows;
  rows.reserve(report.bins.size());
  for (const auto& b : report.bins) {
    DiagramRow row;
    row.bin_center = 0.5 * (b.lower + b.upper);
    row.avg_confidence = b.avg_confidence;
    row.avg_accuracy = b.avg_accuracy;
    row.gap = b.avg_confidence - b.avg_accuracy;
    row.count = b.count;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace infercal
