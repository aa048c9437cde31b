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

#ifndef INFERCAL_REPORTS_HPP
#define INFERCAL_REPORTS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "infercal/analysis.hpp"
#include "infercal/calibration.hpp"
#include "infercal/ter.hpp"

namespace infercal {

inline constexpr const char* kToolVersion = "1.0.0";

// Identity of one tool invocation. The id hashes everything that determines
// the outputs (subcommand, canonical config, seed, tool version); timestamps
// and input paths are recorded for provenance but stay out of the id so that
// reruns produce byte-identical report files.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> inputs;
  std::string config;  // canonical (sorted-key) JSON of the effective config
  std::uint64_t seed = 0;
  std::string version = kToolVersion;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;

  std::string id() const;
};

void write_manifest(const RunManifest& manifest, const std::string& path);

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// --- prediction sidecar ---------------------------------------------------
// TSV `token<TAB>confidence<TAB>correct<TAB>label`, one row per token, a
// blank line between sentences, `# manifest: <id>` comment, header row.
// Training-mode predictions have no TER label and write "-".
void write_predictions(const std::vector<Prediction>& preds, const std::string& path,
                       const std::string& manifest_id);

struct PredictionFile {
  std::vector<Prediction> predictions;
  std::string manifest_id;  // empty if the file carries none
};

PredictionFile read_predictions(const std::string& path);

// --- token label files ------------------------------------------------------
// One line per sentence, space-separated labels (C, S, I, with +D suffix).
void write_labels_file(const std::vector<std::vector<TokenLabel>>& labels,
                       const std::string& path, const std::string& manifest_id);
std::vector<std::vector<TokenLabel>> read_labels_file(const std::string& path);

// --- confidence sidecar -----------------------------------------------------
// One line per sentence, space-separated probabilities (end symbol last).
void write_confidences(const std::vector<std::vector<double>>& confs,
                       const std::string& path, const std::string& manifest_id);
std::vector<std::vector<double>> read_confidences(const std::string& path);

// --- calibration reports ------------------------------------------------------
void write_diagram_tsv(const std::vector<DiagramRow>& rows, const std::string& path,
                       const std::string& manifest_id);

// JSON report: bins, ece, n, plus the evaluation mode ("training"/"inference").
void write_ece_json(const EceReport& report, const std::string& mode,
                    const std::string& path, const std::string& manifest_id);

// --- analysis reports ----------------------------------------------------------
struct CorrelationTable {
  std::vector<std::string> row_names;  // translation categories
  std::vector<std::string> col_names;  // calibration categories
  std::vector<std::vector<double>> values;
};

CorrelationTable build_correlation_table(const IndicatorSet& indicators);

void write_correlation_tsv(const CorrelationTable& table, const std::string& path,
                           const std::string& manifest_id);

// Rows `attribute<TAB>bucket<TAB>overall<TAB>subset<TAB>relative_change`,
// attributes in the given order.
void write_bucket_tsv(
    const std::vector<std::pair<std::string, std::vector<BucketReport>>>& attributes,
    const std::string& path, const std::string& manifest_id);

// --- training curves -------------------------------------------------------------
void write_loss_curve(const std::vector<double>& losses, const std::string& path,
                      const std::string& manifest_id);

}  // namespace infercal

#endif  // INFERCAL_REPORTS_HPP
