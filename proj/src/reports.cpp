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

#include "infercal/reports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "infercal/util.hpp"
#include "json.hpp"

namespace infercal {

namespace {

constexpr const char* kPredictionHeader = "token\tconfidence\tcorrect\tlabel";

std::ofstream open_out(const std::string& path) {
  // Binary mode keeps newlines byte-stable across platforms.
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  return out;
}

void check_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out.good()) throw UsageError("failed while writing '" + path + "'");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  return in;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_comment(const std::string& line) {
  return line == "#" || line.rfind("# ", 0) == 0;
}

// Returns the manifest id if the line is a manifest comment.
bool manifest_comment(const std::string& line, std::string* id) {
  constexpr const char* kPrefix = "# manifest:";
  if (line.rfind(kPrefix, 0) != 0) return false;
  *id = trim(line.substr(std::string(kPrefix).size()));
  return true;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double_field(const std::string& text, const std::string& file, std::size_t lineno) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(file, lineno, "malformed real number '" + text + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;  // 64 bytes always suffice for the shortest form
  return std::string(buf, ptr);
}

std::string RunManifest::id() const {
  return fnv1a_hex(subcommand + '\n' + config + '\n' + std::to_string(seed) + '\n' + version);
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["id"] = manifest.id();
  j["subcommand"] = manifest.subcommand;
  j["inputs"] = manifest.inputs;
  j["config"] = nlohmann::json::parse(manifest.config);
  j["seed"] = manifest.seed;
  j["version"] = manifest.version;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  check_out(out, path);
}

// --- prediction sidecar -------------------------------------------------------

void write_predictions(const std::vector<Prediction>& preds, const std::string& path,
                       const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  out << kPredictionHeader << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (i > 0 && preds[i].sentence_index != preds[i - 1].sentence_index) out << '\n';
    const Prediction& p = preds[i];
    out << p.token << '\t' << format_double(p.confidence) << '\t' << (p.correct ? '1' : '0')
        << '\t' << (p.label ? label_to_string(*p.label) : "-") << '\n';
  }
  check_out(out, path);
}

PredictionFile read_predictions(const std::string& path) {
  std::ifstream in = open_in(path);
  PredictionFile out;
  std::vector<std::vector<Prediction>> groups;
  std::vector<Prediction> cur;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    std::string id;
    if (manifest_comment(line, &id)) {
      out.manifest_id = id;
      continue;
    }
    if (is_comment(line)) continue;
    if (line.empty()) {
      if (!cur.empty()) groups.push_back(std::exchange(cur, {}));
      continue;
    }
    if (!header_seen && line == kPredictionHeader) {
      header_seen = true;
      continue;
    }
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 4) {
      throw ParseError(path, lineno, "expected 4 tab-separated fields, got " +
                                         std::to_string(fields.size()));
    }
    Prediction p;
    p.token = fields[0];
    p.confidence = parse_double_field(fields[1], path, lineno);
    if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
      throw ParseError(path, lineno, "confidence " + fields[1] + " outside [0,1]");
    }
    if (fields[2] == "1") {
      p.correct = true;
    } else if (fields[2] == "0") {
      p.correct = false;
    } else {
      throw ParseError(path, lineno, "correct flag must be 0 or 1, got '" + fields[2] + "'");
    }
    if (fields[3] != "-") {
      try {
        p.label = label_from_string(fields[3]);
      } catch (const UsageError& e) {
        throw ParseError(path, lineno, e.what());
      }
    }
    cur.push_back(std::move(p));
  }
  if (!cur.empty()) groups.push_back(std::move(cur));

  for (std::size_t s = 0; s < groups.size(); ++s) {
    for (std::size_t i = 0; i < groups[s].size(); ++i) {
      Prediction& p = groups[s][i];
      p.sentence_index = static_cast<int>(s);
      p.position_index = static_cast<int>(i);
      p.sentence_length = static_cast<int>(groups[s].size());
      out.predictions.push_back(std::move(p));
    }
  }
  return out;
}

// --- token label files -----------------------------------------------------------

void write_labels_file(const std::vector<std::vector<TokenLabel>>& labels,
                       const std::string& path, const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  for (const std::vector<TokenLabel>& sentence : labels) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      if (i > 0) out << ' ';
      out << label_to_string(sentence[i]);
    }
    out << '\n';
  }
  check_out(out, path);
}

std::vector<std::vector<TokenLabel>> read_labels_file(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<TokenLabel>> all;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (is_comment(line)) continue;
    const std::vector<std::string> parts = split_ws(line);
    if (parts.empty()) throw ParseError(path, lineno, "blank label line");
    std::vector<TokenLabel> sentence;
    sentence.reserve(parts.size());
    for (const std::string& part : parts) {
      try {
        sentence.push_back(label_from_string(part));
      } catch (const UsageError& e) {
        throw ParseError(path, lineno, e.what());
      }
    }
    all.push_back(std::move(sentence));
  }
  return all;
}

// --- confidence sidecar ----------------------------------------------------------

void write_confidences(const std::vector<std::vector<double>>& confs,
                       const std::string& path, const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  for (const std::vector<double>& row : confs) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  check_out(out, path);
}

std::vector<std::vector<double>> read_confidences(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> all;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (is_comment(line)) continue;
    const std::vector<std::string> parts = split_ws(line);
    if (parts.empty()) throw ParseError(path, lineno, "blank confidence line");
    std::vector<double> row;
    row.reserve(parts.size());
    for (const std::string& part : parts) row.push_back(parse_double_field(part, path, lineno));
    all.push_back(std::move(row));
  }
  return all;
}

// --- calibration reports ------------------------------------------------------------

void write_diagram_tsv(const std::vector<DiagramRow>& rows, const std::string& path,
                       const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  out << "bin_center\tavg_conf\tavg_acc\tgap\tcount\n";
  for (const DiagramRow& r : rows) {
    out << format_double(r.bin_center) << '\t' << format_double(r.avg_confidence) << '\t'
        << format_double(r.avg_accuracy) << '\t' << format_double(r.gap) << '\t' << r.count
        << '\n';
  }
  check_out(out, path);
}

void write_ece_json(const EceReport& report, const std::string& mode, const std::string& path,
                    const std::string& manifest_id) {
  nlohmann::json bins = nlohmann::json::array();
  for (const CalibrationBin& b : report.bins) {
    bins.push_back({{"lower", b.lower},
                    {"upper", b.upper},
                    {"count", b.count},
                    {"avg_confidence", b.avg_confidence},
                    {"avg_accuracy", b.avg_accuracy}});
  }
  nlohmann::json j;
  j["manifest"] = manifest_id;
  j["mode"] = mode;
  j["n"] = report.n;
  j["ece"] = report.ece;
  j["bins"] = bins;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  check_out(out, path);
}

// --- analysis reports -----------------------------------------------------------

namespace {

bool all_zero(const IndicatorVector& v) {
  for (std::uint8_t x : v) {
    if (x != 0) return false;
  }
  return true;
}

}  // namespace

CorrelationTable build_correlation_table(const IndicatorSet& indicators) {
  CorrelationTable table;
  const auto rows = indicators.translation_vectors();
  const auto cols = indicators.calibration_vectors();
  for (const auto& [name, vec] : rows) {
    (void)vec;
    table.row_names.push_back(name);
  }
  for (const auto& [name, vec] : cols) {
    (void)vec;
    table.col_names.push_back(name);
  }
  for (const auto& [rname, rvec] : rows) {
    (void)rname;
    std::vector<double> line;
    for (const auto& [cname, cvec] : cols) {
      (void)cname;
      // Degenerate (all-zero) categories have no direction to compare with.
      if (all_zero(*rvec) || all_zero(*cvec)) {
        line.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        line.push_back(cosine(*rvec, *cvec));
      }
    }
    table.values.push_back(std::move(line));
  }
  return table;
}

void write_correlation_tsv(const CorrelationTable& table, const std::string& path,
                           const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  out << "type";
  for (const std::string& c : table.col_names) out << '\t' << c;
  out << '\n';
  for (std::size_t r = 0; r < table.row_names.size(); ++r) {
    out << table.row_names[r];
    for (double v : table.values[r]) out << '\t' << format_double(v);
    out << '\n';
  }
  check_out(out, path);
}

void write_bucket_tsv(
    const std::vector<std::pair<std::string, std::vector<BucketReport>>>& attributes,
    const std::string& path, const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  out << "attribute\tbucket\toverall\tsubset\trelative_change\n";
  for (const auto& [attribute, reports] : attributes) {
    for (const BucketReport& r : reports) {
      out << attribute << '\t' << r.bucket << '\t' << format_double(r.overall_proportion)
          << '\t' << format_double(r.subset_proportion) << '\t'
          << format_double(r.relative_change) << '\n';
    }
  }
  check_out(out, path);
}

// --- training curves ------------------------------------------------------------

void write_loss_curve(const std::vector<double>& losses, const std::string& path,
                      const std::string& manifest_id) {
  std::ofstream out = open_out(path);
  out << "# manifest: " << manifest_id << '\n';
  out << "step\tloss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << (i + 1) << '\t' << format_double(losses[i]) << '\n';
  }
  check_out(out, path);
}

}  // namespace infercal
