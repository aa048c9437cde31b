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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "infercal/analysis.hpp"
#include "infercal/calibration.hpp"
#include "infercal/corpus.hpp"
#include "infercal/reports.hpp"
#include "infercal/smoothing.hpp"
#include "infercal/ter.hpp"
#include "infercal/toymodel.hpp"
#include "infercal/util.hpp"

namespace infercal {
namespace {

// --- small helpers ----------------------------------------------------------

std::string iso_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw UsageError("cannot create directory '" + dir + "': " + ec.message());
}

DeletionAttach parse_attach(const std::string& s) {
  if (s == "following") return DeletionAttach::Following;
  if (s == "preceding") return DeletionAttach::Preceding;
  throw UsageError("--d-attach must be 'following' or 'preceding', got '" + s + "'");
}

ErrorSet parse_error_set(const std::string& s) {
  if (s == "s+i+d") return ErrorSet::SubstInsertFlagged;
  if (s == "s+i") return ErrorSet::SubstInsert;
  throw UsageError("--error-set must be 's+i+d' or 's+i', got '" + s + "'");
}

CalibrationClass parse_target_class(const std::string& s) {
  if (s == "over") return CalibrationClass::Over;
  if (s == "under") return CalibrationClass::Under;
  if (s == "well") return CalibrationClass::Well;
  throw UsageError("--class must be 'over', 'under' or 'well', got '" + s + "'");
}

// Thresholds are quoted as percentages, matching how ECE values are reported.
double percent_to_fraction(double percent) {
  if (!(percent >= 0.0)) {
    throw UsageError("--threshold must be a non-negative percentage");
  }
  return percent / 100.0;
}

// --- benchmark configuration ---------------------------------------------------

// The default values ARE the default benchmark: a seeded synthetic corpus and
// model small enough to train on one core in a couple of minutes.
struct BenchmarkConfig {
  Benchmark bench;
  std::string smoothing = "none";
  std::string d_attach = "following";
};

void check_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  if (!j.is_object()) throw UsageError("config: " + where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw UsageError("config: unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const std::exception&) {
    throw UsageError("config: bad value for '" + std::string(key) + "' in " + where);
  }
}

BenchmarkConfig load_benchmark_config(const std::string& path) {
  BenchmarkConfig bc;
  if (path.empty()) return bc;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  check_keys(j,
             {"synthetic", "n_train", "n_dev", "model", "train", "smoothing", "beam", "bins",
              "max_shift", "d_attach"},
             "top level");
  if (j.contains("synthetic")) {
    const nlohmann::json& s = j["synthetic"];
    check_keys(s, {"vocab_size", "merge_pairs", "split_types", "noise_rate", "min_len",
                   "max_len", "seed"},
               "'synthetic'");
    read_field(s, "vocab_size", bc.bench.synthetic.vocab_size, "'synthetic'");
    read_field(s, "merge_pairs", bc.bench.synthetic.merge_pairs, "'synthetic'");
    read_field(s, "split_types", bc.bench.synthetic.split_types, "'synthetic'");
    read_field(s, "noise_rate", bc.bench.synthetic.noise_rate, "'synthetic'");
    read_field(s, "min_len", bc.bench.synthetic.min_len, "'synthetic'");
    read_field(s, "max_len", bc.bench.synthetic.max_len, "'synthetic'");
    read_field(s, "seed", bc.bench.synthetic.seed, "'synthetic'");
  }
  read_field(j, "n_train", bc.bench.n_train, "top level");
  read_field(j, "n_dev", bc.bench.n_dev, "top level");
  if (j.contains("model")) {
    const nlohmann::json& m = j["model"];
    check_keys(m, {"embed_dim", "hidden_dim", "encoder_layers", "decoder_layers",
                   "attention_heads", "dropout_rate", "max_len"},
               "'model'");
    read_field(m, "embed_dim", bc.bench.model.embed_dim, "'model'");
    read_field(m, "hidden_dim", bc.bench.model.hidden_dim, "'model'");
    read_field(m, "encoder_layers", bc.bench.model.encoder_layers, "'model'");
    read_field(m, "decoder_layers", bc.bench.model.decoder_layers, "'model'");
    read_field(m, "attention_heads", bc.bench.model.attention_heads, "'model'");
    read_field(m, "dropout_rate", bc.bench.model.dropout_rate, "'model'");
    read_field(m, "max_len", bc.bench.model.max_len, "'model'");
  }
  if (j.contains("train")) {
    const nlohmann::json& t = j["train"];
    check_keys(t, {"batch_size", "max_steps", "warmup_steps", "lr_factor", "beta1", "beta2",
                   "adam_eps", "seed"},
               "'train'");
    read_field(t, "batch_size", bc.bench.train.batch_size, "'train'");
    read_field(t, "max_steps", bc.bench.train.max_steps, "'train'");
    read_field(t, "warmup_steps", bc.bench.train.warmup_steps, "'train'");
    read_field(t, "lr_factor", bc.bench.train.lr_factor, "'train'");
    read_field(t, "beta1", bc.bench.train.beta1, "'train'");
    read_field(t, "beta2", bc.bench.train.beta2, "'train'");
    read_field(t, "adam_eps", bc.bench.train.adam_eps, "'train'");
    read_field(t, "seed", bc.bench.train.seed, "'train'");
  }
  read_field(j, "smoothing", bc.smoothing, "top level");
  read_field(j, "beam", bc.bench.beam, "top level");
  read_field(j, "bins", bc.bench.bins, "top level");
  read_field(j, "max_shift", bc.bench.max_shift, "top level");
  read_field(j, "d_attach", bc.d_attach, "top level");
  return bc;
}

nlohmann::json benchmark_to_json(const BenchmarkConfig& bc) {
  nlohmann::json j;
  j["synthetic"] = {{"vocab_size", bc.bench.synthetic.vocab_size},
                    {"merge_pairs", bc.bench.synthetic.merge_pairs},
                    {"split_types", bc.bench.synthetic.split_types},
                    {"noise_rate", bc.bench.synthetic.noise_rate},
                    {"min_len", bc.bench.synthetic.min_len},
                    {"max_len", bc.bench.synthetic.max_len},
                    {"seed", bc.bench.synthetic.seed}};
  j["n_train"] = bc.bench.n_train;
  j["n_dev"] = bc.bench.n_dev;
  j["model"] = {{"embed_dim", bc.bench.model.embed_dim},
                {"hidden_dim", bc.bench.model.hidden_dim},
                {"encoder_layers", bc.bench.model.encoder_layers},
                {"decoder_layers", bc.bench.model.decoder_layers},
                {"attention_heads", bc.bench.model.attention_heads},
                {"dropout_rate", bc.bench.model.dropout_rate},
                {"max_len", bc.bench.model.max_len}};
  j["train"] = {{"batch_size", bc.bench.train.batch_size}, {"max_steps", bc.bench.train.max_steps},
                {"warmup_steps", bc.bench.train.warmup_steps}, {"lr_factor", bc.bench.train.lr_factor},
                {"beta1", bc.bench.train.beta1},             {"beta2", bc.bench.train.beta2},
                {"adam_eps", bc.bench.train.adam_eps},       {"seed", bc.bench.train.seed}};
  j["smoothing"] = bc.smoothing;
  j["beam"] = bc.bench.beam;
  j["bins"] = bc.bench.bins;
  j["max_shift"] = bc.bench.max_shift;
  j["d_attach"] = bc.d_attach;
  return j;
}

void validate_benchmark(const BenchmarkConfig& bc) {
  bc.bench.synthetic.validate();
  bc.bench.model.validate();
  bc.bench.train.validate();
  parse_smoothing_flag(bc.smoothing);
  parse_attach(bc.d_attach);
  if (bc.bench.n_train < 1 || bc.bench.n_dev < 1) {
    throw UsageError("config: n_train and n_dev must be >= 1");
  }
  if (bc.bench.beam < 1) throw UsageError("config: beam must be >= 1");
  if (bc.bench.bins < 1) throw UsageError("config: bins must be >= 1");
  if (bc.bench.max_shift < 0) throw UsageError("config: max_shift must be >= 0");
}

// --- shared pipeline pieces ----------------------------------------------------

struct BenchmarkData {
  std::vector<ParallelPair> train_pairs, dev_pairs;
  std::vector<std::vector<bool>> dev_noise;
  Vocabulary src_vocab, tgt_vocab;
  std::vector<EncodedPair> train_data, dev_data;
};

BenchmarkData make_benchmark_data(const BenchmarkConfig& bc) {
  SyntheticCorpus corpus = generate_synthetic(bc.bench.synthetic, bc.bench.n_train + bc.bench.n_dev);
  BenchmarkData d;
  d.train_pairs.assign(corpus.pairs.begin(), corpus.pairs.begin() + bc.bench.n_train);
  d.dev_pairs.assign(corpus.pairs.begin() + bc.bench.n_train, corpus.pairs.end());
  d.dev_noise.assign(corpus.noise_mask.begin() + bc.bench.n_train, corpus.noise_mask.end());
  d.src_vocab = Vocabulary::from_tokens(corpus.src_tokens);
  d.tgt_vocab = Vocabulary::from_tokens(corpus.tgt_tokens);
  d.train_data = encode_pairs(d.train_pairs, d.src_vocab, d.tgt_vocab);
  d.dev_data = encode_pairs(d.dev_pairs, d.src_vocab, d.tgt_vocab);
  return d;
}

struct TrainedArtifacts {
  std::optional<ToyModel> first_pass;  // uniform-smoothing pass, graduated only
  std::vector<std::vector<double>> first_pass_confs;
  std::optional<ToyModel> model;
  TrainStats stats;
};

TrainedArtifacts run_training(const BenchmarkConfig& bc, const BenchmarkData& data) {
  TrainedArtifacts a;
  const SmoothingPolicy policy = parse_smoothing_flag(bc.smoothing);
  TrainConfig tc = bc.bench.train;
  tc.smoothing = policy;
  if (policy.kind == SmoothingKind::Graduated) {
    TrainConfig first = bc.bench.train;
    first.smoothing = SmoothingPolicy::uniform(0.1);
    a.first_pass.emplace(
        train_model(bc.bench.model, data.src_vocab, data.tgt_vocab, data.train_data, first));
    a.first_pass_confs = confidence_pass(*a.first_pass, data.train_data);
    a.model.emplace(train_model(bc.bench.model, data.src_vocab, data.tgt_vocab, data.train_data, tc,
                                &a.first_pass_confs, &a.stats));
  } else {
    a.model.emplace(train_model(bc.bench.model, data.src_vocab, data.tgt_vocab, data.train_data, tc,
                                nullptr, &a.stats));
  }
  return a;
}

// --- bucket helpers ------------------------------------------------------------

const std::vector<std::string> kFreqOrder{"high", "medium", "low"};
const std::vector<std::string> kPositionOrder{"left", "middle", "right"};
const std::vector<std::string> kFertilityOrder{"0", "(0,1)", "1", ">=2"};
const std::vector<std::string> kPosCatOrder{"noun", "verb",  "adj",   "prep",
                                            "dete", "punc", "others"};
const std::vector<std::string> kGranularityOrder{"subword", "fullword"};

std::vector<std::string> frequency_buckets_of(const std::vector<Prediction>& preds,
                                              const VocabStats& stats, std::size_t hi,
                                              std::size_t mid) {
  std::vector<std::string> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) {
    out.push_back(freq_bucket_name(frequency_bucket(p.token, stats, hi, mid)));
  }
  return out;
}

std::vector<std::string> position_buckets_of(const std::vector<Prediction>& preds) {
  std::vector<std::string> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) {
    out.push_back(position_bucket_name(position_bucket(p.position_index, p.sentence_length)));
  }
  return out;
}

// `sentences` is indexed by Prediction::sentence_index.
std::vector<std::string> granularity_buckets_of(const std::vector<Prediction>& preds,
                                                const std::vector<Sentence>& sentences) {
  std::vector<std::string> out;
  out.reserve(preds.size());
  for (const Prediction& p : preds) {
    if (p.sentence_index < 0 || p.sentence_index >= static_cast<int>(sentences.size())) {
      throw ComputeError("granularity: prediction sentence index " +
                         std::to_string(p.sentence_index) + " has no sentence");
    }
    out.push_back(granularity_class_name(granularity_class(
        sentences[static_cast<std::size_t>(p.sentence_index)],
        static_cast<std::size_t>(p.position_index))));
  }
  return out;
}

// Rebuild the per-sentence token sequences of a prediction file.
std::vector<Sentence> sentences_of_predictions(const std::vector<Prediction>& preds,
                                               const std::string& marker) {
  std::vector<std::vector<std::string>> groups;
  for (const Prediction& p : preds) {
    if (p.sentence_index == static_cast<int>(groups.size())) groups.emplace_back();
    if (p.sentence_index != static_cast<int>(groups.size()) - 1) {
      throw ComputeError("predictions are not grouped by sentence");
    }
    groups.back().push_back(p.token);
  }
  std::vector<Sentence> out;
  out.reserve(groups.size());
  for (const std::vector<std::string>& g : groups) out.push_back(make_sentence(g, marker));
  return out;
}

// --- subcommand: ter ---------------------------------------------------------------

struct TerArgs {
  std::string hyp, ref, out, attach = "following", marker = kDefaultSubwordMarker;
  std::string manifest;
  int max_shift = 50;
};

int cmd_ter(const TerArgs& args, std::uint64_t seed) {
  const DeletionAttach attach = parse_attach(args.attach);
  if (args.max_shift < 0) throw UsageError("--max-shift must be >= 0");
  const std::vector<Sentence> hyps = parse_corpus(args.hyp, args.marker);
  const std::vector<Sentence> refs = parse_corpus(args.ref, args.marker);
  if (hyps.size() != refs.size()) {
    throw UsageError("'" + args.hyp + "' has " + std::to_string(hyps.size()) + " sentences, '" +
                     args.ref + "' has " + std::to_string(refs.size()));
  }

  RunManifest man;
  man.subcommand = "ter";
  man.inputs = {args.hyp, args.ref};
  man.seed = seed;
  man.config = nlohmann::json{{"hyp", args.hyp},
                              {"ref", args.ref},
                              {"max_shift", args.max_shift},
                              {"d_attach", args.attach},
                              {"marker", args.marker}}
                   .dump();
  man.started_at = iso_now();

  std::vector<std::vector<TokenLabel>> labels;
  labels.reserve(hyps.size());
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const TerResult ter = ter_align(hyps[i], refs[i], args.max_shift);
    labels.push_back(map_deletions(ter, static_cast<int>(hyps[i].size()), attach));
  }
  man.finished_at = iso_now();

  write_labels_file(labels, args.out, man.id());
  write_manifest(man, args.manifest.empty() ? args.out + ".manifest.json" : args.manifest);
  return 0;
}

// --- subcommand: ece ---------------------------------------------------------------

struct EceArgs {
  std::string pred, out_json, out_diagram, mode = "training", manifest;
  int bins = 10;
};

int cmd_ece(const EceArgs& args, std::uint64_t seed) {
  if (args.bins < 1) throw UsageError("--bins must be >= 1");
  if (args.mode != "training" && args.mode != "inference") {
    throw UsageError("--mode must be 'training' or 'inference', got '" + args.mode + "'");
  }
  const PredictionFile pf = read_predictions(args.pred);
  if (pf.predictions.empty()) throw UsageError("no predictions in '" + args.pred + "'");

  RunManifest man;
  man.subcommand = "ece";
  man.inputs = {args.pred};
  man.seed = seed;
  man.config =
      nlohmann::json{{"pred", args.pred}, {"bins", args.bins}, {"mode", args.mode}}.dump();
  man.started_at = iso_now();

  const EceReport report = make_ece_report(pf.predictions, args.bins);
  man.finished_at = iso_now();

  write_ece_json(report, args.mode, args.out_json, man.id());
  write_diagram_tsv(reliability_diagram(report), args.out_diagram, man.id());
  write_manifest(man, args.manifest.empty() ? args.out_json + ".manifest.json" : args.manifest);
  return 0;
}

// --- subcommand: correlate ------------------------------------------------------------

struct CorrelateArgs {
  std::string pred, labels, out, error_set = "s+i+d", manifest;
  double threshold = 0.0;  // percent
  int bins = 10;
};

void attach_labels_from_file(std::vector<Prediction>& preds, const std::string& labels_path) {
  const std::vector<std::vector<TokenLabel>> labels = read_labels_file(labels_path);
  std::size_t sentence = 0;
  std::size_t pos = 0;
  int last_index = -1;
  for (Prediction& p : preds) {
    if (p.sentence_index != last_index) {
      if (last_index >= 0) {
        if (pos != labels[sentence].size()) {
          throw UsageError("'" + labels_path + "': sentence " + std::to_string(sentence + 1) +
                           " has " + std::to_string(labels[sentence].size()) +
                           " labels for " + std::to_string(pos) + " predictions");
        }
        ++sentence;
      }
      last_index = p.sentence_index;
      pos = 0;
    }
    if (sentence >= labels.size()) {
      throw UsageError("'" + labels_path + "': fewer label lines than prediction sentences");
    }
    if (pos >= labels[sentence].size()) {
      throw UsageError("'" + labels_path + "': sentence " + std::to_string(sentence + 1) +
                       " has " + std::to_string(labels[sentence].size()) +
                       " labels but more predictions");
    }
    p.label = labels[sentence][pos];
    p.correct = (p.label->value == LabelValue::C);
    ++pos;
  }
  if (!preds.empty()) {
    if (pos != labels[sentence].size()) {
      throw UsageError("'" + labels_path + "': sentence " + std::to_string(sentence + 1) +
                       " has " + std::to_string(labels[sentence].size()) + " labels for " +
                       std::to_string(pos) + " predictions");
    }
    ++sentence;
  }
  if (sentence != labels.size()) {
    throw UsageError("'" + labels_path + "': " + std::to_string(labels.size()) +
                     " label lines for " + std::to_string(sentence) + " prediction sentences");
  }
}

int cmd_correlate(const CorrelateArgs& args, std::uint64_t seed) {
  if (args.bins < 1) throw UsageError("--bins must be >= 1");
  const ErrorSet error_set = parse_error_set(args.error_set);
  const double threshold = percent_to_fraction(args.threshold);

  PredictionFile pf = read_predictions(args.pred);
  if (pf.predictions.empty()) throw UsageError("no predictions in '" + args.pred + "'");
  if (!args.labels.empty()) attach_labels_from_file(pf.predictions, args.labels);

  RunManifest man;
  man.subcommand = "correlate";
  man.inputs = {args.pred};
  if (!args.labels.empty()) man.inputs.push_back(args.labels);
  man.seed = seed;
  man.config = nlohmann::json{{"pred", args.pred},
                              {"labels", args.labels},
                              {"threshold", args.threshold},
                              {"bins", args.bins},
                              {"error_set", args.error_set}}
                   .dump();
  man.started_at = iso_now();

  const std::vector<CalibrationBin> bins = bin_predictions(pf.predictions, args.bins);
  const std::vector<CalibrationClass> classes =
      classify_predictions(pf.predictions, bins, threshold);
  const IndicatorSet indicators = build_indicators(pf.predictions, classes, error_set);
  const CorrelationTable table = build_correlation_table(indicators);
  man.finished_at = iso_now();

  write_correlation_tsv(table, args.out, man.id());
  write_manifest(man, args.manifest.empty() ? args.out + ".manifest.json" : args.manifest);
  return 0;
}

// --- subcommand: buckets ---------------------------------------------------------------

struct BucketsArgs {
  std::string pred, out, target_class = "over", manifest;
  std::vector<std::string> attributes{"frequency", "position", "granularity"};
  std::string stats_corpus, align, source, pos;
  bool synthetic_tags = false;
  std::string marker = kDefaultSubwordMarker;
  double threshold = 0.0;  // percent
  int bins = 10;
  std::size_t freq_hi = 0, freq_mid = 0;  // 0 = derive from vocabulary size
};

int cmd_buckets(const BucketsArgs& args, std::uint64_t seed) {
  if (args.bins < 1) throw UsageError("--bins must be >= 1");
  const CalibrationClass target = parse_target_class(args.target_class);
  const double threshold = percent_to_fraction(args.threshold);
  for (const std::string& a : args.attributes) {
    if (a != "frequency" && a != "position" && a != "fertility" && a != "pos" &&
        a != "granularity") {
      throw UsageError("unknown attribute '" + a +
                       "' (expected frequency, position, fertility, pos, granularity)");
    }
  }

  PredictionFile pf = read_predictions(args.pred);
  const std::vector<Prediction>& preds = pf.predictions;
  if (preds.empty()) throw UsageError("no predictions in '" + args.pred + "'");

  RunManifest man;
  man.subcommand = "buckets";
  man.inputs = {args.pred};
  man.seed = seed;
  man.config = nlohmann::json{{"pred", args.pred},
                              {"class", args.target_class},
                              {"attributes", args.attributes},
                              {"threshold", args.threshold},
                              {"bins", args.bins},
                              {"stats_corpus", args.stats_corpus},
                              {"align", args.align},
                              {"source", args.source},
                              {"pos", args.pos},
                              {"synthetic_tags", args.synthetic_tags},
                              {"freq_hi", args.freq_hi},
                              {"freq_mid", args.freq_mid},
                              {"marker", args.marker}}
                   .dump();
  man.started_at = iso_now();

  const std::vector<CalibrationBin> bins = bin_predictions(preds, args.bins);
  const std::vector<CalibrationClass> classes = classify_predictions(preds, bins, threshold);
  const std::vector<Sentence> sentences = sentences_of_predictions(preds, args.marker);

  std::vector<std::pair<std::string, std::vector<BucketReport>>> tables;
  for (const std::string& attr : args.attributes) {
    if (attr == "frequency") {
      if (args.stats_corpus.empty()) {
        throw UsageError("attribute 'frequency' needs --stats-corpus");
      }
      const VocabStats stats = build_vocab_stats(parse_corpus(args.stats_corpus, args.marker));
      auto [hi, mid] = default_frequency_thresholds(stats.size());
      if (args.freq_hi > 0) hi = args.freq_hi;
      if (args.freq_mid > 0) mid = args.freq_mid;
      tables.emplace_back(attr, bucket_report(frequency_buckets_of(preds, stats, hi, mid),
                                              classes, target, kFreqOrder));
    } else if (attr == "position") {
      tables.emplace_back(attr,
                          bucket_report(position_buckets_of(preds), classes, target,
                                        kPositionOrder));
    } else if (attr == "fertility") {
      if (args.align.empty() || args.source.empty()) {
        throw UsageError("attribute 'fertility' needs --align and --source");
      }
      const std::vector<Alignment> aligns = parse_alignment_file(args.align);
      const std::vector<Sentence> sources = parse_corpus(args.source, args.marker);
      if (aligns.size() != sentences.size() || sources.size() != sentences.size()) {
        throw UsageError("--align and --source must be line-aligned with the " +
                         std::to_string(sentences.size()) + " prediction sentences");
      }
      std::vector<std::string> buckets;
      buckets.reserve(preds.size());
      for (const Prediction& p : preds) {
        const std::size_t s = static_cast<std::size_t>(p.sentence_index);
        buckets.push_back(fertility_class_name(fertility_class(
            p.position_index, aligns[s], static_cast<int>(sources[s].size()))));
      }
      tables.emplace_back(attr, bucket_report(buckets, classes, target, kFertilityOrder));
    } else if (attr == "pos") {
      std::vector<std::string> buckets;
      buckets.reserve(preds.size());
      if (args.synthetic_tags) {
        for (const Prediction& p : preds) {
          buckets.push_back(pos_category_name(pos_category(synthetic_pos_tag(p.token))));
        }
      } else if (!args.pos.empty()) {
        const std::vector<std::vector<std::string>> tag_lines = parse_pos_file(args.pos);
        if (tag_lines.size() != sentences.size()) {
          throw UsageError("'" + args.pos + "' has " + std::to_string(tag_lines.size()) +
                           " lines for " + std::to_string(sentences.size()) +
                           " prediction sentences");
        }
        std::vector<std::vector<std::string>> expanded(sentences.size());
        for (std::size_t s = 0; s < sentences.size(); ++s) {
          ParallelPair tmp;
          tmp.hypothesis = sentences[s];
          attach_pos(tmp, tag_lines[s], args.pos, s + 1);
          expanded[s] = *tmp.pos_tags;
        }
        for (const Prediction& p : preds) {
          buckets.push_back(pos_category_name(pos_category(
              expanded[static_cast<std::size_t>(p.sentence_index)]
                      [static_cast<std::size_t>(p.position_index)])));
        }
      } else {
        throw UsageError("attribute 'pos' needs --pos or --synthetic-tags");
      }
      tables.emplace_back(attr, bucket_report(buckets, classes, target, kPosCatOrder));
    } else {  // granularity
      tables.emplace_back(attr,
                          bucket_report(granularity_buckets_of(preds, sentences), classes,
                                        target, kGranularityOrder));
    }
  }
  man.finished_at = iso_now();

  write_bucket_tsv(tables, args.out, man.id());
  write_manifest(man, args.manifest.empty() ? args.out + ".manifest.json" : args.manifest);
  return 0;
}

// --- subcommand: train -----------------------------------------------------------------

struct TrainArgs {
  std::string config, out_dir, smoothing;
};

int cmd_train(const TrainArgs& args, std::uint64_t seed, bool seed_set) {
  BenchmarkConfig bc = load_benchmark_config(args.config);
  if (!args.smoothing.empty()) bc.smoothing = args.smoothing;
  if (seed_set) bc.bench.train.seed = seed;
  validate_benchmark(bc);
  ensure_dir(args.out_dir);

  RunManifest man;
  man.subcommand = "train";
  if (!args.config.empty()) man.inputs.push_back(args.config);
  man.seed = bc.bench.train.seed;
  man.config = benchmark_to_json(bc).dump();
  man.started_at = iso_now();
  const std::string id = man.id();

  const BenchmarkData data = make_benchmark_data(bc);
  const TrainedArtifacts art = run_training(bc, data);

  save_checkpoint(*art.model, args.out_dir + "/model.json", id);
  if (art.first_pass) {
    save_checkpoint(*art.first_pass, args.out_dir + "/first_pass_model.json", id);
    write_confidences(art.first_pass_confs, args.out_dir + "/first_pass.conf", id);
  }
  write_loss_curve(art.stats.losses, args.out_dir + "/loss_curve.tsv", id);

  const std::vector<Prediction> preds = teacher_forced_predictions(*art.model, data.dev_data);
  write_predictions(preds, args.out_dir + "/predictions_training.tsv", id);

  man.finished_at = iso_now();
  write_manifest(man, args.out_dir + "/manifest.json");
  return 0;
}

// --- subcommand: decode ----------------------------------------------------------------

struct DecodeArgs {
  std::string model, source, ref, out_dir, attach = "following",
              marker = kDefaultSubwordMarker;
  int beam = 10;
  int max_shift = 50;
};

void require_known_sources(const ToyModel& model, const std::vector<Sentence>& sources,
                           const std::string& path) {
  for (std::size_t i = 0; i < sources.size(); ++i) {
    for (const Token& t : sources[i].tokens) {
      if (model.source_vocab().encode(t.surface) == Vocabulary::kUnk &&
          t.surface != "<unk>") {
        throw UsageError("'" + path + "' line " + std::to_string(i + 1) + ": token '" +
                         t.surface + "' is not in the model's source vocabulary");
      }
    }
  }
}

int cmd_decode(const DecodeArgs& args, std::uint64_t seed) {
  if (args.beam < 1) throw UsageError("--beam must be >= 1");
  if (args.max_shift < 0) throw UsageError("--max-shift must be >= 0");
  const DeletionAttach attach = parse_attach(args.attach);
  const ToyModel model = load_checkpoint(args.model);
  ensure_dir(args.out_dir);

  RunManifest man;
  man.subcommand = "decode";
  man.inputs = {args.model, args.source};
  if (!args.ref.empty()) man.inputs.push_back(args.ref);
  man.seed = seed;
  man.config = nlohmann::json{{"model", args.model},
                              {"source", args.source},
                              {"ref", args.ref},
                              {"beam", args.beam},
                              {"max_shift", args.max_shift},
                              {"d_attach", args.attach},
                              {"marker", args.marker}}
                   .dump();
  man.started_at = iso_now();
  const std::string id = man.id();

  if (!args.ref.empty()) {
    const std::vector<ParallelPair> pairs =
        load_parallel(args.source, args.ref, std::nullopt, std::nullopt, std::nullopt,
                      args.marker);
    std::vector<Sentence> sources;
    sources.reserve(pairs.size());
    for (const ParallelPair& p : pairs) sources.push_back(p.source);
    require_known_sources(model, sources, args.source);

    const InferenceOutputs io =
        inference_predictions(model, pairs, args.beam, args.max_shift, attach, args.marker);
    write_corpus(io.hypotheses, args.out_dir + "/hypotheses.txt");
    write_predictions(io.predictions, args.out_dir + "/predictions_inference.tsv", id);
  } else {
    const std::vector<Sentence> sources = parse_corpus(args.source, args.marker);
    require_known_sources(model, sources, args.source);
    std::vector<Sentence> hyps;
    hyps.reserve(sources.size());
    for (const Sentence& s : sources) {
      const DecodeResult r = beam_decode(model, model.source_vocab().encode_all(s), args.beam);
      std::vector<std::string> surfaces;
      surfaces.reserve(r.ids.size());
      for (int tok : r.ids) surfaces.push_back(model.target_vocab().decode(tok));
      hyps.push_back(make_sentence(surfaces, args.marker));
    }
    write_corpus(hyps, args.out_dir + "/hypotheses.txt");
  }

  man.finished_at = iso_now();
  write_manifest(man, args.out_dir + "/manifest.json");
  return 0;
}

// --- subcommand: eval-e2e ----------------------------------------------------------------

struct EvalArgs {
  std::string config, out_dir, smoothing;
};

int cmd_eval_e2e(const EvalArgs& args, std::uint64_t seed, bool seed_set) {
  BenchmarkConfig bc = load_benchmark_config(args.config);
  if (!args.smoothing.empty()) bc.smoothing = args.smoothing;
  if (seed_set) bc.bench.train.seed = seed;
  validate_benchmark(bc);
  ensure_dir(args.out_dir);

  RunManifest man;
  man.subcommand = "eval-e2e";
  if (!args.config.empty()) man.inputs.push_back(args.config);
  man.seed = bc.bench.train.seed;
  man.config = benchmark_to_json(bc).dump();
  man.started_at = iso_now();
  const std::string id = man.id();
  const std::string dir = args.out_dir + "/";

  // Data and model.
  const BenchmarkData data = make_benchmark_data(bc);
  const TrainedArtifacts art = run_training(bc, data);
  const ToyModel& model = *art.model;

  std::vector<Sentence> dev_sources, dev_refs, train_refs;
  for (const ParallelPair& p : data.dev_pairs) {
    dev_sources.push_back(p.source);
    dev_refs.push_back(p.reference);
  }
  for (const ParallelPair& p : data.train_pairs) train_refs.push_back(p.reference);
  write_corpus(dev_sources, dir + "dev_sources.txt");
  write_corpus(dev_refs, dir + "dev_references.txt");

  save_checkpoint(model, dir + "model.json", id);
  if (art.first_pass) {
    save_checkpoint(*art.first_pass, dir + "first_pass_model.json", id);
    write_confidences(art.first_pass_confs, dir + "first_pass.conf", id);
  }
  write_loss_curve(art.stats.losses, dir + "loss_curve.tsv", id);

  // Training-mode calibration on the development set.
  const std::vector<Prediction> train_preds = teacher_forced_predictions(model, data.dev_data);
  write_predictions(train_preds, dir + "predictions_training.tsv", id);
  const EceReport train_report = make_ece_report(train_preds, bc.bench.bins);
  write_ece_json(train_report, "training", dir + "ece_training.json", id);
  write_diagram_tsv(reliability_diagram(train_report), dir + "reliability_training.tsv", id);

  // Inference-mode calibration on the development set.
  const DeletionAttach attach = parse_attach(bc.d_attach);
  const InferenceOutputs io =
      inference_predictions(model, data.dev_pairs, bc.bench.beam, bc.bench.max_shift, attach);
  if (io.predictions.empty()) {
    throw ComputeError("eval-e2e: every decoded hypothesis was empty");
  }
  write_corpus(io.hypotheses, dir + "hypotheses.txt");
  write_predictions(io.predictions, dir + "predictions_inference.tsv", id);
  const EceReport inf_report = make_ece_report(io.predictions, bc.bench.bins);
  write_ece_json(inf_report, "inference", dir + "ece_inference.json", id);
  write_diagram_tsv(reliability_diagram(inf_report), dir + "reliability_inference.tsv", id);

  // Correlation between calibration and translation-error categories, using
  // the development-set inference ECE as the well-calibrated gap threshold.
  const std::vector<CalibrationBin> inf_bins = bin_predictions(io.predictions, bc.bench.bins);
  const std::vector<CalibrationClass> classes =
      classify_predictions(io.predictions, inf_bins, inf_report.ece);
  const IndicatorSet indicators = build_indicators(io.predictions, classes);
  write_correlation_tsv(build_correlation_table(indicators), dir + "correlation.tsv", id);

  // Linguistic-property buckets (frequency ranks from the training references).
  const VocabStats stats = build_vocab_stats(train_refs);
  const auto [hi, mid] = default_frequency_thresholds(stats.size());
  const std::vector<std::string> freq_buckets = frequency_buckets_of(io.predictions, stats, hi, mid);
  const std::vector<std::string> pos_buckets = position_buckets_of(io.predictions);
  const std::vector<std::string> gran_buckets =
      granularity_buckets_of(io.predictions, io.hypotheses);
  for (const CalibrationClass target :
       {CalibrationClass::Over, CalibrationClass::Under}) {
    std::vector<std::pair<std::string, std::vector<BucketReport>>> tables;
    tables.emplace_back("frequency",
                        bucket_report(freq_buckets, classes, target, kFreqOrder));
    tables.emplace_back("position",
                        bucket_report(pos_buckets, classes, target, kPositionOrder));
    tables.emplace_back("granularity",
                        bucket_report(gran_buckets, classes, target, kGranularityOrder));
    const std::string path =
        dir + (target == CalibrationClass::Over ? "buckets_over.tsv" : "buckets_under.tsv");
    write_bucket_tsv(tables, path, id);
  }

  man.finished_at = iso_now();
  write_manifest(man, dir + "manifest.json");
  return 0;
}

}  // namespace
}  // namespace infercal

int main(int argc, char** argv) {
  using namespace infercal;

  CLI::App app{"Inference-calibration toolkit for autoregressive sequence models"};
  app.require_subcommand(1);
  std::uint64_t seed = 7;
  app.add_option("--seed", seed, "Global seed (overrides the training seed)")
      ->capture_default_str();

  TerArgs ter_args;
  CLI::App* ter = app.add_subcommand("ter", "Label hypothesis tokens against references");
  ter->add_option("--hyp", ter_args.hyp, "Hypothesis corpus (one sentence per line)")
      ->required();
  ter->add_option("--ref", ter_args.ref, "Reference corpus")->required();
  ter->add_option("--out", ter_args.out, "Output labels file")->required();
  ter->add_option("--max-shift", ter_args.max_shift, "Maximum block-shift distance")
      ->capture_default_str();
  ter->add_option("--d-attach", ter_args.attach,
                  "Attach deletions to the 'following' or 'preceding' token")
      ->capture_default_str();
  ter->add_option("--marker", ter_args.marker, "Sub-word continuation marker")
      ->capture_default_str();
  ter->add_option("--manifest", ter_args.manifest,
                  "Manifest path (default: <out>.manifest.json)");

  EceArgs ece_args;
  CLI::App* ece = app.add_subcommand("ece", "Expected calibration error and reliability data");
  ece->add_option("--pred", ece_args.pred, "Prediction TSV")->required();
  ece->add_option("--out-json", ece_args.out_json, "Output ECE report JSON")->required();
  ece->add_option("--out-diagram", ece_args.out_diagram, "Output reliability diagram TSV")
      ->required();
  ece->add_option("--bins", ece_args.bins, "Number of confidence bins")->capture_default_str();
  ece->add_option("--mode", ece_args.mode, "Protocol recorded in the report: training|inference")
      ->capture_default_str();
  ece->add_option("--manifest", ece_args.manifest,
                  "Manifest path (default: <out-json>.manifest.json)");

  CorrelateArgs corr_args;
  CLI::App* corr =
      app.add_subcommand("correlate", "Correlate miscalibration with translation errors");
  corr->add_option("--pred", corr_args.pred, "Prediction TSV")->required();
  corr->add_option("--labels", corr_args.labels,
                   "Labels file to attach (otherwise labels come from the prediction TSV)");
  corr->add_option("--threshold", corr_args.threshold,
                   "Well-calibrated gap threshold, in percent (use the dev inference ECE)")
      ->required();
  corr->add_option("--out", corr_args.out, "Output correlation TSV")->required();
  corr->add_option("--bins", corr_args.bins, "Number of confidence bins")->capture_default_str();
  corr->add_option("--error-set", corr_args.error_set,
                   "Which labels count as translation errors: s+i+d|s+i")
      ->capture_default_str();
  corr->add_option("--manifest", corr_args.manifest,
                   "Manifest path (default: <out>.manifest.json)");

  BucketsArgs buck_args;
  CLI::App* buck = app.add_subcommand("buckets", "Linguistic-property bucket proportions");
  buck->add_option("--pred", buck_args.pred, "Prediction TSV")->required();
  buck->add_option("--out", buck_args.out, "Output bucket TSV")->required();
  buck->add_option("--threshold", buck_args.threshold,
                   "Well-calibrated gap threshold, in percent")
      ->required();
  buck->add_option("--class", buck_args.target_class, "Target class: over|under|well")
      ->capture_default_str();
  buck->add_option("--attributes", buck_args.attributes,
                   "Comma-separated: frequency,position,fertility,pos,granularity")
      ->delimiter(',')
      ->capture_default_str();
  buck->add_option("--bins", buck_args.bins, "Number of confidence bins")->capture_default_str();
  buck->add_option("--stats-corpus", buck_args.stats_corpus,
                   "Corpus for frequency ranks (required by 'frequency')");
  buck->add_option("--freq-hi", buck_args.freq_hi, "High-frequency rank cutoff (0 = auto)");
  buck->add_option("--freq-mid", buck_args.freq_mid, "Medium-frequency rank cutoff (0 = auto)");
  buck->add_option("--align", buck_args.align,
                   "Pharaoh source-hypothesis alignments (required by 'fertility')");
  buck->add_option("--source", buck_args.source, "Source corpus (required by 'fertility')");
  buck->add_option("--pos", buck_args.pos, "POS tag file, line-aligned with predictions");
  buck->add_flag("--synthetic-tags", buck_args.synthetic_tags,
                 "Tag tokens with the synthetic task's fixed tags instead of --pos");
  buck->add_option("--marker", buck_args.marker, "Sub-word continuation marker")
      ->capture_default_str();
  buck->add_option("--manifest", buck_args.manifest,
                   "Manifest path (default: <out>.manifest.json)");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a toy model on the synthetic benchmark");
  train->add_option("--config", train_args.config, "Benchmark config JSON (defaults used if absent)");
  train->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  train->add_option("--smoothing", train_args.smoothing,
                    "Override: none|uniform[:eps]|graduated[:lo,hi,el,em,eh]");

  DecodeArgs dec_args;
  CLI::App* dec = app.add_subcommand("decode", "Decode a corpus with a trained checkpoint");
  dec->add_option("--model", dec_args.model, "Checkpoint JSON")->required();
  dec->add_option("--source", dec_args.source, "Source corpus")->required();
  dec->add_option("--ref", dec_args.ref,
                  "Reference corpus (enables TER-labeled inference predictions)");
  dec->add_option("--out-dir", dec_args.out_dir, "Output directory")->required();
  dec->add_option("--beam", dec_args.beam, "Beam size")->capture_default_str();
  dec->add_option("--max-shift", dec_args.max_shift, "Maximum block-shift distance")
      ->capture_default_str();
  dec->add_option("--d-attach", dec_args.attach,
                  "Attach deletions to the 'following' or 'preceding' token")
      ->capture_default_str();
  dec->add_option("--marker", dec_args.marker, "Sub-word continuation marker")
      ->capture_default_str();

  EvalArgs eval_args;
  CLI::App* eval =
      app.add_subcommand("eval-e2e", "Train, decode and produce the full calibration bundle");
  eval->add_option("--config", eval_args.config, "Benchmark config JSON (defaults used if absent)");
  eval->add_option("--out-dir", eval_args.out_dir, "Output directory")->required();
  eval->add_option("--smoothing", eval_args.smoothing,
                   "Override: none|uniform[:eps]|graduated[:lo,hi,el,em,eh]");

  // Let global flags (--seed) trail the subcommand: `infercal ter ... --seed 9`.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
    const bool seed_set = app.count("--seed") > 0;
    if (ter->parsed()) return cmd_ter(ter_args, seed);
    if (ece->parsed()) return cmd_ece(ece_args, seed);
    if (corr->parsed()) return cmd_correlate(corr_args, seed);
    if (buck->parsed()) return cmd_buckets(buck_args, seed);
    if (train->parsed()) return cmd_train(train_args, seed, seed_set);
    if (dec->parsed()) return cmd_decode(dec_args, seed);
    if (eval->parsed()) return cmd_eval_e2e(eval_args, seed, seed_set);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ComputeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
