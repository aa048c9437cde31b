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

#ifndef INFERCAL_TOYMODEL_HPP
#define INFERCAL_TOYMODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "infercal/calibration.hpp"
#include "infercal/corpus.hpp"
#include "infercal/smoothing.hpp"
#include "infercal/ter.hpp"
#include "infercal/util.hpp"

namespace infercal {

// --- vocabulary ---------------------------------------------------------------

struct Vocabulary {
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  std::vector<std::string> id_to_surface;  // [0..2] are the special symbols
  std::unordered_map<std::string, int> surface_to_id;

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int size() const { return static_cast<int>(id_to_surface.size()); }
  int encode(const std::string& surface) const;  // unknown -> kUnk
  const std::string& decode(int id) const;
  std::vector<int> encode_all(const Sentence& sentence) const;
  bool operator==(const Vocabulary& o) const { return id_to_surface == o.id_to_surface; }
};

struct EncodedPair {
  std::vector<int> src, tgt;  // content token ids; BOS/EOS handled by the model
};

std::vector<EncodedPair> encode_pairs(const std::vector<ParallelPair>& pairs,
                                      const Vocabulary& src_vocab,
                                      const Vocabulary& tgt_vocab);

// --- model --------------------------------------------------------------------

struct ModelConfig {
  int vocab_size_src = 0;  // 0: take the size from the vocabulary at construction
  int vocab_size_tgt = 0;
  int embed_dim = 32;
  int hidden_dim = 64;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int attention_heads = 2;
  double dropout_rate = 0.1;
  int max_len = 20;

  void validate() const;
};

struct TrainConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double adam_eps = 1e-9;
  int warmup_steps = 800;
  double lr_factor = 1.5;  // scale on the inverse-sqrt schedule
  int batch_size = 16;
  int max_steps = 16000;
  std::uint64_t seed = 7;
  SmoothingPolicy smoothing;

  void validate() const;
};

// A small post-layer-norm attention encoder-decoder over explicit Eigen
// matrices, with hand-written backward passes (exact gradients, no autodiff).
// All parameters live in one flat vector so the optimizer and the checkpoint
// format stay trivial.
class ToyModel {
 public:
  ToyModel(ModelConfig cfg, Vocabulary src_vocab, Vocabulary tgt_vocab);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& source_vocab() const { return src_vocab_; }
  const Vocabulary& target_vocab() const { return tgt_vocab_; }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  // Deterministic parameter initialization from the given stream.
  void initialize(RandomSource& rng);

  // Teacher-forced forward (evaluation mode, no dropout): row t of the result
  // holds the logits for position t given [BOS, tgt[0..t-1]]; there are
  // tgt.size()+1 rows, the last predicting EOS.
  Eigen::MatrixXd forced_logits(const std::vector<int>& src,
                                const std::vector<int>& tgt) const;

  // Encoder output for one source (evaluation mode); rows = source length + 1
  // (EOS appended internally).
  Eigen::MatrixXd encode_source(const std::vector<int>& src) const;

  // Softmax over the next token given a decoder prefix that starts with BOS.
  Eigen::VectorXd next_distribution(const Eigen::MatrixXd& enc_out,
                                    const std::vector<int>& prefix_with_bos) const;

  // Smoothed cross-entropy of one pair, summed over the tgt.size()+1 target
  // positions and scaled by `weight`; the scaled gradient is accumulated into
  // `grad` (same layout as parameters()). `epsilon_per_position` must have
  // tgt.size()+1 entries. Dropout is drawn from `rng` when train_mode is set.
  double sentence_loss_grad(const std::vector<int>& src, const std::vector<int>& tgt,
                            const std::vector<double>& epsilon_per_position,
                            double weight, Eigen::VectorXd& grad, bool train_mode,
                            RandomSource* rng) const;

  // Loss only (same value as sentence_loss_grad with weight 1, no gradient).
  double sentence_loss(const std::vector<int>& src, const std::vector<int>& tgt,
                       const std::vector<double>& epsilon_per_position) const;

  // Internal parameter layout, public only so the implementation file can
  // address the flat vector; not part of the supported interface.
  struct View {
    std::ptrdiff_t off = 0;
    int rows = 0, cols = 0;  // cols == 1 for vectors
  };
  struct AttnViews { View wq, bq, wk, bk, wv, bv, wo, bo; };
  struct LnViews { View gamma, beta; };
  struct FfnViews { View w1, b1, w2, b2; };
  struct EncLayerViews { AttnViews attn; LnViews ln1; FfnViews ffn; LnViews ln2; };
  struct DecLayerViews {
    AttnViews self_attn; LnViews ln1;
    AttnViews cross_attn; LnViews ln2;
    FfnViews ffn; LnViews ln3;
  };
  struct Views {
    View src_emb, tgt_emb;
    std::vector<EncLayerViews> enc;
    std::vector<DecLayerViews> dec;
    View out_w, out_b;
  };
  const Views& views() const { return views_; }

 private:
  View alloc(int rows, int cols);
  void build_views();

  ModelConfig cfg_;
  Vocabulary src_vocab_, tgt_vocab_;
  Views views_;
  std::ptrdiff_t total_params_ = 0;
  Eigen::VectorXd params_;
};

// --- training -----------------------------------------------------------------

struct TrainStats {
  std::vector<double> losses;  // mean token loss per step
  double final_loss = 0.0;
};

// Mini-batch Adam with the warmup/inverse-sqrt schedule. For graduated
// smoothing, `first_pass_confidences` must hold one confidence per target
// position (tgt length + 1, end symbol last) per pair, typically produced by
// confidence_pass() of a uniform-smoothed first-pass model.
ToyModel train_model(const ModelConfig& model_cfg, const Vocabulary& src_vocab,
                     const Vocabulary& tgt_vocab, const std::vector<EncodedPair>& data,
                     const TrainConfig& train_cfg,
                     const std::vector<std::vector<double>>* first_pass_confidences = nullptr,
                     TrainStats* stats = nullptr);

// Inverse-sqrt learning rate with linear warmup (step counting from 1).
double noam_learning_rate(int step, int embed_dim, int warmup_steps, double factor);

// --- evaluation ---------------------------------------------------------------

// One prediction per reference token position (end symbol excluded): the
// argmax token under the ground-truth prefix, its probability as confidence,
// correct iff it matches the ground truth.
std::vector<Prediction> teacher_forced_predictions(const ToyModel& model,
                                                   const std::vector<EncodedPair>& data);

// Probability assigned to each ground-truth token given the ground-truth
// prefix; tgt length + 1 values per pair (end symbol last).
std::vector<std::vector<double>> confidence_pass(const ToyModel& model,
                                                 const std::vector<EncodedPair>& data);

// Per-pair teacher-forced argmax hits (end symbol excluded), for accuracy
// gates over subsets of positions.
std::vector<std::vector<bool>> teacher_forced_hits(const ToyModel& model,
                                                   const std::vector<EncodedPair>& data);

struct DecodeResult {
  std::vector<int> ids;             // emitted tokens, end symbol excluded
  std::vector<double> confidences;  // probability of each token at emission time
  double score = 0.0;               // sum of log-probabilities (incl. end symbol)
  bool truncated = false;           // no finished hypothesis within max_len
};

DecodeResult greedy_decode(const ToyModel& model, const std::vector<int>& src);
DecodeResult beam_decode(const ToyModel& model, const std::vector<int>& src, int beam_size);

// Teacher-forced sequence log-probability of `tgt` given `src` (end symbol
// included) -- the factorized score a decode of the same tokens accumulates.
double sequence_logprob(const ToyModel& model, const std::vector<int>& src,
                        const std::vector<int>& tgt);

struct InferenceOutputs {
  std::vector<Prediction> predictions;  // one per hypothesis token
  std::vector<Sentence> hypotheses;     // one per pair (possibly empty)
  std::vector<DecodeResult> decodes;
  std::size_t empty_hypotheses = 0;
  std::size_t truncated = 0;
};

// Decode every source, then label hypothesis tokens against the reference
// with TER; correct == labeled C. Pairs with an empty hypothesis contribute
// no predictions and are counted.
InferenceOutputs inference_predictions(const ToyModel& model,
                                       const std::vector<ParallelPair>& pairs,
                                       int beam_size, int max_shift_distance = 50,
                                       DeletionAttach attach = DeletionAttach::Following,
                                       const std::string& subword_marker = "@@");

// --- synthetic task -----------------------------------------------------------

struct SyntheticConfig {
  int vocab_size = 40;      // source content types
  int merge_pairs = 4;      // adjacent source pairs emitting one target token
  int split_types = 4;      // source types emitting a two-piece sub-word target
  double noise_rate = 0.35;  // per-target-token distractor probability
  int min_len = 3;
  int max_len = 9;          // source length range (inclusive)
  std::uint64_t seed = 11;

  void validate() const;
};

struct SyntheticCorpus {
  std::vector<ParallelPair> pairs;             // source/reference + gold alignment
  std::vector<std::vector<bool>> noise_mask;   // per reference token: true if replaced
  std::vector<std::string> src_tokens;         // vocabulary (specials excluded)
  std::vector<std::string> tgt_tokens;
};

// The default benchmark: the corpus, model, and evaluation knobs the CLI uses
// when no config file is given. Kept in the library so tests exercise exactly
// what the CLI ships. The defaults are sized so the benchmark exhibits the
// effects it measures: enough distractor noise for decoding errors to
// compound (inference less calibrated than teacher forcing) while training
// stays long and cool enough for solid teacher-forced accuracy.
struct Benchmark {
  SyntheticConfig synthetic;
  int n_train = 4800;
  int n_dev = 300;
  ModelConfig model;
  TrainConfig train;
  int beam = 10;
  int bins = 10;
  int max_shift = 50;
};

// Deterministic given the config seed. Targets follow the task rules: token
// substitution, conditional local swaps, many-to-one merges, sub-word splits,
// then distractor noise (recorded in noise_mask).
SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg, int n);

// Fixed tag for each synthetic target token type, so decoded hypotheses can
// be POS-bucketed without an external tagger.
std::string synthetic_pos_tag(const std::string& surface);

// --- checkpoints ----------------------------------------------------------------

// Versioned JSON: config, both vocabularies, flat parameter vector
// (doubles round-trip exactly).
void save_checkpoint(const ToyModel& model, const std::string& path,
                     const std::string& manifest_id = "");
ToyModel load_checkpoint(const std::string& path);

}  // namespace infercal

#endif  // INFERCAL_TOYMODEL_HPP
