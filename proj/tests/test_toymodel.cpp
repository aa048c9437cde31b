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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "infercal/toymodel.hpp"
#include "support/finite_diff.hpp"

using namespace infercal;

namespace {

std::vector<std::string> type_names(const char* prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
  return out;
}

// A deliberately small model so finite differences over every parameter stay
// fast; dropout off so the loss is a deterministic function of the parameters.
ToyModel tiny_model(std::uint64_t seed, int src_types = 7, int tgt_types = 8) {
  ModelConfig cfg;
  cfg.embed_dim = 6;
  cfg.hidden_dim = 10;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 1;
  cfg.attention_heads = 2;
  cfg.dropout_rate = 0.0;
  cfg.max_len = 16;
  ToyModel model(cfg, Vocabulary::from_tokens(type_names("a", src_types)),
                 Vocabulary::from_tokens(type_names("b", tgt_types)));
  RandomSource rng(seed);
  model.initialize(rng);
  return model;
}

std::string joined_surfaces(const Sentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out += ' ';
    out += s.tokens[i].surface;  // surfaces carry any continuation marker verbatim
  }
  return out;
}

// Independent re-derivation of the noiseless target for one source, straight
// from the documented mapping rules.
std::vector<std::string> oracle_target(const SyntheticConfig& cfg,
                                       const std::vector<int>& src) {
  std::vector<std::string> want;
  auto is_plain = [&](int t) { return t >= 2 * cfg.merge_pairs + cfg.split_types; };
  std::size_t i = 0;
  while (i < src.size()) {
    const int t = src[i];
    if (i + 1 < src.size() && t < 2 * cfg.merge_pairs && t % 2 == 0 && src[i + 1] == t + 1) {
      want.push_back("m" + std::to_string(t / 2));
      i += 2;
    } else if (t >= 2 * cfg.merge_pairs && t < 2 * cfg.merge_pairs + cfg.split_types) {
      const int k = t - 2 * cfg.merge_pairs;
      want.push_back("u" + std::to_string(k) + "@@");
      want.push_back("v" + std::to_string(k));
      i += 1;
    } else if (i + 1 < src.size() && is_plain(t) && is_plain(src[i + 1]) && t > src[i + 1]) {
      want.push_back("t" + std::to_string(src[i + 1]));
      want.push_back("t" + std::to_string(t));
      i += 2;
    } else {
      want.push_back("t" + std::to_string(t));
      i += 1;
    }
  }
  return want;
}

std::vector<int> source_types(const Sentence& s) {
  std::vector<int> out;
  for (const Token& tok : s.tokens) out.push_back(std::stoi(tok.surface.substr(1)));
  return out;
}

}  // namespace

TEST_CASE("vocabulary reserves specials and maps unknowns to <unk>") {
  const Vocabulary v = Vocabulary::from_tokens({"cat", "dog"});
  CHECK(v.size() == 5);
  CHECK(v.decode(Vocabulary::kBos) == "<s>");
  CHECK(v.decode(Vocabulary::kEos) == "</s>");
  CHECK(v.decode(Vocabulary::kUnk) == "<unk>");
  CHECK(v.encode("cat") == 3);
  CHECK(v.encode("dog") == 4);
  CHECK(v.encode("ferret") == Vocabulary::kUnk);
  CHECK_THROWS_AS((void)Vocabulary::from_tokens({"cat", "cat"}), ComputeError);
  CHECK_THROWS_AS((void)Vocabulary::from_tokens({"<unk>"}), ComputeError);
  CHECK_THROWS_AS((void)Vocabulary::from_tokens({""}), ComputeError);
}

TEST_CASE("encode_all keeps subword markers out of the surface lookup") {
  const Vocabulary v = Vocabulary::from_tokens({"un@@", "fair"});
  const Sentence s = parse_sentence_line("un@@ fair", "inline", 1);
  const std::vector<int> ids = v.encode_all(s);
  REQUIRE(ids.size() == 2);
  CHECK(v.decode(ids[0]) == "un@@");
  CHECK(v.decode(ids[1]) == "fair");
}

TEST_CASE("analytic gradients match central finite differences over all parameters") {
  ToyModel model = tiny_model(41);
  const std::vector<int> src = {3, 4, 5, 3};
  const std::vector<int> tgt = {3, 6, 4};
  const std::vector<double> eps = {0.1, 0.0, 0.2, 0.05};  // one per position incl. end

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.parameters().size());
  const double loss = model.sentence_loss_grad(src, tgt, eps, 1.0, grad, false, nullptr);
  CHECK(std::isfinite(loss));
  CHECK(loss > 0.0);

  ToyModel probe = model;
  auto loss_at = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      probe.parameters()[static_cast<Eigen::Index>(i)] = x[i];
    }
    return probe.sentence_loss(src, tgt, eps);
  };
  std::vector<double> x(static_cast<std::size_t>(model.parameters().size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = model.parameters()[static_cast<Eigen::Index>(i)];
  }
  const std::vector<double> fd = testsupport::finite_difference(loss_at, x, {});

  double worst = 0.0;
  double worst_pure = 0.0;  // over coordinates large enough for a pure ratio
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double g = grad[static_cast<Eigen::Index>(i)];
    worst = std::max(worst, testsupport::relative_error(g, fd[i]));
    if (std::abs(fd[i]) > 1e-3) {
      worst_pure = std::max(worst_pure, std::abs(g - fd[i]) / std::abs(fd[i]));
    }
  }
  CHECK(worst <= 1e-6);       // floored relative error across every coordinate
  CHECK(worst_pure <= 1e-5);  // pure relative error where the gradient is sizable
}

TEST_CASE("sentence_loss matches sentence_loss_grad and scales with weight") {
  ToyModel model = tiny_model(42);
  const std::vector<int> src = {4, 3};
  const std::vector<int> tgt = {5, 3, 6};
  const std::vector<double> eps = {0.0, 0.1, 0.0, 0.2};

  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(model.parameters().size());
  Eigen::VectorXd g2 = Eigen::VectorXd::Zero(model.parameters().size());
  const double base = model.sentence_loss_grad(src, tgt, eps, 1.0, g1, false, nullptr);
  const double scaled = model.sentence_loss_grad(src, tgt, eps, 0.25, g2, false, nullptr);
  CHECK(model.sentence_loss(src, tgt, eps) == doctest::Approx(base).epsilon(1e-12));
  CHECK(scaled == doctest::Approx(0.25 * base).epsilon(1e-12));
  CHECK((g2 - 0.25 * g1).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("forced logits factorize: chained next_distribution equals sequence_logprob") {
  ToyModel model = tiny_model(43);
  const std::vector<int> src = {3, 5, 4};
  const std::vector<int> tgt = {6, 3, 7, 4};

  const Eigen::MatrixXd enc = model.encode_source(src);
  std::vector<int> prefix = {Vocabulary::kBos};
  double chained = 0.0;
  for (std::size_t t = 0; t <= tgt.size(); ++t) {
    const Eigen::VectorXd dist = model.next_distribution(enc, prefix);
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-9));
    const int next = (t < tgt.size()) ? tgt[t] : Vocabulary::kEos;
    chained += std::log(dist[next]);
    prefix.push_back(next);
  }
  CHECK(std::abs(chained - sequence_logprob(model, src, tgt)) <= 1e-9);
}

TEST_CASE("unsmoothed sentence loss is the negative sequence log-probability") {
  ToyModel model = tiny_model(44);
  const std::vector<int> src = {5, 3};
  const std::vector<int> tgt = {4, 6};
  const std::vector<double> eps(tgt.size() + 1, 0.0);
  CHECK(model.sentence_loss(src, tgt, eps) ==
        doctest::Approx(-sequence_logprob(model, src, tgt)).epsilon(1e-9));
}

TEST_CASE("beam size one reproduces greedy decoding exactly") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    ToyModel model = tiny_model(seed);
    RandomSource rng(seed * 31 + 1);
    for (int trial = 0; trial < 20; ++trial) {
      const int len = 1 + static_cast<int>(rng.uniform_int(5));
      std::vector<int> src(static_cast<std::size_t>(len));
      for (int& t : src) t = 3 + static_cast<int>(rng.uniform_int(4));
      const DecodeResult g = greedy_decode(model, src);
      const DecodeResult b = beam_decode(model, src, 1);
      CHECK(g.ids == b.ids);
      CHECK(g.truncated == b.truncated);
      REQUIRE(g.confidences.size() == b.confidences.size());
      for (std::size_t i = 0; i < g.confidences.size(); ++i) {
        CHECK(g.confidences[i] == b.confidences[i]);
      }
      CHECK(g.score == b.score);
    }
  }
}

TEST_CASE("wider beams never score worse and scores match sequence_logprob") {
  ToyModel model = tiny_model(45);
  RandomSource rng(99);
  for (int trial = 0; trial < 15; ++trial) {
    const int len = 1 + static_cast<int>(rng.uniform_int(5));
    std::vector<int> src(static_cast<std::size_t>(len));
    for (int& t : src) t = 3 + static_cast<int>(rng.uniform_int(4));
    const DecodeResult g = greedy_decode(model, src);
    const DecodeResult b = beam_decode(model, src, 4);
    if (!g.truncated && !b.truncated) {
      CHECK(b.score >= g.score - 1e-12);
      CHECK(std::abs(g.score - sequence_logprob(model, src, g.ids)) <= 1e-9);
      CHECK(std::abs(b.score - sequence_logprob(model, src, b.ids)) <= 1e-9);
    }
  }
}

TEST_CASE("decode validates the beam size") {
  ToyModel model = tiny_model(46);
  CHECK_THROWS_AS((void)beam_decode(model, {3}, 0), UsageError);
}

TEST_CASE("noam learning rate warms up linearly then decays as inverse sqrt") {
  const int d = 16;
  const double f = 2.0;
  // Below warmup the linear branch is smaller; at the corner they agree.
  CHECK(noam_learning_rate(100, d, 400, f) ==
        doctest::Approx(f * (100.0 / (400.0 * std::sqrt(400.0))) / std::sqrt(16.0)));
  CHECK(noam_learning_rate(400, d, 400, f) ==
        doctest::Approx(f / std::sqrt(400.0) / std::sqrt(16.0)));
  CHECK(noam_learning_rate(1600, d, 400, f) ==
        doctest::Approx(f / std::sqrt(1600.0) / std::sqrt(16.0)));
  CHECK(noam_learning_rate(10, d, 0, f) == doctest::Approx(f / std::sqrt(10.0) / 4.0));
  CHECK_THROWS_AS((void)noam_learning_rate(0, d, 400, f), ComputeError);
}

TEST_CASE("training is deterministic for a fixed seed") {
  SyntheticConfig scfg;
  scfg.vocab_size = 12;
  scfg.merge_pairs = 1;
  scfg.split_types = 1;
  scfg.noise_rate = 0.1;
  scfg.seed = 5;
  const SyntheticCorpus corpus = generate_synthetic(scfg, 64);
  const Vocabulary sv = Vocabulary::from_tokens(corpus.src_tokens);
  const Vocabulary tv = Vocabulary::from_tokens(corpus.tgt_tokens);
  const std::vector<EncodedPair> data = encode_pairs(corpus.pairs, sv, tv);

  ModelConfig mcfg;
  mcfg.embed_dim = 8;
  mcfg.hidden_dim = 16;
  mcfg.encoder_layers = 1;
  mcfg.decoder_layers = 1;
  mcfg.attention_heads = 2;
  mcfg.dropout_rate = 0.1;
  TrainConfig tcfg;
  tcfg.batch_size = 8;
  tcfg.max_steps = 40;
  tcfg.warmup_steps = 20;
  tcfg.seed = 77;

  TrainStats s1, s2;
  const ToyModel m1 = train_model(mcfg, sv, tv, data, tcfg, nullptr, &s1);
  const ToyModel m2 = train_model(mcfg, sv, tv, data, tcfg, nullptr, &s2);
  CHECK(s1.losses == s2.losses);
  CHECK(s1.final_loss == s2.final_loss);
  CHECK((m1.parameters() - m2.parameters()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(static_cast<int>(s1.losses.size()) == tcfg.max_steps);
  // Training on this scale should actually reduce the loss.
  CHECK(s1.losses.back() < s1.losses.front());

  TrainConfig other = tcfg;
  other.seed = 78;
  const ToyModel m3 = train_model(mcfg, sv, tv, data, other, nullptr, nullptr);
  CHECK((m1.parameters() - m3.parameters()).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("teacher-forced evaluation agrees across the three read-outs") {
  ToyModel model = tiny_model(47);
  std::vector<EncodedPair> data = {{{3, 4}, {5, 6, 3}}, {{5}, {4}}};
  const std::vector<Prediction> preds = teacher_forced_predictions(model, data);
  const std::vector<std::vector<bool>> hits = teacher_forced_hits(model, data);
  const std::vector<std::vector<double>> confs = confidence_pass(model, data);

  REQUIRE(preds.size() == 4);  // end-symbol positions excluded
  REQUIRE(hits.size() == 2);
  REQUIRE(hits[0].size() == 3);
  REQUIRE(hits[1].size() == 1);
  REQUIRE(confs[0].size() == 4);  // end symbol included
  REQUIRE(confs[1].size() == 2);

  // Route one: predictions; route two: a hand-rolled next_distribution sweep.
  std::size_t k = 0;
  for (std::size_t p = 0; p < data.size(); ++p) {
    const Eigen::MatrixXd enc = model.encode_source(data[p].src);
    std::vector<int> prefix = {Vocabulary::kBos};
    double logprob = 0.0;
    for (std::size_t t = 0; t <= data[p].tgt.size(); ++t) {
      const Eigen::VectorXd dist = model.next_distribution(enc, prefix);
      const int truth = (t < data[p].tgt.size()) ? data[p].tgt[t] : Vocabulary::kEos;
      CHECK(confs[p][t] == doctest::Approx(dist[truth]).epsilon(1e-12));
      logprob += std::log(dist[truth]);
      if (t < data[p].tgt.size()) {
        int argmax = 0;
        dist.maxCoeff(&argmax);
        const Prediction& pr = preds[k++];
        CHECK(pr.sentence_index == static_cast<int>(p));
        CHECK(pr.position_index == static_cast<int>(t));
        CHECK(pr.sentence_length == static_cast<int>(data[p].tgt.size()));
        CHECK(pr.token == model.target_vocab().decode(argmax));
        CHECK(pr.confidence == doctest::Approx(dist.maxCoeff()).epsilon(1e-12));
        CHECK(pr.correct == (argmax == truth));
        CHECK(hits[p][t] == pr.correct);
      }
      prefix.push_back(truth);
    }
    CHECK(logprob == doctest::Approx(sequence_logprob(model, data[p].src, data[p].tgt))
                         .epsilon(1e-9));
  }
}

TEST_CASE("inference predictions label decoded tokens against the reference") {
  ToyModel model = tiny_model(48);
  std::vector<ParallelPair> pairs(2);
  pairs[0].source = make_sentence({"a3", "a4"});
  pairs[0].reference = make_sentence({"b5", "b6"});
  pairs[1].source = make_sentence({"a5"});
  pairs[1].reference = make_sentence({"b4"});
  const InferenceOutputs out = inference_predictions(model, pairs, 2);

  REQUIRE(out.decodes.size() == 2);
  REQUIRE(out.hypotheses.size() == 2);
  std::size_t expected = 0;
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(out.hypotheses[p].tokens.size() == out.decodes[p].ids.size());
    expected += out.decodes[p].ids.size();
  }
  CHECK(out.predictions.size() == expected);
  // Every prediction's correctness flag must match its own label.
  std::size_t k = 0;
  for (std::size_t p = 0; p < 2; ++p) {
    if (out.decodes[p].ids.empty()) continue;
    const std::vector<std::string> hyp_words = [&] {
      std::vector<std::string> w;
      for (int id : out.decodes[p].ids) w.push_back(model.target_vocab().decode(id));
      return w;
    }();
    const TerResult ta = ter_align(make_sentence(hyp_words), pairs[p].reference, 50);
    for (std::size_t t = 0; t < hyp_words.size(); ++t, ++k) {
      CHECK(out.predictions[k].sentence_index == static_cast<int>(p));
      CHECK(out.predictions[k].label.has_value());
      CHECK(*out.predictions[k].label == ta.labels[t]);
      CHECK(out.predictions[k].correct == (ta.labels[t].value == LabelValue::C));
      CHECK(out.predictions[k].confidence ==
            doctest::Approx(out.decodes[p].confidences[t]).epsilon(1e-12));
    }
  }
}

TEST_CASE("checkpoints round-trip parameters, configuration, and vocabulary") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "infercal-toymodel-test";
  fs::create_directories(dir);
  const std::string path = (dir / "model.json").string();

  ToyModel model = tiny_model(49);
  save_checkpoint(model, path, "abc123");
  const ToyModel loaded = load_checkpoint(path);

  CHECK(loaded.parameters().size() == model.parameters().size());
  CHECK((loaded.parameters() - model.parameters()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(loaded.source_vocab() == model.source_vocab());
  CHECK(loaded.target_vocab() == model.target_vocab());
  CHECK(loaded.config().embed_dim == model.config().embed_dim);
  CHECK(loaded.config().attention_heads == model.config().attention_heads);

  const std::vector<int> src = {3, 5};
  const DecodeResult a = greedy_decode(model, src);
  const DecodeResult b = greedy_decode(loaded, src);
  CHECK(a.ids == b.ids);
  CHECK(a.score == b.score);

  CHECK_THROWS_AS((void)load_checkpoint((dir / "missing.json").string()), UsageError);
  fs::remove_all(dir);
}

TEST_CASE("model config validation rejects inconsistent shapes") {
  ModelConfig cfg;
  cfg.embed_dim = 7;
  cfg.attention_heads = 2;  // embed_dim not divisible by heads
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  ModelConfig ok;
  CHECK_NOTHROW(ok.validate());
  TrainConfig bad;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), UsageError);
}

TEST_CASE("synthetic corpus is deterministic and obeys the mapping rules") {
  SyntheticConfig cfg;
  cfg.vocab_size = 14;
  cfg.merge_pairs = 2;
  cfg.split_types = 2;
  cfg.noise_rate = 0.0;
  cfg.min_len = 2;
  cfg.max_len = 8;
  cfg.seed = 21;
  const SyntheticCorpus a = generate_synthetic(cfg, 50);
  const SyntheticCorpus b = generate_synthetic(cfg, 50);
  REQUIRE(a.pairs.size() == 50);
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(joined_surfaces(a.pairs[i].source) == joined_surfaces(b.pairs[i].source));
    CHECK(joined_surfaces(a.pairs[i].reference) == joined_surfaces(b.pairs[i].reference));
    CHECK(a.pairs[i].alignment == b.pairs[i].alignment);
  }

  // Independent re-derivation of each noiseless target from its source.
  for (const ParallelPair& pair : a.pairs) {
    const std::vector<std::string> want = oracle_target(cfg, source_types(pair.source));
    REQUIRE(pair.reference.tokens.size() == want.size());
    for (std::size_t t = 0; t < want.size(); ++t) {
      CHECK(pair.reference.tokens[t].surface == want[t]);
      const std::string& w = want[t];
      CHECK(pair.reference.tokens[t].is_subword ==
            (w.size() >= 2 && w.compare(w.size() - 2, 2, "@@") == 0));
    }
    // The gold alignment must stay within both sentences.
    ParallelPair copy;
    copy.source = pair.source;
    copy.reference = pair.reference;
    REQUIRE(pair.alignment.has_value());
    CHECK_NOTHROW(attach_alignment(copy, *pair.alignment));
  }
}

TEST_CASE("distractor noise hits close to the configured rate and only masked slots") {
  SyntheticConfig cfg;
  cfg.vocab_size = 14;
  cfg.merge_pairs = 2;
  cfg.split_types = 2;
  cfg.noise_rate = 0.25;
  cfg.seed = 33;
  const SyntheticCorpus corpus = generate_synthetic(cfg, 2000);

  std::size_t masked = 0, total = 0;
  for (std::size_t p = 0; p < corpus.pairs.size(); ++p) {
    // The clean target is a pure function of the source; noise only replaces
    // tokens in place, so every divergence must be a masked slot.
    const std::vector<std::string> clean =
        oracle_target(cfg, source_types(corpus.pairs[p].source));
    const auto& ref = corpus.pairs[p].reference.tokens;
    REQUIRE(ref.size() == clean.size());
    REQUIRE(corpus.noise_mask[p].size() == clean.size());
    for (std::size_t t = 0; t < clean.size(); ++t, ++total) {
      const bool differs = ref[t].surface != clean[t];
      CHECK(differs == static_cast<bool>(corpus.noise_mask[p][t]));
      masked += corpus.noise_mask[p][t] ? 1u : 0u;
    }
  }
  // Binomial(n, 0.25): three sigmas stay well inside this band at n > 5000.
  const double rate = static_cast<double>(masked) / static_cast<double>(total);
  CHECK(rate == doctest::Approx(0.25).epsilon(0.12));
  CHECK(total > 5000);
}

TEST_CASE("synthetic POS tags are fixed per surface") {
  CHECK(synthetic_pos_tag("m0") == "NN");
  CHECK(synthetic_pos_tag("u1@@") == "NN");
  CHECK(synthetic_pos_tag("v1") == "NN");
  CHECK(synthetic_pos_tag("t10") == "NN");
  CHECK(synthetic_pos_tag("t11") == "VBZ");
  CHECK(synthetic_pos_tag("t12") == "JJ");
  CHECK(synthetic_pos_tag("t13") == "IN");
  CHECK(synthetic_pos_tag("t14") == "DT");
  CHECK(synthetic_pos_tag("tx") == "SYM");
  CHECK(synthetic_pos_tag("") == "SYM");
}

TEST_CASE("synthetic config validation") {
  SyntheticConfig cfg;
  cfg.vocab_size = 5;
  cfg.merge_pairs = 2;
  cfg.split_types = 2;  // needs >= 2*2+2+2 = 8 types
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.vocab_size = 8;
  CHECK_NOTHROW(cfg.validate());
  cfg.noise_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  cfg.noise_rate = 0.1;
  cfg.min_len = 5;
  cfg.max_len = 4;
  CHECK_THROWS_AS(cfg.validate(), UsageError);
}
