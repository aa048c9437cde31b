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

#include "infercal/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

namespace infercal {

namespace {

constexpr double kLnEps = 1e-5;       // layer-norm variance floor
constexpr double kMaskValue = -1e30;  // pre-softmax value for causally masked scores

using MatMap = Eigen::Map<Eigen::MatrixXd>;
using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

int argmax_first(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

// --- vocabulary ---------------------------------------------------------------

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  v.id_to_surface = {"<s>", "</s>", "<unk>"};
  for (int i = 0; i < static_cast<int>(v.id_to_surface.size()); ++i) {
    v.surface_to_id[v.id_to_surface[i]] = i;
  }
  for (const std::string& t : tokens) {
    if (t.empty()) throw ComputeError("vocabulary: empty token surface");
    auto [it, inserted] = v.surface_to_id.emplace(t, v.size());
    (void)it;
    if (!inserted) {
      throw ComputeError("vocabulary: duplicate or reserved token '" + t + "'");
    }
    v.id_to_surface.push_back(t);
  }
  return v;
}

int Vocabulary::encode(const std::string& surface) const {
  auto it = surface_to_id.find(surface);
  return it == surface_to_id.end() ? kUnk : it->second;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= size()) {
    throw ComputeError("vocabulary: id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(size()));
  }
  return id_to_surface[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode_all(const Sentence& sentence) const {
  std::vector<int> ids;
  ids.reserve(sentence.size());
  for (const Token& t : sentence.tokens) ids.push_back(encode(t.surface));
  return ids;
}

std::vector<EncodedPair> encode_pairs(const std::vector<ParallelPair>& pairs,
                                      const Vocabulary& src_vocab,
                                      const Vocabulary& tgt_vocab) {
  std::vector<EncodedPair> out;
  out.reserve(pairs.size());
  for (const ParallelPair& p : pairs) {
    out.push_back({src_vocab.encode_all(p.source), tgt_vocab.encode_all(p.reference)});
  }
  return out;
}

// --- config validation ----------------------------------------------------------

void ModelConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || encoder_layers < 1 || decoder_layers < 1 ||
      attention_heads < 1 || max_len < 1) {
    throw UsageError("model config: dims, layer counts, heads and max_len must be >= 1");
  }
  if (embed_dim % attention_heads != 0) {
    throw UsageError("model config: embed_dim " + std::to_string(embed_dim) +
                     " not divisible by attention_heads " + std::to_string(attention_heads));
  }
  if (!(dropout_rate >= 0.0) || !(dropout_rate < 1.0)) {
    throw UsageError("model config: dropout must lie in [0,1)");
  }
  if (vocab_size_src < 0 || vocab_size_tgt < 0) {
    throw UsageError("model config: vocabulary sizes cannot be negative");
  }
}

void TrainConfig::validate() const {
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw UsageError("train config: beta1 and beta2 must lie in (0,1)");
  }
  if (adam_eps <= 0.0) throw UsageError("train config: adam eps must be positive");
  if (warmup_steps < 0) throw UsageError("train config: warmup must be >= 0");
  if (batch_size < 1) throw UsageError("train config: batch size must be >= 1");
  if (max_steps < 0) throw UsageError("train config: max steps must be >= 0");
  if (!(lr_factor > 0.0)) throw UsageError("train config: lr factor must be positive");
}

// --- parameter layout -----------------------------------------------------------

ToyModel::View ToyModel::alloc(int rows, int cols) {
  View v{total_params_, rows, cols};
  total_params_ += static_cast<std::ptrdiff_t>(rows) * cols;
  return v;
}

void ToyModel::build_views() {
  const int e = cfg_.embed_dim;
  const int f = cfg_.hidden_dim;
  auto attn = [&] {
    AttnViews a;
    a.wq = alloc(e, e); a.bq = alloc(e, 1);
    a.wk = alloc(e, e); a.bk = alloc(e, 1);
    a.wv = alloc(e, e); a.bv = alloc(e, 1);
    a.wo = alloc(e, e); a.bo = alloc(e, 1);
    return a;
  };
  auto ln = [&] { return LnViews{alloc(e, 1), alloc(e, 1)}; };
  auto ffn = [&] { return FfnViews{alloc(e, f), alloc(f, 1), alloc(f, e), alloc(e, 1)}; };

  views_.src_emb = alloc(cfg_.vocab_size_src, e);
  views_.tgt_emb = alloc(cfg_.vocab_size_tgt, e);
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    views_.enc.push_back(EncLayerViews{attn(), ln(), ffn(), ln()});
  }
  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    views_.dec.push_back(DecLayerViews{attn(), ln(), attn(), ln(), ffn(), ln()});
  }
  views_.out_w = alloc(e, cfg_.vocab_size_tgt);
  views_.out_b = alloc(cfg_.vocab_size_tgt, 1);
}

ToyModel::ToyModel(ModelConfig cfg, Vocabulary src_vocab, Vocabulary tgt_vocab)
    : cfg_(cfg), src_vocab_(std::move(src_vocab)), tgt_vocab_(std::move(tgt_vocab)) {
  if (cfg_.vocab_size_src == 0) cfg_.vocab_size_src = src_vocab_.size();
  if (cfg_.vocab_size_tgt == 0) cfg_.vocab_size_tgt = tgt_vocab_.size();
  cfg_.validate();
  if (cfg_.vocab_size_src != src_vocab_.size() || cfg_.vocab_size_tgt != tgt_vocab_.size()) {
    throw UsageError("model config: vocabulary sizes (" + std::to_string(src_vocab_.size()) +
                     ", " + std::to_string(tgt_vocab_.size()) +
                     ") do not match the configured sizes (" +
                     std::to_string(cfg_.vocab_size_src) + ", " +
                     std::to_string(cfg_.vocab_size_tgt) + ")");
  }
  build_views();
  params_ = Eigen::VectorXd::Zero(total_params_);
}

void ToyModel::initialize(RandomSource& rng) {
  auto fill_xavier = [&](const View& v) {
    const double limit = std::sqrt(6.0 / (v.rows + v.cols));
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(v.rows) * v.cols; ++k) {
      params_[v.off + k] = (2.0 * rng.uniform() - 1.0) * limit;
    }
  };
  auto fill_embed = [&](const View& v) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.embed_dim));
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(v.rows) * v.cols; ++k) {
      params_[v.off + k] = rng.normal() * scale;
    }
  };
  auto fill_const = [&](const View& v, double value) {
    for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(v.rows) * v.cols; ++k) {
      params_[v.off + k] = value;
    }
  };
  auto init_attn = [&](const AttnViews& a) {
    fill_xavier(a.wq); fill_const(a.bq, 0.0);
    fill_xavier(a.wk); fill_const(a.bk, 0.0);
    fill_xavier(a.wv); fill_const(a.bv, 0.0);
    fill_xavier(a.wo); fill_const(a.bo, 0.0);
  };
  auto init_ln = [&](const LnViews& l) { fill_const(l.gamma, 1.0); fill_const(l.beta, 0.0); };
  auto init_ffn = [&](const FfnViews& f) {
    fill_xavier(f.w1); fill_const(f.b1, 0.0);
    fill_xavier(f.w2); fill_const(f.b2, 0.0);
  };

  fill_embed(views_.src_emb);
  fill_embed(views_.tgt_emb);
  for (const EncLayerViews& l : views_.enc) {
    init_attn(l.attn); init_ln(l.ln1); init_ffn(l.ffn); init_ln(l.ln2);
  }
  for (const DecLayerViews& l : views_.dec) {
    init_attn(l.self_attn); init_ln(l.ln1);
    init_attn(l.cross_attn); init_ln(l.ln2);
    init_ffn(l.ffn); init_ln(l.ln3);
  }
  fill_xavier(views_.out_w);
  fill_const(views_.out_b, 0.0);
}

// --- forward caches and building blocks -------------------------------------------

namespace {

struct Ctx {
  const ModelConfig& cfg;
  const Eigen::VectorXd& params;
  ConstMatMap mat(const ToyModel::View& v) const {
    return ConstMatMap(params.data() + v.off, v.rows, v.cols);
  }
  ConstVecMap vec(const ToyModel::View& v) const {
    return ConstVecMap(params.data() + v.off, v.rows);
  }
};

struct GradCtx {
  Eigen::VectorXd& grad;
  MatMap mat(const ToyModel::View& v) {
    return MatMap(grad.data() + v.off, v.rows, v.cols);
  }
  VecMap vec(const ToyModel::View& v) {
    return VecMap(grad.data() + v.off, v.rows);
  }
};

struct LnCache {
  Eigen::MatrixXd xhat;
  Eigen::VectorXd inv_std;
};

struct DropCache {
  Eigen::MatrixXd mask;
  bool active = false;
};

struct AttnCache {
  Eigen::MatrixXd xq, xkv, q, k, v, c;
  std::vector<Eigen::MatrixXd> p;  // per-head softmax probabilities
};

struct FfnCache {
  Eigen::MatrixXd x, h;  // h = x*W1 + b1 before the ReLU
};

struct EmbCache {
  std::vector<int> ids;
  DropCache drop;
};

struct EncLayerCache {
  AttnCache attn;
  DropCache drop_a;
  LnCache ln1;
  FfnCache ffn;
  DropCache drop_f;
  LnCache ln2;
};

struct DecLayerCache {
  AttnCache self_attn;
  DropCache drop_a;
  LnCache ln1;
  AttnCache cross;
  DropCache drop_c;
  LnCache ln2;
  FfnCache ffn;
  DropCache drop_f;
  LnCache ln3;
};

struct PairTrace {
  EmbCache semb, temb;
  std::vector<EncLayerCache> enc;
  std::vector<DecLayerCache> dec;
  Eigen::MatrixXd enc_out, dec_out;
};

void add_positional_encoding(Eigen::MatrixXd& x) {
  const int e = static_cast<int>(x.cols());
  for (int pos = 0; pos < x.rows(); ++pos) {
    for (int i = 0; i + 1 < e; i += 2) {
      const double angle = pos * std::exp(-std::log(10000.0) * i / e);
      x(pos, i) += std::sin(angle);
      x(pos, i + 1) += std::cos(angle);
    }
    if (e % 2 == 1) {
      const double angle = pos * std::exp(-std::log(10000.0) * (e - 1) / e);
      x(pos, e - 1) += std::sin(angle);
    }
  }
}

Eigen::MatrixXd dropout_fwd(Eigen::MatrixXd x, double rate, DropCache& c, bool train_mode,
                            RandomSource* rng) {
  if (!train_mode || rate <= 0.0) {
    c.active = false;
    return x;
  }
  if (rng == nullptr) {
    throw ComputeError("dropout requires a random source in training mode");
  }
  c.active = true;
  const double keep = 1.0 - rate;
  c.mask.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      c.mask(i, j) = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    }
  }
  return x.cwiseProduct(c.mask);
}

Eigen::MatrixXd dropout_bwd(const Eigen::MatrixXd& dy, const DropCache& c) {
  if (!c.active) return dy;
  return dy.cwiseProduct(c.mask);
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd p(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::ArrayXd row = s.row(i).transpose().array();
    row -= row.maxCoeff();
    Eigen::ArrayXd ex = row.exp();
    p.row(i) = (ex / ex.sum()).matrix().transpose();
  }
  return p;
}

Eigen::MatrixXd embed_fwd(const Ctx& c, const ToyModel::View& emb, const std::vector<int>& ids,
                          EmbCache& cache, bool train_mode, RandomSource* rng) {
  const int e = c.cfg.embed_dim;
  cache.ids = ids;
  ConstMatMap table = c.mat(emb);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ids.size()), e);
  const double scale = std::sqrt(static_cast<double>(e));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= emb.rows) {
      throw ComputeError("token id " + std::to_string(ids[i]) +
                         " outside embedding table of size " + std::to_string(emb.rows) +
                         " (vocabulary mismatch)");
    }
    x.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]) * scale;
  }
  add_positional_encoding(x);
  return dropout_fwd(std::move(x), c.cfg.dropout_rate, cache.drop, train_mode, rng);
}

void embed_bwd(const Ctx& c, GradCtx& g, const ToyModel::View& emb, const EmbCache& cache,
               const Eigen::MatrixXd& dxin) {
  Eigen::MatrixXd dx0 = dropout_bwd(dxin, cache.drop);
  MatMap table_grad = g.mat(emb);
  const double scale = std::sqrt(static_cast<double>(c.cfg.embed_dim));
  for (std::size_t i = 0; i < cache.ids.size(); ++i) {
    table_grad.row(cache.ids[i]) += dx0.row(static_cast<Eigen::Index>(i)) * scale;
  }
}

Eigen::MatrixXd ln_fwd(const Ctx& c, const ToyModel::LnViews& lv, const Eigen::MatrixXd& x,
                       LnCache& cache) {
  const Eigen::Index e = x.cols();
  ConstVecMap gamma = c.vec(lv.gamma);
  ConstVecMap beta = c.vec(lv.beta);
  cache.xhat.resize(x.rows(), e);
  cache.inv_std.resize(x.rows());
  Eigen::MatrixXd y(x.rows(), e);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::ArrayXd row = x.row(i).transpose().array();
    const double mu = row.mean();
    Eigen::ArrayXd centered = row - mu;
    const double var = centered.square().sum() / static_cast<double>(e);
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    Eigen::ArrayXd xhat = centered * inv;
    cache.xhat.row(i) = xhat.matrix().transpose();
    cache.inv_std[i] = inv;
    y.row(i) = (xhat * gamma.array() + beta.array()).matrix().transpose();
  }
  return y;
}

Eigen::MatrixXd ln_bwd(const Ctx& c, GradCtx& g, const ToyModel::LnViews& lv,
                       const LnCache& cache, const Eigen::MatrixXd& dy) {
  ConstVecMap gamma = c.vec(lv.gamma);
  g.vec(lv.gamma) += dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
  g.vec(lv.beta) += dy.colwise().sum().transpose();
  Eigen::MatrixXd dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    Eigen::ArrayXd dxhat = dy.row(i).transpose().array() * gamma.array();
    Eigen::ArrayXd xhat = cache.xhat.row(i).transpose().array();
    const double m1 = dxhat.mean();
    const double m2 = (dxhat * xhat).mean();
    dx.row(i) = (cache.inv_std[i] * (dxhat - m1 - xhat * m2)).matrix().transpose();
  }
  return dx;
}

Eigen::MatrixXd ffn_fwd(const Ctx& c, const ToyModel::FfnViews& fv, const Eigen::MatrixXd& x,
                        FfnCache& cache) {
  cache.x = x;
  cache.h = (x * c.mat(fv.w1)).rowwise() + c.vec(fv.b1).transpose();
  Eigen::MatrixXd a = cache.h.cwiseMax(0.0);
  return (a * c.mat(fv.w2)).rowwise() + c.vec(fv.b2).transpose();
}

Eigen::MatrixXd ffn_bwd(const Ctx& c, GradCtx& g, const ToyModel::FfnViews& fv,
                        const FfnCache& cache, const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd a = cache.h.cwiseMax(0.0);
  g.mat(fv.w2) += a.transpose() * dy;
  g.vec(fv.b2) += dy.colwise().sum().transpose();
  Eigen::MatrixXd da = dy * c.mat(fv.w2).transpose();
  Eigen::MatrixXd dh = (cache.h.array() > 0.0).select(da, 0.0);
  g.mat(fv.w1) += cache.x.transpose() * dh;
  g.vec(fv.b1) += dh.colwise().sum().transpose();
  return dh * c.mat(fv.w1).transpose();
}

Eigen::MatrixXd attn_fwd(const Ctx& c, const ToyModel::AttnViews& av, const Eigen::MatrixXd& xq,
                         const Eigen::MatrixXd& xkv, bool causal, AttnCache& cache) {
  const int e = c.cfg.embed_dim;
  const int heads = c.cfg.attention_heads;
  const int dh = e / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  cache.xq = xq;
  cache.xkv = xkv;
  cache.q = (xq * c.mat(av.wq)).rowwise() + c.vec(av.bq).transpose();
  cache.k = (xkv * c.mat(av.wk)).rowwise() + c.vec(av.bk).transpose();
  cache.v = (xkv * c.mat(av.wv)).rowwise() + c.vec(av.bv).transpose();
  cache.p.assign(static_cast<std::size_t>(heads), Eigen::MatrixXd());
  cache.c.resize(xq.rows(), e);
  for (int h = 0; h < heads; ++h) {
    const int o = h * dh;
    auto qh = cache.q.middleCols(o, dh);
    auto kh = cache.k.middleCols(o, dh);
    auto vh = cache.v.middleCols(o, dh);
    Eigen::MatrixXd s = qh * kh.transpose() * inv_sqrt;
    if (causal) {
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = kMaskValue;
      }
    }
    cache.p[static_cast<std::size_t>(h)] = softmax_rows(s);
    cache.c.middleCols(o, dh) = cache.p[static_cast<std::size_t>(h)] * vh;
  }
  return (cache.c * c.mat(av.wo)).rowwise() + c.vec(av.bo).transpose();
}

// Accumulates input gradients into dxq/dxkv (which must be pre-sized and may
// alias neither each other nor cache contents).
void attn_bwd(const Ctx& c, GradCtx& g, const ToyModel::AttnViews& av, const AttnCache& cache,
              const Eigen::MatrixXd& dout, Eigen::MatrixXd& dxq, Eigen::MatrixXd& dxkv) {
  const int e = c.cfg.embed_dim;
  const int heads = c.cfg.attention_heads;
  const int dh = e / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  g.mat(av.wo) += cache.c.transpose() * dout;
  g.vec(av.bo) += dout.colwise().sum().transpose();
  Eigen::MatrixXd dc = dout * c.mat(av.wo).transpose();

  Eigen::MatrixXd dq(cache.q.rows(), e), dk(cache.k.rows(), e), dv(cache.v.rows(), e);
  for (int h = 0; h < heads; ++h) {
    const int o = h * dh;
    const Eigen::MatrixXd& p = cache.p[static_cast<std::size_t>(h)];
    auto qh = cache.q.middleCols(o, dh);
    auto kh = cache.k.middleCols(o, dh);
    auto vh = cache.v.middleCols(o, dh);
    Eigen::MatrixXd dch = dc.middleCols(o, dh);
    Eigen::MatrixXd dp = dch * vh.transpose();
    dv.middleCols(o, dh) = p.transpose() * dch;
    Eigen::MatrixXd ds(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      Eigen::ArrayXd prow = p.row(i).transpose().array();
      Eigen::ArrayXd dprow = dp.row(i).transpose().array();
      const double dot = (prow * dprow).sum();
      ds.row(i) = (prow * (dprow - dot)).matrix().transpose();
    }
    ds *= inv_sqrt;
    dq.middleCols(o, dh) = ds * kh;
    dk.middleCols(o, dh) = ds.transpose() * qh;
  }

  g.mat(av.wq) += cache.xq.transpose() * dq;
  g.vec(av.bq) += dq.colwise().sum().transpose();
  g.mat(av.wk) += cache.xkv.transpose() * dk;
  g.vec(av.bk) += dk.colwise().sum().transpose();
  g.mat(av.wv) += cache.xkv.transpose() * dv;
  g.vec(av.bv) += dv.colwise().sum().transpose();

  dxq += dq * c.mat(av.wq).transpose();
  dxkv += dk * c.mat(av.wk).transpose() + dv * c.mat(av.wv).transpose();
}

Eigen::MatrixXd enc_layer_fwd(const Ctx& c, const ToyModel::EncLayerViews& lv,
                              const Eigen::MatrixXd& x, EncLayerCache& cache, bool train_mode,
                              RandomSource* rng) {
  Eigen::MatrixXd a = attn_fwd(c, lv.attn, x, x, /*causal=*/false, cache.attn);
  Eigen::MatrixXd x1 = ln_fwd(
      c, lv.ln1, x + dropout_fwd(std::move(a), c.cfg.dropout_rate, cache.drop_a, train_mode, rng),
      cache.ln1);
  Eigen::MatrixXd f = ffn_fwd(c, lv.ffn, x1, cache.ffn);
  return ln_fwd(
      c, lv.ln2, x1 + dropout_fwd(std::move(f), c.cfg.dropout_rate, cache.drop_f, train_mode, rng),
      cache.ln2);
}

Eigen::MatrixXd enc_layer_bwd(const Ctx& c, GradCtx& g, const ToyModel::EncLayerViews& lv,
                              const EncLayerCache& cache, const Eigen::MatrixXd& dy) {
  Eigen::MatrixXd g2 = ln_bwd(c, g, lv.ln2, cache.ln2, dy);
  Eigen::MatrixXd df = dropout_bwd(g2, cache.drop_f);
  Eigen::MatrixXd dx1 = g2 + ffn_bwd(c, g, lv.ffn, cache.ffn, df);
  Eigen::MatrixXd g1 = ln_bwd(c, g, lv.ln1, cache.ln1, dx1);
  Eigen::MatrixXd da = dropout_bwd(g1, cache.drop_a);
  Eigen::MatrixXd dxq = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
  Eigen::MatrixXd dxkv = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
  attn_bwd(c, g, lv.attn, cache.attn, da, dxq, dxkv);
  return g1 + dxq + dxkv;
}

Eigen::MatrixXd dec_layer_fwd(const Ctx& c, const ToyModel::DecLayerViews& lv,
                              const Eigen::MatrixXd& x, const Eigen::MatrixXd& enc_out,
                              DecLayerCache& cache, bool train_mode, RandomSource* rng) {
  Eigen::MatrixXd a = attn_fwd(c, lv.self_attn, x, x, /*causal=*/true, cache.self_attn);
  Eigen::MatrixXd x1 = ln_fwd(
      c, lv.ln1, x + dropout_fwd(std::move(a), c.cfg.dropout_rate, cache.drop_a, train_mode, rng),
      cache.ln1);
  Eigen::MatrixXd cr = attn_fwd(c, lv.cross_attn, x1, enc_out, /*causal=*/false, cache.cross);
  Eigen::MatrixXd x2 = ln_fwd(
      c, lv.ln2, x1 + dropout_fwd(std::move(cr), c.cfg.dropout_rate, cache.drop_c, train_mode, rng),
      cache.ln2);
  Eigen::MatrixXd f = ffn_fwd(c, lv.ffn, x2, cache.ffn);
  return ln_fwd(
      c, lv.ln3, x2 + dropout_fwd(std::move(f), c.cfg.dropout_rate, cache.drop_f, train_mode, rng),
      cache.ln3);
}

Eigen::MatrixXd dec_layer_bwd(const Ctx& c, GradCtx& g, const ToyModel::DecLayerViews& lv,
                              const DecLayerCache& cache, const Eigen::MatrixXd& dy,
                              Eigen::MatrixXd& denc_accum) {
  Eigen::MatrixXd g3 = ln_bwd(c, g, lv.ln3, cache.ln3, dy);
  Eigen::MatrixXd df = dropout_bwd(g3, cache.drop_f);
  Eigen::MatrixXd dx2 = g3 + ffn_bwd(c, g, lv.ffn, cache.ffn, df);

  Eigen::MatrixXd g2 = ln_bwd(c, g, lv.ln2, cache.ln2, dx2);
  Eigen::MatrixXd dcr = dropout_bwd(g2, cache.drop_c);
  Eigen::MatrixXd dx1 = g2;
  attn_bwd(c, g, lv.cross_attn, cache.cross, dcr, dx1, denc_accum);

  Eigen::MatrixXd g1 = ln_bwd(c, g, lv.ln1, cache.ln1, dx1);
  Eigen::MatrixXd da = dropout_bwd(g1, cache.drop_a);
  Eigen::MatrixXd dxq = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
  Eigen::MatrixXd dxkv = Eigen::MatrixXd::Zero(dy.rows(), dy.cols());
  attn_bwd(c, g, lv.self_attn, cache.self_attn, da, dxq, dxkv);
  return g1 + dxq + dxkv;
}

std::vector<int> with_eos(const std::vector<int>& src) {
  std::vector<int> s = src;
  s.push_back(Vocabulary::kEos);
  return s;
}

std::vector<int> with_bos(const std::vector<int>& tgt) {
  std::vector<int> t;
  t.reserve(tgt.size() + 1);
  t.push_back(Vocabulary::kBos);
  t.insert(t.end(), tgt.begin(), tgt.end());
  return t;
}

Eigen::MatrixXd encoder_forward(const Ctx& c, const ToyModel::Views& views,
                                const std::vector<int>& src, PairTrace& tr, bool train_mode,
                                RandomSource* rng) {
  tr.enc.resize(views.enc.size());
  Eigen::MatrixXd x = embed_fwd(c, views.src_emb, with_eos(src), tr.semb, train_mode, rng);
  for (std::size_t l = 0; l < views.enc.size(); ++l) {
    x = enc_layer_fwd(c, views.enc[l], x, tr.enc[l], train_mode, rng);
  }
  tr.enc_out = x;
  return x;
}

Eigen::MatrixXd decoder_forward(const Ctx& c, const ToyModel::Views& views,
                                const std::vector<int>& tgt_in, const Eigen::MatrixXd& enc_out,
                                PairTrace& tr, bool train_mode, RandomSource* rng) {
  tr.dec.resize(views.dec.size());
  Eigen::MatrixXd x = embed_fwd(c, views.tgt_emb, tgt_in, tr.temb, train_mode, rng);
  for (std::size_t l = 0; l < views.dec.size(); ++l) {
    x = dec_layer_fwd(c, views.dec[l], x, enc_out, tr.dec[l], train_mode, rng);
  }
  tr.dec_out = x;
  return (x * c.mat(views.out_w)).rowwise() + c.vec(views.out_b).transpose();
}

void backward_pair(const Ctx& c, GradCtx& g, const ToyModel::Views& views, const PairTrace& tr,
                   const Eigen::MatrixXd& dlogits) {
  g.mat(views.out_w) += tr.dec_out.transpose() * dlogits;
  g.vec(views.out_b) += dlogits.colwise().sum().transpose();
  Eigen::MatrixXd dx = dlogits * c.mat(views.out_w).transpose();

  Eigen::MatrixXd denc = Eigen::MatrixXd::Zero(tr.enc_out.rows(), tr.enc_out.cols());
  for (std::size_t l = views.dec.size(); l-- > 0;) {
    dx = dec_layer_bwd(c, g, views.dec[l], tr.dec[l], dx, denc);
  }
  embed_bwd(c, g, views.tgt_emb, tr.temb, dx);

  for (std::size_t l = views.enc.size(); l-- > 0;) {
    denc = enc_layer_bwd(c, g, views.enc[l], tr.enc[l], denc);
  }
  embed_bwd(c, g, views.src_emb, tr.semb, denc);
}

}  // namespace

// --- public forward entry points ---------------------------------------------------

Eigen::MatrixXd ToyModel::forced_logits(const std::vector<int>& src,
                                        const std::vector<int>& tgt) const {
  Ctx c{cfg_, params_};
  PairTrace tr;
  Eigen::MatrixXd enc = encoder_forward(c, views_, src, tr, /*train_mode=*/false, nullptr);
  return decoder_forward(c, views_, with_bos(tgt), enc, tr, /*train_mode=*/false, nullptr);
}

Eigen::MatrixXd ToyModel::encode_source(const std::vector<int>& src) const {
  Ctx c{cfg_, params_};
  PairTrace tr;
  return encoder_forward(c, views_, src, tr, /*train_mode=*/false, nullptr);
}

Eigen::VectorXd ToyModel::next_distribution(const Eigen::MatrixXd& enc_out,
                                            const std::vector<int>& prefix_with_bos) const {
  if (prefix_with_bos.empty() || prefix_with_bos.front() != Vocabulary::kBos) {
    throw ComputeError("next_distribution: decoder prefix must start with the begin symbol");
  }
  Ctx c{cfg_, params_};
  PairTrace tr;
  Eigen::MatrixXd logits =
      decoder_forward(c, views_, prefix_with_bos, enc_out, tr, /*train_mode=*/false, nullptr);
  return softmax(logits.row(logits.rows() - 1).transpose());
}

double ToyModel::sentence_loss_grad(const std::vector<int>& src, const std::vector<int>& tgt,
                                    const std::vector<double>& epsilon_per_position,
                                    double weight, Eigen::VectorXd& grad, bool train_mode,
                                    RandomSource* rng) const {
  if (grad.size() != params_.size()) {
    throw ComputeError("sentence_loss_grad: gradient buffer has wrong size");
  }
  const std::size_t n1 = tgt.size() + 1;
  if (epsilon_per_position.size() != n1) {
    throw ComputeError("sentence_loss_grad: expected " + std::to_string(n1) +
                       " epsilon values, got " + std::to_string(epsilon_per_position.size()));
  }
  Ctx c{cfg_, params_};
  GradCtx g{grad};
  PairTrace tr;
  Eigen::MatrixXd enc = encoder_forward(c, views_, src, tr, train_mode, rng);
  Eigen::MatrixXd logits = decoder_forward(c, views_, with_bos(tgt), enc, tr, train_mode, rng);

  std::vector<int> targets = tgt;
  targets.push_back(Vocabulary::kEos);
  Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
  double loss = 0.0;
  for (std::size_t t = 0; t < n1; ++t) {
    Eigen::VectorXd q =
        target_distribution(targets[t], cfg_.vocab_size_tgt, epsilon_per_position[t]);
    Eigen::VectorXd grow;
    loss += smoothed_loss(logits.row(static_cast<Eigen::Index>(t)).transpose(), q, grow);
    dlogits.row(static_cast<Eigen::Index>(t)) = grow.transpose() * weight;
  }
  backward_pair(c, g, views_, tr, dlogits);
  return loss * weight;
}

double ToyModel::sentence_loss(const std::vector<int>& src, const std::vector<int>& tgt,
                               const std::vector<double>& epsilon_per_position) const {
  const std::size_t n1 = tgt.size() + 1;
  if (epsilon_per_position.size() != n1) {
    throw ComputeError("sentence_loss: expected " + std::to_string(n1) +
                       " epsilon values, got " + std::to_string(epsilon_per_position.size()));
  }
  Eigen::MatrixXd logits = forced_logits(src, tgt);
  std::vector<int> targets = tgt;
  targets.push_back(Vocabulary::kEos);
  double loss = 0.0;
  for (std::size_t t = 0; t < n1; ++t) {
    Eigen::VectorXd q =
        target_distribution(targets[t], cfg_.vocab_size_tgt, epsilon_per_position[t]);
    Eigen::VectorXd grow;
    loss += smoothed_loss(logits.row(static_cast<Eigen::Index>(t)).transpose(), q, grow);
  }
  return loss;
}

// --- training -----------------------------------------------------------------

double noam_learning_rate(int step, int embed_dim, int warmup_steps, double factor) {
  if (step < 1) throw ComputeError("noam_learning_rate: step must be >= 1");
  const double s = static_cast<double>(step);
  const double decay = 1.0 / std::sqrt(s);
  double rate = decay;
  if (warmup_steps > 0) {
    const double w = static_cast<double>(warmup_steps);
    rate = std::min(decay, s / (w * std::sqrt(w)));
  }
  return factor * rate / std::sqrt(static_cast<double>(embed_dim));
}

ToyModel train_model(const ModelConfig& model_cfg, const Vocabulary& src_vocab,
                     const Vocabulary& tgt_vocab, const std::vector<EncodedPair>& data,
                     const TrainConfig& train_cfg,
                     const std::vector<std::vector<double>>* first_pass_confidences,
                     TrainStats* stats) {
  train_cfg.validate();
  if (data.empty()) throw UsageError("train: empty corpus");
  if (train_cfg.smoothing.kind == SmoothingKind::Graduated && first_pass_confidences == nullptr) {
    throw UsageError("train: graduated smoothing requires first-pass confidences");
  }
  if (first_pass_confidences != nullptr && first_pass_confidences->size() != data.size()) {
    throw ComputeError("train: " + std::to_string(first_pass_confidences->size()) +
                       " confidence rows for " + std::to_string(data.size()) + " pairs");
  }

  // Per-pair epsilon schedule, fixed before training starts.
  std::vector<std::vector<double>> eps(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t n1 = data[i].tgt.size() + 1;
    eps[i].resize(n1);
    for (std::size_t t = 0; t < n1; ++t) {
      double conf = 0.0;
      if (train_cfg.smoothing.kind == SmoothingKind::Graduated) {
        const std::vector<double>& row = (*first_pass_confidences)[i];
        if (row.size() != n1) {
          throw ComputeError("train: confidence row " + std::to_string(i) + " has " +
                             std::to_string(row.size()) + " values, expected " +
                             std::to_string(n1));
        }
        conf = row[t];
      }
      eps[i][t] = assign_epsilon(train_cfg.smoothing, conf);
    }
  }

  RandomSource rng(train_cfg.seed);
  ToyModel model(model_cfg, src_vocab, tgt_vocab);
  model.initialize(rng);

  const std::size_t n_params = model.parameter_count();
  Eigen::VectorXd grad(n_params);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params));

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();  // triggers a shuffle on first use

  if (stats != nullptr) {
    stats->losses.clear();
    stats->losses.reserve(static_cast<std::size_t>(train_cfg.max_steps));
  }

  for (int step = 1; step <= train_cfg.max_steps; ++step) {
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(train_cfg.batch_size));
    for (int k = 0; k < train_cfg.batch_size; ++k) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }
    std::size_t total_tokens = 0;
    for (std::size_t i : batch) total_tokens += data[i].tgt.size() + 1;
    const double weight = 1.0 / static_cast<double>(total_tokens);

    grad.setZero();
    double loss = 0.0;
    for (std::size_t i : batch) {
      loss += model.sentence_loss_grad(data[i].src, data[i].tgt, eps[i], weight, grad,
                                       /*train_mode=*/true, &rng);
    }
    if (!std::isfinite(loss)) {
      throw ComputeError("training diverged at step " + std::to_string(step) +
                         " (non-finite loss)");
    }

    const double lr =
        noam_learning_rate(step, model_cfg.embed_dim, train_cfg.warmup_steps, train_cfg.lr_factor);
    const double bc1 = 1.0 - std::pow(train_cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(train_cfg.beta2, step);
    m = train_cfg.beta1 * m + (1.0 - train_cfg.beta1) * grad;
    v = train_cfg.beta2 * v + (1.0 - train_cfg.beta2) * grad.cwiseProduct(grad);
    model.parameters().array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + train_cfg.adam_eps);

    if (stats != nullptr) {
      stats->losses.push_back(loss);
      stats->final_loss = loss;
    }
  }
  return model;
}

// --- evaluation ---------------------------------------------------------------

std::vector<Prediction> teacher_forced_predictions(const ToyModel& model,
                                                   const std::vector<EncodedPair>& data) {
  std::vector<Prediction> preds;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const EncodedPair& pair = data[s];
    if (pair.tgt.empty()) continue;
    Eigen::MatrixXd logits = model.forced_logits(pair.src, pair.tgt);
    const int n = static_cast<int>(pair.tgt.size());
    for (int t = 0; t < n; ++t) {
      Eigen::VectorXd probs = softmax(logits.row(t).transpose());
      const int a = argmax_first(probs);
      Prediction p;
      p.token = model.target_vocab().decode(a);
      p.confidence = probs[a];
      p.correct = (a == pair.tgt[static_cast<std::size_t>(t)]);
      p.position_index = t;
      p.sentence_length = n;
      p.sentence_index = static_cast<int>(s);
      preds.push_back(std::move(p));
    }
  }
  return preds;
}

std::vector<std::vector<double>> confidence_pass(const ToyModel& model,
                                                 const std::vector<EncodedPair>& data) {
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (const EncodedPair& pair : data) {
    Eigen::MatrixXd logits = model.forced_logits(pair.src, pair.tgt);
    std::vector<int> targets = pair.tgt;
    targets.push_back(Vocabulary::kEos);
    std::vector<double> confs(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      Eigen::VectorXd probs = softmax(logits.row(static_cast<Eigen::Index>(t)).transpose());
      if (targets[t] < 0 || targets[t] >= probs.size()) {
        throw ComputeError("confidence_pass: token id outside model vocabulary");
      }
      confs[t] = probs[targets[t]];
    }
    out.push_back(std::move(confs));
  }
  return out;
}

std::vector<std::vector<bool>> teacher_forced_hits(const ToyModel& model,
                                                   const std::vector<EncodedPair>& data) {
  std::vector<std::vector<bool>> out;
  out.reserve(data.size());
  for (const EncodedPair& pair : data) {
    Eigen::MatrixXd logits = model.forced_logits(pair.src, pair.tgt);
    std::vector<bool> hits(pair.tgt.size());
    for (std::size_t t = 0; t < pair.tgt.size(); ++t) {
      Eigen::VectorXd probs = softmax(logits.row(static_cast<Eigen::Index>(t)).transpose());
      hits[t] = (argmax_first(probs) == pair.tgt[t]);
    }
    out.push_back(std::move(hits));
  }
  return out;
}

DecodeResult greedy_decode(const ToyModel& model, const std::vector<int>& src) {
  Eigen::MatrixXd enc = model.encode_source(src);
  std::vector<int> prefix = {Vocabulary::kBos};
  DecodeResult r;
  for (int step = 0; step < model.config().max_len; ++step) {
    Eigen::VectorXd dist = model.next_distribution(enc, prefix);
    int best_v = 0;
    double best_s = r.score + std::log(dist[0]);
    for (int v = 1; v < dist.size(); ++v) {
      const double s = r.score + std::log(dist[v]);
      if (s > best_s) {
        best_s = s;
        best_v = v;
      }
    }
    r.score = best_s;
    if (best_v == Vocabulary::kEos) return r;
    r.ids.push_back(best_v);
    r.confidences.push_back(dist[best_v]);
    prefix.push_back(best_v);
  }
  r.truncated = true;
  return r;
}

DecodeResult beam_decode(const ToyModel& model, const std::vector<int>& src, int beam_size) {
  if (beam_size < 1) throw UsageError("beam size must be >= 1");
  Eigen::MatrixXd enc = model.encode_source(src);

  struct Hyp {
    std::vector<int> ids;
    std::vector<double> confs;
    double score = 0.0;
    bool done = false;
  };
  struct Cand {
    double score;
    int parent;
    int token;  // -1 carries a finished hypothesis forward
    double prob;
  };

  std::vector<Hyp> hyps{Hyp{}};
  for (int step = 0; step < model.config().max_len; ++step) {
    bool any_live = false;
    for (const Hyp& h : hyps) any_live |= !h.done;
    if (!any_live) break;

    std::vector<Cand> cands;
    for (int i = 0; i < static_cast<int>(hyps.size()); ++i) {
      const Hyp& h = hyps[static_cast<std::size_t>(i)];
      if (h.done) {
        cands.push_back({h.score, i, -1, 0.0});
        continue;
      }
      Eigen::VectorXd dist = model.next_distribution(enc, with_bos(h.ids));
      for (int v = 0; v < dist.size(); ++v) {
        cands.push_back({h.score + std::log(dist[v]), i, v, dist[v]});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });

    std::vector<Hyp> next;
    const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(beam_size));
    next.reserve(keep);
    for (std::size_t k = 0; k < keep; ++k) {
      const Cand& cd = cands[k];
      Hyp h = hyps[static_cast<std::size_t>(cd.parent)];
      if (cd.token == -1) {
        // finished hypothesis carried unchanged
      } else if (cd.token == Vocabulary::kEos) {
        h.done = true;
        h.score = cd.score;
      } else {
        h.ids.push_back(cd.token);
        h.confs.push_back(cd.prob);
        h.score = cd.score;
      }
      next.push_back(std::move(h));
    }
    hyps = std::move(next);
  }

  const Hyp* best_done = nullptr;
  for (const Hyp& h : hyps) {
    if (h.done) {
      best_done = &h;  // hyps are score-ordered after the final sort
      break;
    }
  }
  const Hyp& pick = best_done != nullptr ? *best_done : hyps.front();
  DecodeResult r;
  r.ids = pick.ids;
  r.confidences = pick.confs;
  r.score = pick.score;
  r.truncated = (best_done == nullptr);
  return r;
}

double sequence_logprob(const ToyModel& model, const std::vector<int>& src,
                        const std::vector<int>& tgt) {
  Eigen::MatrixXd logits = model.forced_logits(src, tgt);
  std::vector<int> targets = tgt;
  targets.push_back(Vocabulary::kEos);
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    Eigen::ArrayXd row = logits.row(static_cast<Eigen::Index>(t)).transpose().array();
    const double mx = row.maxCoeff();
    const double logz = std::log((row - mx).exp().sum());
    total += row[targets[t]] - mx - logz;
  }
  return total;
}

InferenceOutputs inference_predictions(const ToyModel& model,
                                       const std::vector<ParallelPair>& pairs, int beam_size,
                                       int max_shift_distance, DeletionAttach attach,
                                       const std::string& subword_marker) {
  InferenceOutputs out;
  for (std::size_t s = 0; s < pairs.size(); ++s) {
    const ParallelPair& pair = pairs[s];
    std::vector<int> src = model.source_vocab().encode_all(pair.source);
    DecodeResult dr = beam_decode(model, src, beam_size);
    if (dr.truncated) ++out.truncated;

    std::vector<std::string> surfaces;
    surfaces.reserve(dr.ids.size());
    for (int id : dr.ids) surfaces.push_back(model.target_vocab().decode(id));
    Sentence hyp = make_sentence(surfaces, subword_marker);
    out.hypotheses.push_back(hyp);
    out.decodes.push_back(dr);

    if (hyp.empty()) {
      ++out.empty_hypotheses;
      continue;
    }
    TerResult ter = ter_align(hyp, pair.reference, max_shift_distance);
    std::vector<TokenLabel> labels = map_deletions(ter, hyp.size(), attach);
    const int n = static_cast<int>(hyp.size());
    for (int i = 0; i < n; ++i) {
      Prediction p;
      p.token = hyp[static_cast<std::size_t>(i)].surface;
      p.confidence = dr.confidences[static_cast<std::size_t>(i)];
      p.correct = (labels[static_cast<std::size_t>(i)].value == LabelValue::C);
      p.position_index = i;
      p.sentence_length = n;
      p.sentence_index = static_cast<int>(s);
      p.label = labels[static_cast<std::size_t>(i)];
      out.predictions.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace infercal
