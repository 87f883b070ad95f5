#include "ct3d/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ct3d {

using num::ParamId;
using num::ParamStore;
using num::Tape;
using num::Tensor2;
using num::Var;

void validate(const EncoderConfig& cfg) {
  if (cfg.dim == 0 || cfg.heads == 0) throw std::invalid_argument("encoder: dim and heads must be > 0");
  if (cfg.dim % cfg.heads != 0) throw std::invalid_argument("encoder: dim must be divisible by heads");
  if (cfg.dim < 2) throw std::invalid_argument("encoder: dim must be >= 2 for layer norm");
  if (cfg.n_points == 0) throw std::invalid_argument("encoder: n_points must be >= 1");
  if (cfg.ffn_hidden == 0) throw std::invalid_argument("encoder: ffn_hidden must be >= 1");
}

namespace {

ParamId add_weight(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng) {
  return store.add(name, num::uniform_init(in, out, in, rng));
}

ParamId add_zeros(ParamStore& store, const std::string& name, std::size_t n) {
  return store.add(name, Tensor2(1, n));
}

ParamId add_ones(ParamStore& store, const std::string& name, std::size_t n) {
  return store.add(name, Tensor2(1, n, 1.0));
}

Var affine(Tape& tape, const ParamStore& store, Var x, ParamId w, ParamId b) {
  return tape.add_row(tape.matmul(x, tape.param(store, w)), tape.param(store, b));
}

std::vector<std::size_t> inverse_permutation(const std::vector<std::size_t>& order) {
  std::vector<std::size_t> pos(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  return pos;
}

// Encoder forward in canonical row order; returns the order used.
Var encode_canonical(Tape& tape, const ParamStore& store, const EncoderParams& params,
                     const RoiSample& sample, const EncoderConfig& cfg,
                     std::vector<std::size_t>& order, std::vector<Var>* attention) {
  Tensor2 input = embedding_input(sample, cfg);
  order = canonical_row_order(input);
  Var x = tape.gather_rows(tape.constant(std::move(input)), order);
  x = embed_points(tape, store, params, x);
  for (const auto& layer : params.layers) x = self_attention_layer(tape, store, layer, x, cfg, attention);
  return x;
}

}  // namespace

EncoderParams register_encoder_params(ParamStore& store, const EncoderConfig& cfg,
                                      std::mt19937_64& rng) {
  validate(cfg);
  const std::size_t d = cfg.dim;
  EncoderParams p;
  p.embed_w = add_weight(store, "encoder.embed.weight", embedding_input_width(cfg), d, rng);
  p.embed_b = add_zeros(store, "encoder.embed.bias", d);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = "encoder.layer" + std::to_string(l) + ".";
    EncoderLayerParams lp{};
    lp.wq = add_weight(store, pre + "attn.wq", d, d, rng);
    lp.wk = add_weight(store, pre + "attn.wk", d, d, rng);
    lp.wv = add_weight(store, pre + "attn.wv", d, d, rng);
    if (cfg.output_projection) {
      lp.wo = add_weight(store, pre + "attn.wo", d, d, rng);
      lp.bo = add_zeros(store, pre + "attn.bo", d);
    }
    lp.ln1_gain = add_ones(store, pre + "norm1.gain", d);
    lp.ln1_bias = add_zeros(store, pre + "norm1.bias", d);
    lp.ffn1_w = add_weight(store, pre + "ffn.fc1.weight", d, cfg.ffn_hidden, rng);
    lp.ffn1_b = add_zeros(store, pre + "ffn.fc1.bias", cfg.ffn_hidden);
    lp.ffn2_w = add_weight(store, pre + "ffn.fc2.weight", cfg.ffn_hidden, d, rng);
    lp.ffn2_b = add_zeros(store, pre + "ffn.fc2.bias", d);
    lp.ln2_gain = add_ones(store, pre + "norm2.gain", d);
    lp.ln2_bias = add_zeros(store, pre + "norm2.bias", d);
    p.layers.push_back(lp);
  }
  return p;
}

std::size_t embedding_input_width(const EncoderConfig& cfg) {
  return (cfg.embedding == EmbeddingKind::keypoints ? kRelCoordCols : 7) + cfg.raw_feature_dim;
}

Tensor2 embedding_input(const RoiSample& sample, const EncoderConfig& cfg) {
  const Tensor2& rel = sample.rel_features;
  if (rel.cols() != kRelCoordCols + cfg.raw_feature_dim)
    throw std::invalid_argument("embedding_input: sample width does not match raw_feature_dim");
  if (rel.rows() != cfg.n_points)
    throw std::invalid_argument("embedding_input: sample row count does not match n_points");
  if (cfg.embedding == EmbeddingKind::keypoints) return rel;

  const Box3D& b = sample.proposal;
  const double proposal_info[4] = {b.l, b.w, b.h, wrap_angle(b.yaw)};
  Tensor2 out(rel.rows(), embedding_input_width(cfg));
  for (std::size_t r = 0; r < rel.rows(); ++r) {
    auto src = rel.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.begin() + 3, dst.begin());
    std::copy(std::begin(proposal_info), std::end(proposal_info), dst.begin() + 3);
    std::copy(src.begin() + kRelCoordCols, src.end(), dst.begin() + 7);
  }
  return out;
}

std::vector<std::size_t> canonical_row_order(const Tensor2& m) {
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&m](std::size_t a, std::size_t b) {
    auto ra = m.row(a);
    auto rb = m.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return order;
}

Var embed_points(Tape& tape, const ParamStore& store, const EncoderParams& params, Var input) {
  return affine(tape, store, input, params.embed_w, params.embed_b);
}

Var self_attention_layer(Tape& tape, const ParamStore& store, const EncoderLayerParams& layer,
                         Var x, const EncoderConfig& cfg, std::vector<Var>* attention) {
  const std::size_t hd = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  const Var q = tape.matmul(x, tape.param(store, layer.wq));
  const Var k = tape.matmul(x, tape.param(store, layer.wk));
  const Var v = tape.matmul(x, tape.param(store, layer.wv));

  std::vector<Var> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Var qh = tape.slice_cols(q, h * hd, hd);
    const Var kh = tape.slice_cols(k, h * hd, hd);
    const Var vh = tape.slice_cols(v, h * hd, hd);
    const Var attn = tape.softmax_rows(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt));
    if (attention) attention->push_back(attn);
    heads.push_back(tape.matmul(attn, vh));
  }
  Var mixed = tape.concat_cols(heads);
  if (cfg.output_projection) mixed = affine(tape, store, mixed, layer.wo, layer.bo);

  const Var z1 = tape.layer_norm_rows(tape.add(x, mixed), tape.param(store, layer.ln1_gain),
                                      tape.param(store, layer.ln1_bias));
  const Var hidden = tape.relu(affine(tape, store, z1, layer.ffn1_w, layer.ffn1_b));
  const Var ffn = affine(tape, store, hidden, layer.ffn2_w, layer.ffn2_b);
  return tape.layer_norm_rows(tape.add(z1, ffn), tape.param(store, layer.ln2_gain),
                              tape.param(store, layer.ln2_bias));
}

Var encode(Tape& tape, const ParamStore& store, const EncoderParams& params,
           const RoiSample& sample, const EncoderConfig& cfg) {
  std::vector<std::size_t> order;
  const Var canonical = encode_canonical(tape, store, params, sample, cfg, order, nullptr);
  return tape.gather_rows(canonical, inverse_permutation(order));
}

std::vector<std::vector<Tensor2>> attention_maps(const ParamStore& store,
                                                 const EncoderParams& params,
                                                 const RoiSample& sample,
                                                 const EncoderConfig& cfg) {
  Tape tape(Tape::Mode::inference);
  std::vector<std::size_t> order;
  std::vector<Var> attn;
  encode_canonical(tape, store, params, sample, cfg, order, &attn);
  const auto pos = inverse_permutation(order);
  const std::size_t n = order.size();

  std::vector<std::vector<Tensor2>> maps(cfg.layers);
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const Tensor2& canon = tape.value(attn[l * cfg.heads + h]);
      Tensor2 m(n, n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = canon(pos[i], pos[j]);
      maps[l].push_back(std::move(m));
    }
  }
  return maps;
}

}  // namespace ct3d
