#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "ct3d/geometry.hpp"
#include "ct3d/param_store.hpp"
#include "ct3d/tape.hpp"

namespace ct3d {

// How the proposal enters the per-point feature.
enum class EmbeddingKind {
  keypoints,         // [Δp^c, Δp^1 … Δp^8, f^r]
  size_orientation,  // [Δp^c, l, w, h, θ, f^r]
};

struct EncoderConfig {
  std::size_t dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t ffn_hidden = 128;
  std::size_t n_points = 128;
  std::size_t raw_feature_dim = 1;
  EmbeddingKind embedding = EmbeddingKind::keypoints;
  // Off reproduces plain head concatenation with no output projection.
  bool output_projection = true;

  std::size_t head_dim() const { return dim / heads; }
};

void validate(const EncoderConfig& cfg);

struct EncoderLayerParams {
  num::ParamId wq, wk, wv;
  num::ParamId wo, bo;  // unused when output_projection is off
  num::ParamId ln1_gain, ln1_bias;
  num::ParamId ffn1_w, ffn1_b, ffn2_w, ffn2_b;
  num::ParamId ln2_gain, ln2_bias;
};

struct EncoderParams {
  num::ParamId embed_w, embed_b;
  std::vector<EncoderLayerParams> layers;
};

EncoderParams register_encoder_params(num::ParamStore& store, const EncoderConfig& cfg,
                                      std::mt19937_64& rng);

// Width of the embedding input: 27 + C (keypoints) or 7 + C (size-orientation).
std::size_t embedding_input_width(const EncoderConfig& cfg);

// Per-point input rows for the embedding projection.
num::Tensor2 embedding_input(const RoiSample& sample, const EncoderConfig& cfg);

// Rows of `m` sorted lexicographically; equal rows keep index order. Running
// the point-axis reductions in this order makes encode/decode exactly
// permutation-equivariant/invariant in floating point.
std::vector<std::size_t> canonical_row_order(const num::Tensor2& m);

// A(rows) → N×D. Row-wise; no position encoding.
num::Var embed_points(num::Tape& tape, const num::ParamStore& store, const EncoderParams& params,
                      num::Var input);

// One encoding block: multi-head self-attention, add & norm, ReLU FFN, add &
// norm. Post-softmax attention matrices are appended to `attention` if given.
num::Var self_attention_layer(num::Tape& tape, const num::ParamStore& store,
                              const EncoderLayerParams& layer, num::Var x,
                              const EncoderConfig& cfg,
                              std::vector<num::Var>* attention = nullptr);

// Embedding followed by `layers` encoding blocks. Output rows follow the
// sample's row order.
num::Var encode(num::Tape& tape, const num::ParamStore& store, const EncoderParams& params,
                const RoiSample& sample, const EncoderConfig& cfg);

// [layer][head] N×N post-softmax attention, indexed in the sample's row order.
std::vector<std::vector<num::Tensor2>> attention_maps(const num::ParamStore& store,
                                                      const EncoderParams& params,
                                                      const RoiSample& sample,
                                                      const EncoderConfig& cfg);

}  // namespace ct3d
