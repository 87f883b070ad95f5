#pragma once

#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "ct3d/encoder.hpp"
#include "ct3d/geometry.hpp"
#include "ct3d/param_store.hpp"
#include "ct3d/tape.hpp"

namespace ct3d {

enum class DecodeScheme { standard, channel, extended };

std::string_view to_string(DecodeScheme s);
// Accepts "standard", "channel", "extended".
DecodeScheme parse_decode_scheme(std::string_view s);

struct DecoderConfig {
  DecodeScheme scheme = DecodeScheme::extended;
  // One compression vector s shared by all heads instead of one per head.
  bool shared_channel_weights = false;
};

struct DecoderParams {
  num::ParamId wk, wv;
  std::optional<num::ParamId> query;            // H×D' (standard, extended)
  std::optional<num::ParamId> channel_weights;  // H×D' or 1×D' (channel, extended)
  num::ParamId conf_w1, conf_b1, conf_w2, conf_b2;
  num::ParamId reg_w1, reg_b1, reg_w2, reg_b2;
};

DecoderParams register_decoder_params(num::ParamStore& store, const EncoderConfig& enc,
                                      const DecoderConfig& cfg, std::mt19937_64& rng);

// Tape forms of the three decoding-weight rules. keys: N×D', query and s: 1×D'.
// Each returns a 1×N weight row.
num::Var weights_standard(num::Tape& tape, num::Var keys, num::Var query);
num::Var weights_channel(num::Tape& tape, num::Var keys, num::Var s);
num::Var weights_extended(num::Tape& tape, num::Var keys, num::Var query, num::Var s);

// Value forms, evaluated through the same tape code.
std::vector<double> decode_weights_standard(const num::Tensor2& keys, std::span<const double> query);
std::vector<double> decode_weights_channel(const num::Tensor2& keys, std::span<const double> s);
std::vector<double> decode_weights_extended(const num::Tensor2& keys, std::span<const double> query,
                                            std::span<const double> s);

// Single-query decoding of the N×D encoder output into a 1×D representation.
// Rows are visited in canonical order, so the result is exactly invariant to
// row permutations.
num::Var decode(num::Tape& tape, const num::ParamStore& store, const DecoderParams& params,
                num::Var encoded, const EncoderConfig& enc, const DecoderConfig& cfg);

struct HeadOutputs {
  num::Var logit;      // 1×1
  num::Var residuals;  // 1×7 in (x, y, z, l, w, h, θ) order
};

// Two independent FC–ReLU–FC heads for confidence and box residuals.
HeadOutputs detect_head(num::Tape& tape, const num::ParamStore& store, const DecoderParams& params,
                        num::Var y);

}  // namespace ct3d
