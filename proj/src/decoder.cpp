#include "ct3d/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ct3d {

using num::ParamId;
using num::ParamStore;
using num::Tape;
using num::Tensor2;
using num::Var;

std::string_view to_string(DecodeScheme s) {
  switch (s) {
    case DecodeScheme::standard: return "standard";
    case DecodeScheme::channel: return "channel";
    case DecodeScheme::extended: return "extended";
  }
  return "unknown";
}

DecodeScheme parse_decode_scheme(std::string_view s) {
  if (s == "standard") return DecodeScheme::standard;
  if (s == "channel") return DecodeScheme::channel;
  if (s == "extended") return DecodeScheme::extended;
  throw std::invalid_argument("unknown decode scheme '" + std::string(s) + "'");
}

namespace {

bool uses_query(DecodeScheme s) { return s != DecodeScheme::channel; }
bool uses_channel_weights(DecodeScheme s) { return s != DecodeScheme::standard; }

double inv_sqrt(std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); }

Var affine(Tape& tape, const ParamStore& store, Var x, ParamId w, ParamId b) {
  return tape.add_row(tape.matmul(x, tape.param(store, w)), tape.param(store, b));
}

std::vector<double> to_vector(const Tensor2& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

DecoderParams register_decoder_params(ParamStore& store, const EncoderConfig& enc,
                                      const DecoderConfig& cfg, std::mt19937_64& rng) {
  const std::size_t d = enc.dim;
  const std::size_t hd = enc.head_dim();
  DecoderParams p{};
  p.wk = store.add("decoder.wk", num::uniform_init(d, d, d, rng));
  p.wv = store.add("decoder.wv", num::uniform_init(d, d, d, rng));
  if (uses_query(cfg.scheme)) p.query = store.add("decoder.query", num::uniform_init(enc.heads, hd, hd, rng));
  if (uses_channel_weights(cfg.scheme)) {
    const std::size_t rows = cfg.shared_channel_weights ? 1 : enc.heads;
    // Starts as the plain channel average.
    p.channel_weights = store.add("decoder.channel_weights", Tensor2(rows, hd, 1.0 / static_cast<double>(hd)));
  }
  p.conf_w1 = store.add("head.conf.fc1.weight", num::uniform_init(d, d, d, rng));
  p.conf_b1 = store.add("head.conf.fc1.bias", Tensor2(1, d));
  p.conf_w2 = store.add("head.conf.fc2.weight", num::uniform_init(d, 1, d, rng));
  p.conf_b2 = store.add("head.conf.fc2.bias", Tensor2(1, 1));
  p.reg_w1 = store.add("head.reg.fc1.weight", num::uniform_init(d, d, d, rng));
  p.reg_b1 = store.add("head.reg.fc1.bias", Tensor2(1, d));
  p.reg_w2 = store.add("head.reg.fc2.weight", num::uniform_init(d, 7, d, rng));
  p.reg_b2 = store.add("head.reg.fc2.bias", Tensor2(1, 7));
  return p;
}

Var weights_standard(Tape& tape, Var keys, Var query) {
  const std::size_t hd = tape.value(keys).cols();
  return tape.softmax_rows(tape.scale(tape.matmul_nt(query, keys), inv_sqrt(hd)));
}

Var weights_channel(Tape& tape, Var keys, Var s) {
  const std::size_t hd = tape.value(keys).cols();
  const Var per_channel = tape.softmax_rows(tape.scale(tape.transpose(keys), inv_sqrt(hd)));
  return tape.matmul(s, per_channel);
}

Var weights_extended(Tape& tape, Var keys, Var query, Var s) {
  const std::size_t hd = tape.value(keys).cols();
  const Var global = tape.matmul_nt(query, keys);                // 1×N
  const Var spread = tape.repeat_row(global, hd);                // D'×N
  const Var logits = tape.mul(spread, tape.transpose(keys));     // D'×N
  const Var per_channel = tape.softmax_rows(tape.scale(logits, inv_sqrt(hd)));
  return tape.matmul(s, per_channel);
}

std::vector<double> decode_weights_standard(const Tensor2& keys, std::span<const double> query) {
  if (query.size() != keys.cols()) throw std::invalid_argument("decode_weights_standard: shape");
  Tape tape(Tape::Mode::inference);
  const Var w = weights_standard(tape, tape.constant(keys), tape.constant(Tensor2::row_vector(query)));
  return to_vector(tape.value(w));
}

std::vector<double> decode_weights_channel(const Tensor2& keys, std::span<const double> s) {
  if (s.size() != keys.cols()) throw std::invalid_argument("decode_weights_channel: shape");
  Tape tape(Tape::Mode::inference);
  const Var w = weights_channel(tape, tape.constant(keys), tape.constant(Tensor2::row_vector(s)));
  return to_vector(tape.value(w));
}

std::vector<double> decode_weights_extended(const Tensor2& keys, std::span<const double> query,
                                            std::span<const double> s) {
  if (query.size() != keys.cols() || s.size() != keys.cols())
    throw std::invalid_argument("decode_weights_extended: shape");
  Tape tape(Tape::Mode::inference);
  const Var w = weights_extended(tape, tape.constant(keys), tape.constant(Tensor2::row_vector(query)),
                                 tape.constant(Tensor2::row_vector(s)));
  return to_vector(tape.value(w));
}

Var decode(Tape& tape, const ParamStore& store, const DecoderParams& params, Var encoded,
           const EncoderConfig& enc, const DecoderConfig& cfg) {
  const std::size_t hd = enc.head_dim();
  const Var x = tape.gather_rows(encoded, canonical_row_order(tape.value(encoded)));
  const Var keys = tape.matmul(x, tape.param(store, params.wk));
  const Var values = tape.matmul(x, tape.param(store, params.wv));

  std::vector<Var> heads;
  heads.reserve(enc.heads);
  for (std::size_t h = 0; h < enc.heads; ++h) {
    const Var kh = tape.slice_cols(keys, h * hd, hd);
    const Var vh = tape.slice_cols(values, h * hd, hd);
    std::optional<Var> qh;
    std::optional<Var> sh;
    if (params.query) qh = tape.slice_rows(tape.param(store, *params.query), h, 1);
    if (params.channel_weights) {
      const Var s_all = tape.param(store, *params.channel_weights);
      sh = tape.slice_rows(s_all, cfg.shared_channel_weights ? 0 : h, 1);
    }
    Var w;
    switch (cfg.scheme) {
      case DecodeScheme::standard: w = weights_standard(tape, kh, *qh); break;
      case DecodeScheme::channel: w = weights_channel(tape, kh, *sh); break;
      case DecodeScheme::extended: w = weights_extended(tape, kh, *qh, *sh); break;
    }
    heads.push_back(tape.matmul(w, vh));
  }
  return tape.concat_cols(heads);
}

HeadOutputs detect_head(Tape& tape, const ParamStore& store, const DecoderParams& params, Var y) {
  const Var conf_hidden = tape.relu(affine(tape, store, y, params.conf_w1, params.conf_b1));
  const Var reg_hidden = tape.relu(affine(tape, store, y, params.reg_w1, params.reg_b1));
  return {affine(tape, store, conf_hidden, params.conf_w2, params.conf_b2),
          affine(tape, store, reg_hidden, params.reg_w2, params.reg_b2)};
}

}  // namespace ct3d
