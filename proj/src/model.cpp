#include "ct3d/model.hpp"

#include <json.hpp>
#include <random>
#include <stdexcept>

#include "ct3d/checkpoint.hpp"
#include "ct3d/errors.hpp"

namespace ct3d {

using nlohmann::json;

namespace {

std::string_view embedding_name(EmbeddingKind k) {
  return k == EmbeddingKind::keypoints ? "keypoints" : "size_orientation";
}

EmbeddingKind parse_embedding(const std::string& s) {
  if (s == "keypoints") return EmbeddingKind::keypoints;
  if (s == "size_orientation") return EmbeddingKind::size_orientation;
  throw ConfigError("unknown embedding '" + s + "'");
}

}  // namespace

void validate(const ModelConfig& cfg) {
  try {
    validate(cfg.encoder);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(cfg.alpha > 0.0)) throw ConfigError("model: alpha must be > 0");
}

std::string model_config_to_json(const ModelConfig& cfg) {
  const EncoderConfig& e = cfg.encoder;
  json j = {
      {"dim", e.dim},
      {"heads", e.heads},
      {"layers", e.layers},
      {"ffn_hidden", e.ffn_hidden},
      {"n_points", e.n_points},
      {"raw_feature_dim", e.raw_feature_dim},
      {"embedding", embedding_name(e.embedding)},
      {"output_projection", e.output_projection},
      {"scheme", to_string(cfg.decoder.scheme)},
      {"shared_channel_weights", cfg.decoder.shared_channel_weights},
      {"alpha", cfg.alpha},
  };
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  ModelConfig cfg;
  EncoderConfig& e = cfg.encoder;
  e.dim = j.value("dim", e.dim);
  e.heads = j.value("heads", e.heads);
  e.layers = j.value("layers", e.layers);
  e.ffn_hidden = j.value("ffn_hidden", 2 * e.dim);
  e.n_points = j.value("n_points", e.n_points);
  e.raw_feature_dim = j.value("raw_feature_dim", e.raw_feature_dim);
  e.embedding = parse_embedding(j.value("embedding", std::string("keypoints")));
  e.output_projection = j.value("output_projection", e.output_projection);
  cfg.decoder.scheme = parse_decode_scheme(j.value("scheme", std::string("extended")));
  cfg.decoder.shared_channel_weights = j.value("shared_channel_weights", false);
  cfg.alpha = j.value("alpha", cfg.alpha);
  return cfg;
}

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  validate(cfg_);
  std::mt19937_64 rng(seed);
  enc_ = register_encoder_params(store_, cfg_.encoder, rng);
  dec_ = register_decoder_params(store_, cfg_.encoder, cfg_.decoder, rng);
}

HeadOutputs Model::forward(num::Tape& tape, const RoiSample& sample) const {
  const num::Var encoded = encode(tape, store_, enc_, sample, cfg_.encoder);
  const num::Var y = decode(tape, store_, dec_, encoded, cfg_.encoder, cfg_.decoder);
  return detect_head(tape, store_, dec_, y);
}

Prediction Model::predict(const RoiSample& sample) const {
  num::Tape tape(num::Tape::Mode::inference);
  const HeadOutputs out = forward(tape, sample);
  Prediction p;
  p.logit = tape.value(out.logit)[0];
  p.residuals = ResidualTargets::from_array(tape.value(out.residuals).values());
  return p;
}

RoiSample Model::sample(const PointCloud& cloud, const Box3D& proposal, std::uint64_t seed) const {
  return sample_roi_points(cloud, proposal, cfg_.alpha, cfg_.encoder.n_points, seed);
}

std::vector<std::uint8_t> Model::checkpoint_bytes() const {
  return num::serialize_checkpoint(store_, model_config_to_json(cfg_));
}

void Model::save(const std::filesystem::path& path) const {
  num::save_checkpoint(path, store_, model_config_to_json(cfg_));
}

Model Model::load(const std::filesystem::path& path) {
  const num::Checkpoint ck = num::load_checkpoint(path);
  Model m(model_config_from_json(ck.metadata), 0);
  num::restore_params(ck, m.store_);
  return m;
}

}  // namespace ct3d
