#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ct3d/decoder.hpp"
#include "ct3d/encoder.hpp"
#include "ct3d/geometry.hpp"
#include "ct3d/param_store.hpp"
#include "ct3d/tape.hpp"

namespace ct3d {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  // RoI cylinder scale.
  double alpha = 1.2;
};

void validate(const ModelConfig& cfg);

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

struct Prediction {
  double logit = 0.0;
  ResidualTargets residuals;
};

// The full refinement network: proposal-to-point embedding, self-attention
// encoder, single-query decoder and detect head, all parameters in one store.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  num::ParamStore& params() { return store_; }
  const num::ParamStore& params() const { return store_; }
  const EncoderParams& encoder_params() const { return enc_; }
  const DecoderParams& decoder_params() const { return dec_; }

  HeadOutputs forward(num::Tape& tape, const RoiSample& sample) const;
  Prediction predict(const RoiSample& sample) const;

  RoiSample sample(const PointCloud& cloud, const Box3D& proposal, std::uint64_t seed) const;

  // Checkpoint metadata carries the model config; load rebuilds the model
  // from it and restores the parameters.
  void save(const std::filesystem::path& path) const;
  std::vector<std::uint8_t> checkpoint_bytes() const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  num::ParamStore store_;
  EncoderParams enc_;
  DecoderParams dec_;
};

}  // namespace ct3d
