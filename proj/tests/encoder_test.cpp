#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ct3d/encoder.hpp"
#include "ct3d/model.hpp"
#include "model_oracle.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace ct3d {
namespace {

using num::Tape;
using num::Tensor2;

double max_abs_diff(const oracle::Mat& a, const Tensor2& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) m = std::max(m, std::abs(a[i][j] - b(i, j)));
  return m;
}

Tensor2 encode_value(const Model& model, const RoiSample& s) {
  Tape tape(Tape::Mode::inference);
  return tape.value(encode(tape, model.params(), model.encoder_params(), s, model.config().encoder));
}

RoiSample permuted(const RoiSample& s, const std::vector<std::size_t>& perm) {
  RoiSample out = s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    auto src = s.rel_features.row(perm[i]);
    std::copy(src.begin(), src.end(), out.rel_features.row(i).begin());
    out.source_indices[i] = s.source_indices[perm[i]];
  }
  return out;
}

TEST(EncoderConfig, Validation) {
  EncoderConfig c;
  EXPECT_NO_THROW(validate(c));
  c.heads = 3;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c.heads = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(Embedding, InputWidths) {
  EncoderConfig c;
  EXPECT_EQ(embedding_input_width(c), 28u);
  c.embedding = EmbeddingKind::size_orientation;
  EXPECT_EQ(embedding_input_width(c), 8u);
}

TEST(Embedding, SizeOrientationRows) {
  std::mt19937_64 rng(1);
  RoiSample s = oracle::random_sample(3, rng);
  s.proposal.yaw = 4.0;
  EncoderConfig c;
  c.n_points = 3;
  c.embedding = EmbeddingKind::size_orientation;
  const Tensor2 in = embedding_input(s, c);
  ASSERT_EQ(in.cols(), 8u);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(in(r, 0), s.rel_features(r, 0));
    EXPECT_EQ(in(r, 3), s.proposal.l);
    EXPECT_EQ(in(r, 5), s.proposal.h);
    EXPECT_NEAR(in(r, 6), 4.0 - 2 * std::numbers::pi, 1e-12);
    EXPECT_EQ(in(r, 7), s.rel_features(r, kRelCoordCols));
  }
  c.n_points = 4;
  EXPECT_THROW(embedding_input(s, c), std::invalid_argument);
}

TEST(Encoder, CanonicalOrderIsLexicographicAndStable) {
  const Tensor2 m = Tensor2::from_rows({{1, 2}, {0, 5}, {1, 1}, {0, 5}});
  EXPECT_EQ(canonical_row_order(m), (std::vector<std::size_t>{1, 3, 2, 0}));
}

TEST(Encoder, MatchesNaiveOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 60; ++trial) {
    ModelConfig cfg = oracle::small_config(rng, DecodeScheme::extended);
    Model model(cfg, trial);
    oracle::randomize_params(model.params(), rng);
    const RoiSample s = oracle::random_sample(cfg.encoder.n_points, rng);
    const auto ref = oracle::model_forward(model, s);
    EXPECT_LT(max_abs_diff(ref.encoded, encode_value(model, s)), 1e-10) << "trial " << trial;
  }
}

TEST(Encoder, PermutationEquivariantBitExact) {
  std::mt19937_64 rng(22);
  ModelConfig cfg;
  cfg.encoder.dim = 16;
  cfg.encoder.heads = 4;
  cfg.encoder.ffn_hidden = 32;
  cfg.encoder.n_points = 24;
  Model model(cfg, 5);
  oracle::randomize_params(model.params(), rng, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    const RoiSample s = oracle::random_sample(24, rng);
    std::vector<std::size_t> perm(24);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Tensor2 a = encode_value(model, s);
    const Tensor2 b = encode_value(model, permuted(s, perm));
    for (std::size_t i = 0; i < 24; ++i) {
      auto ra = a.row(perm[i]);
      auto rb = b.row(i);
      EXPECT_TRUE(std::equal(ra.begin(), ra.end(), rb.begin(), rb.end()));
    }
  }
}

TEST(Encoder, RowsAreLayerNormalized) {
  std::mt19937_64 rng(23);
  ModelConfig cfg;
  cfg.encoder.dim = 16;
  cfg.encoder.heads = 2;
  cfg.encoder.n_points = 10;
  Model model(cfg, 3);
  const Tensor2 out = encode_value(model, oracle::random_sample(10, rng));
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double mean = std::accumulate(row.begin(), row.end(), 0.0) / 16;
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= 16;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(AttentionMaps, RowsAreDistributionsAndFollowSampleOrder) {
  std::mt19937_64 rng(24);
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.layers = 2;
  cfg.encoder.n_points = 6;
  Model model(cfg, 4);
  oracle::randomize_params(model.params(), rng);
  const RoiSample s = oracle::random_sample(6, rng);
  const auto maps = attention_maps(model.params(), model.encoder_params(), s, cfg.encoder);
  ASSERT_EQ(maps.size(), 2u);
  ASSERT_EQ(maps[0].size(), 2u);
  for (const auto& layer : maps)
    for (const Tensor2& m : layer)
      for (std::size_t i = 0; i < 6; ++i) {
        auto row = m.row(i);
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
      }

  const std::vector<std::size_t> perm = {5, 3, 1, 0, 2, 4};
  const auto pmaps = attention_maps(model.params(), model.encoder_params(), permuted(s, perm), cfg.encoder);
  for (std::size_t l = 0; l < 2; ++l)
    for (std::size_t h = 0; h < 2; ++h)
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(pmaps[l][h](i, j), maps[l][h](perm[i], perm[j]));
}

TEST(AttentionMaps, ZeroQueryWeightsGiveUniformAttention) {
  std::mt19937_64 rng(25);
  ModelConfig cfg;
  cfg.encoder.dim = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.n_points = 5;
  Model model(cfg, 1);
  auto& store = model.params();
  for (std::size_t l = 0; l < cfg.encoder.layers; ++l)
    store.value(store.id("encoder.layer" + std::to_string(l) + ".attn.wq")).fill(0.0);
  const auto maps = attention_maps(store, model.encoder_params(), oracle::random_sample(5, rng), cfg.encoder);
  for (const auto& layer : maps)
    for (const Tensor2& m : layer)
      for (double v : m.values()) EXPECT_NEAR(v, 0.2, 1e-15);
}

}  // namespace
}  // namespace ct3d
