#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ct3d/model.hpp"
#include "ct3d/scene.hpp"

namespace ct3d {

// Attention received by each sampled point: column sums of every layer's and
// head's N×N attention matrix, mass[layer][head][row].
struct AttentionMass {
  RoiSample sample;
  std::vector<std::vector<std::vector<double>>> mass;
};

AttentionMass attention_mass(const Model& model, const RoiSample& sample);

// One row per sampled point: row, source_index, x, y, z, mass_l<i>_h<j> ...,
// total. Padding rows report the proposal center and source_index −1.
std::string attention_csv(const AttentionMass& m, const PointCloud& cloud);

// Samples the RoI of proposal `proposal_index` the same way refine does and
// writes attention_csv to `out`. Throws std::out_of_range on a bad index.
AttentionMass dump_attention(const Model& model, const PointCloud& cloud,
                             const ProposalSet& proposals, std::size_t proposal_index,
                             std::uint64_t seed, const std::filesystem::path& out);

}  // namespace ct3d
