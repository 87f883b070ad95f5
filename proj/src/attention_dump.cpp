#include "ct3d/attention_dump.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "ct3d/detection.hpp"
#include "ct3d/errors.hpp"

namespace ct3d {

AttentionMass attention_mass(const Model& model, const RoiSample& sample) {
  AttentionMass out;
  out.sample = sample;
  const auto maps = attention_maps(model.params(), model.encoder_params(), sample, model.config().encoder);
  for (const auto& layer : maps) {
    auto& per_head = out.mass.emplace_back();
    for (const num::Tensor2& a : layer) {
      std::vector<double> col(a.cols(), 0.0);
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) col[j] += a(i, j);
      per_head.push_back(std::move(col));
    }
  }
  return out;
}

std::string attention_csv(const AttentionMass& m, const PointCloud& cloud) {
  std::string out = "row,source_index,x,y,z";
  for (std::size_t l = 0; l < m.mass.size(); ++l)
    for (std::size_t h = 0; h < m.mass[l].size(); ++h)
      out += ",mass_l" + std::to_string(l) + "_h" + std::to_string(h);
  out += ",total\n";

  char buf[32];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  };
  const Vec3 center = m.sample.proposal.center();
  for (std::size_t r = 0; r < m.sample.source_indices.size(); ++r) {
    const std::int64_t src = m.sample.source_indices[r];
    const Vec3 p = src >= 0 ? cloud.points.at(static_cast<std::size_t>(src)) : center;
    out += std::to_string(r) + ',' + std::to_string(src);
    put(p.x);
    put(p.y);
    put(p.z);
    double total = 0.0;
    for (const auto& layer : m.mass)
      for (const auto& head : layer) {
        put(head[r]);
        total += head[r];
      }
    put(total);
    out += '\n';
  }
  return out;
}

AttentionMass dump_attention(const Model& model, const PointCloud& cloud,
                             const ProposalSet& proposals, std::size_t proposal_index,
                             std::uint64_t seed, const std::filesystem::path& out) {
  if (proposal_index >= proposals.boxes.size())
    throw std::out_of_range("dump_attention: proposal index " + std::to_string(proposal_index) +
                            " out of range (" + std::to_string(proposals.boxes.size()) + " proposals)");
  const RoiSample sample =
      model.sample(cloud, proposals.boxes[proposal_index], roi_sample_seed(seed, proposal_index));
  AttentionMass m = attention_mass(model, sample);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw IoError("cannot write " + out.string());
  f << attention_csv(m, cloud);
  if (!f) throw IoError("write failed: " + out.string());
  return m;
}

}  // namespace ct3d
