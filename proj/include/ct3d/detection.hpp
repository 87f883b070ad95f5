#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ct3d/geometry.hpp"
#include "ct3d/model.hpp"
#include "ct3d/scene.hpp"

namespace ct3d {

struct Detection {
  Box3D box;
  double confidence = 0.0;
};

// Greedy suppression in descending score order (ties: lower index first);
// a box is dropped when its BEV IoU with a kept box exceeds iou_thr.
std::vector<std::size_t> nms_rotated(std::span<const Box3D> boxes, std::span<const double> scores,
                                     double iou_thr);

struct RefineConfig {
  std::size_t top_k = 100;
  bool nms = true;
  double nms_iou = 0.1;
  std::uint64_t seed = 0;  // RoI sampling
};

struct RefinedProposal {
  std::size_t proposal_index = 0;
  Box3D proposal;
  double proposal_score = 0.0;
  Box3D refined;
  double logit = 0.0;
  double confidence = 0.0;
};

// The top_k proposals by score, each passed through the network, before NMS.
std::vector<RefinedProposal> refine_proposals(const PointCloud& cloud, const ProposalSet& proposals,
                                              const Model& model, const RefineConfig& cfg);

// NMS on detection confidences when cfg.nms is set, otherwise unchanged.
std::vector<Detection> suppress_detections(std::vector<Detection> dets, const RefineConfig& cfg);

// refine_proposals followed by NMS on the refined boxes and confidences.
std::vector<Detection> refine(const PointCloud& cloud, const ProposalSet& proposals,
                              const Model& model, const RefineConfig& cfg);

// Proposals as detections (top_k by score, same NMS), for baseline scoring.
std::vector<Detection> proposals_as_detections(const ProposalSet& proposals, const RefineConfig& cfg);

// Indices of the top_k scores, descending, ties broken by lower index.
std::vector<std::size_t> top_k_by_score(std::span<const double> scores, std::size_t k);

// Per-proposal seed used for RoI sampling everywhere a proposal is refined.
std::uint64_t roi_sample_seed(std::uint64_t base, std::size_t proposal_index);

}  // namespace ct3d
