#include "ct3d/detection.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "ct3d/seed.hpp"

namespace ct3d {

std::vector<std::size_t> top_k_by_score(std::span<const double> scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (order.size() > k) order.resize(k);
  return order;
}

std::vector<std::size_t> nms_rotated(std::span<const Box3D> boxes, std::span<const double> scores,
                                     double iou_thr) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms_rotated: length mismatch");
  const auto order = top_k_by_score(scores, scores.size());
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou_bev(boxes[i], boxes[k]) > iou_thr;
    });
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

std::uint64_t roi_sample_seed(std::uint64_t base, std::size_t proposal_index) {
  return derive_seed(base, {0x524f49ULL, proposal_index});
}

std::vector<RefinedProposal> refine_proposals(const PointCloud& cloud, const ProposalSet& proposals,
                                              const Model& model, const RefineConfig& cfg) {
  if (proposals.boxes.size() != proposals.scores.size())
    throw std::invalid_argument("refine: boxes and scores differ in length");
  std::vector<RefinedProposal> out;
  for (std::size_t idx : top_k_by_score(proposals.scores, cfg.top_k)) {
    RefinedProposal r;
    r.proposal_index = idx;
    r.proposal = proposals.boxes[idx];
    r.proposal_score = proposals.scores[idx];
    const RoiSample sample = model.sample(cloud, r.proposal, roi_sample_seed(cfg.seed, idx));
    const Prediction pred = model.predict(sample);
    r.logit = pred.logit;
    r.confidence = num::sigmoid(pred.logit);
    r.refined = decode_box(r.proposal, pred.residuals);
    out.push_back(r);
  }
  return out;
}

std::vector<Detection> suppress_detections(std::vector<Detection> dets, const RefineConfig& cfg) {
  if (!cfg.nms) return dets;
  std::vector<Box3D> boxes;
  std::vector<double> scores;
  for (const Detection& d : dets) {
    boxes.push_back(d.box);
    scores.push_back(d.confidence);
  }
  std::vector<Detection> kept;
  for (std::size_t i : nms_rotated(boxes, scores, cfg.nms_iou)) kept.push_back(dets[i]);
  return kept;
}

std::vector<Detection> refine(const PointCloud& cloud, const ProposalSet& proposals,
                              const Model& model, const RefineConfig& cfg) {
  std::vector<Detection> dets;
  for (const RefinedProposal& r : refine_proposals(cloud, proposals, model, cfg))
    dets.push_back({r.refined, r.confidence});
  return suppress_detections(std::move(dets), cfg);
}

std::vector<Detection> proposals_as_detections(const ProposalSet& proposals, const RefineConfig& cfg) {
  std::vector<Detection> dets;
  for (std::size_t idx : top_k_by_score(proposals.scores, cfg.top_k))
    dets.push_back({proposals.boxes[idx], proposals.scores[idx]});
  return suppress_detections(std::move(dets), cfg);
}

}  // namespace ct3d
