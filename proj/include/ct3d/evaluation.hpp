#pragma once

#include <span>
#include <vector>

#include "ct3d/detection.hpp"
#include "ct3d/geometry.hpp"

namespace ct3d {

struct EvalReport {
  double ap = 0.0;
  int recall_positions = 40;
  double iou_threshold = 0.7;
  std::size_t num_gt = 0;
  std::size_t num_detections = 0;
  std::size_t true_positives = 0;
  // Interpolated precision at each sampled recall position.
  std::vector<double> recall_grid;
  std::vector<double> precision;
};

// KITTI-style AP. Detections are ranked by confidence over all scenes; each
// one claims the unmatched ground truth of its scene with the highest 3D IoU
// if that IoU ≥ iou_thr. Interpolated precision is sampled at {0, 0.1, …, 1}
// (11 positions) or {1/40, …, 1} (40 positions) and averaged.
EvalReport evaluate_ap(std::span<const std::vector<Detection>> detections,
                       std::span<const std::vector<Box3D>> gts, double iou_thr, int recall_positions);

}  // namespace ct3d
