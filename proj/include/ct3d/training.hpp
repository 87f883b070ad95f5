#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ct3d/geometry.hpp"
#include "ct3d/tape.hpp"

namespace ct3d {

struct TargetConfig {
  double alpha_f = 0.75;  // foreground IoU
  double alpha_b = 0.25;  // background IoU
  double alpha_r = 0.55;  // minimum IoU for regression
  std::size_t n_conf_samples = 128;
  std::size_t n_reg_samples = 64;
};

void validate(const TargetConfig& cfg);

// Clamped linear ramp of IoU between alpha_b and alpha_f.
double confidence_target(double iou, const TargetConfig& cfg);

struct TrainRecord {
  std::size_t proposal_index = 0;
  Box3D proposal;
  std::optional<Box3D> matched_gt;
  double iou = 0.0;
  double conf_target = 0.0;
  // Residuals with θ wrapped to (−π, π]; present iff matched_gt is.
  std::optional<ResidualTargets> residual_targets;
  bool in_reg_set = false;
};

// Records sampled for the confidence loss, ascending by proposal index. The
// regression set is the subset flagged in_reg_set.
struct TrainBatch {
  std::vector<TrainRecord> records;

  std::size_t reg_count() const;
};

// Matches every proposal to its max-IoU ground truth (ties: lowest index),
// samples up to n_conf_samples records, then up to n_reg_samples of those
// with IoU ≥ alpha_r.
TrainBatch match_and_sample(std::span<const Box3D> proposals, std::span<const Box3D> gts,
                            const TargetConfig& cfg, std::uint64_t seed);

double confidence_loss(double logit, double c_t);

// Mean over the regression set of Σ smooth-L1 across the 7 residuals.
double regression_loss(const TrainBatch& batch, std::span<const ResidualTargets> predicted);

// L_RPN is identically zero here: only the refinement stage is trained.
double total_loss(double conf_loss, double reg_loss);

}  // namespace ct3d
