#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ct3d/geometry.hpp"

namespace ct3d {

struct Scene {
  std::string scene_id;
  PointCloud cloud;
  std::vector<Box3D> gt_boxes;
};

struct SceneConfig {
  std::size_t min_objects = 4;
  std::size_t max_objects = 8;
  double x_min = 4.0, x_max = 44.0;
  double y_min = -20.0, y_max = 20.0;
  double ground_z = -1.7;  // sensor sits at the origin
  double l_min = 3.4, l_max = 4.6;
  double w_min = 1.5, w_max = 1.9;
  double h_min = 1.4, h_max = 1.8;
  std::size_t min_object_points = 60;
  std::size_t max_object_points = 250;
  double ground_density = 0.3;  // clutter points per m²
  double point_noise = 0.02;    // σ of Gaussian jitter on object points (m)
  std::size_t max_placement_retries = 500;
};

void validate(const SceneConfig& cfg);

// Car-like boxes with disjoint footprints, surface points from the faces that
// face the sensor, and ground clutter outside the footprints.
// Throws std::runtime_error if placement does not succeed within the retry budget.
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

struct RpnNoiseConfig {
  double sigma_xy = 0.3;
  double sigma_z = 0.15;
  double sigma_size = 0.1;  // on log-size
  double sigma_yaw = 0.15;
  double p_miss = 0.0;
  double fp_rate = 1.0;  // Poisson mean of false positives per scene
  double score_noise = 0.1;
};

void validate(const RpnNoiseConfig& cfg);

struct ProposalSet {
  std::vector<Box3D> boxes;
  std::vector<double> scores;

  std::size_t size() const { return boxes.size(); }
};

// Stand-in for a first-stage detector: one jittered proposal per ground truth
// (each dropped with p_miss) plus Poisson false positives in free space.
// Score = clamp(IoU with best ground truth + noise, 0, 1).
ProposalSet simulate_rpn(const Scene& scene, const RpnNoiseConfig& noise, const SceneConfig& extent,
                         std::uint64_t seed);

// Best 3D IoU of `box` against any of `gts` (0 if none).
double best_iou(const Box3D& box, const std::vector<Box3D>& gts);

}  // namespace ct3d
