#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ct3d/tensor.hpp"

namespace ct3d {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Oriented 3D box. (x, y, z) is the geometric center, yaw rotates about +z.
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  Vec3 center() const { return {x, y, z}; }
  double volume() const { return l * w * h; }
  std::array<double, 7> to_array() const { return {x, y, z, l, w, h, yaw}; }
  static Box3D from_array(std::span<const double> v);

  friend bool operator==(const Box3D&, const Box3D&) = default;
};

// Throws std::invalid_argument unless sizes are positive and every field finite.
void validate(const Box3D& box);

// Maps an angle to (−π, π].
double wrap_angle(double a);

// Point cloud with C raw features per point stored row-major in `features`.
struct PointCloud {
  std::vector<Vec3> points;
  std::size_t feature_dim = 0;
  std::vector<double> features;

  std::size_t size() const { return points.size(); }
  std::span<const double> feature(std::size_t i) const {
    return {features.data() + i * feature_dim, feature_dim};
  }
  void push_back(Vec3 p, std::span<const double> f);
};

void validate(const PointCloud& cloud);

// Number of relative-coordinate columns in an RoI sample: center + 8 corners.
inline constexpr std::size_t kRelCoordCols = 27;

struct RoiSample {
  Box3D proposal;
  // n × (27 + C): Δp^c, Δp^1 … Δp^8, raw features.
  num::Tensor2 rel_features;
  // Source point per row, −1 for padding.
  std::vector<std::int64_t> source_indices;
};

struct ResidualTargets {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double l = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  std::array<double, 7> to_array() const { return {x, y, z, l, w, h, theta}; }
  static ResidualTargets from_array(std::span<const double> v);
};

// Corner offsets from the box center, sign patterns of (±l/2, ±w/2, ±h/2) in
// the order +++, ++−, +−+, +−−, −++, −+−, −−+, −−−, rotated by yaw.
std::array<Vec3, 8> corner_offsets(const Box3D& box);

// corner_offsets translated by the box center.
std::array<Vec3, 8> box_corners(const Box3D& box);

// BEV footprint vertices in counter-clockwise order.
std::array<std::array<double, 2>, 4> bev_polygon(const Box3D& box);

// Radius of the vertical RoI cylinder: α·√((l/2)² + (w/2)²).
double roi_radius(const Box3D& box, double alpha);

bool contains_point(const Box3D& box, Vec3 p);
bool contains_point_bev(const Box3D& box, double px, double py);

// Samples n points inside the RoI cylinder (horizontal distance only). More
// candidates than n: uniform without replacement. Fewer: every candidate once,
// remaining rows drawn with replacement. None: all rows are padding.
RoiSample sample_roi_points(const PointCloud& cloud, const Box3D& box, double alpha,
                            std::size_t n, std::uint64_t seed);

double bev_intersection_area(const Box3D& a, const Box3D& b);
double iou_bev(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b);

ResidualTargets encode_targets(const Box3D& proposal, const Box3D& gt);
Box3D decode_box(const Box3D& proposal, const ResidualTargets& r);

}  // namespace ct3d
