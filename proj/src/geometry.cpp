#include "ct3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ct3d {

namespace {

using Point2 = std::array<double, 2>;

constexpr double kDegenerateArea = 1e-12;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

double polygon_area(const std::vector<Point2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    twice += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(twice);
}

// Intersection of segment p→q with the infinite line through e0→e1.
Point2 line_hit(const Point2& p, const Point2& q, const Point2& e0, const Point2& e1) {
  const double dp = cross(e0, e1, p);
  const double dq = cross(e0, e1, q);
  const double t = dp / (dp - dq);
  return {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
}

// Sutherland–Hodgman: clip `subject` by the convex CCW polygon `clip`.
std::vector<Point2> clip_convex(std::vector<Point2> subject,
                                const std::array<Point2, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Point2& e0 = clip[e];
    const Point2& e1 = clip[(e + 1) % clip.size()];
    std::vector<Point2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Point2& cur = subject[i];
      const Point2& prev = subject[(i + subject.size() - 1) % subject.size()];
      const bool cur_in = cross(e0, e1, cur) >= 0.0;
      const bool prev_in = cross(e0, e1, prev) >= 0.0;
      if (cur_in) {
        if (!prev_in) out.push_back(line_hit(prev, cur, e0, e1));
        out.push_back(cur);
      } else if (prev_in) {
        out.push_back(line_hit(prev, cur, e0, e1));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace

Box3D Box3D::from_array(std::span<const double> v) {
  if (v.size() != 7) throw std::invalid_argument("Box3D::from_array expects 7 values");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

ResidualTargets ResidualTargets::from_array(std::span<const double> v) {
  if (v.size() != 7) throw std::invalid_argument("ResidualTargets::from_array expects 7 values");
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
}

void validate(const Box3D& box) {
  for (double v : box.to_array())
    if (!std::isfinite(v)) throw std::invalid_argument("Box3D: non-finite field");
  if (!(box.l > 0.0 && box.w > 0.0 && box.h > 0.0))
    throw std::invalid_argument("Box3D: sizes must be positive");
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

void PointCloud::push_back(Vec3 p, std::span<const double> f) {
  if (f.size() != feature_dim) throw std::invalid_argument("PointCloud: feature width mismatch");
  points.push_back(p);
  features.insert(features.end(), f.begin(), f.end());
}

void validate(const PointCloud& cloud) {
  if (cloud.features.size() != cloud.points.size() * cloud.feature_dim)
    throw std::invalid_argument("PointCloud: feature count does not match point count");
  for (const Vec3& p : cloud.points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("PointCloud: non-finite coordinate");
  for (double f : cloud.features)
    if (!std::isfinite(f)) throw std::invalid_argument("PointCloud: non-finite feature");
}

std::array<Vec3, 8> corner_offsets(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const double sx = (i & 4) ? -0.5 : 0.5;
    const double sy = (i & 2) ? -0.5 : 0.5;
    const double sz = (i & 1) ? -0.5 : 0.5;
    const double lx = sx * box.l;
    const double ly = sy * box.w;
    out[i] = {c * lx - s * ly, s * lx + c * ly, sz * box.h};
  }
  return out;
}

std::array<Vec3, 8> box_corners(const Box3D& box) {
  auto corners = corner_offsets(box);
  for (auto& p : corners) p = p + box.center();
  return corners;
}

std::array<std::array<double, 2>, 4> bev_polygon(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  constexpr double sx[4] = {1.0, -1.0, -1.0, 1.0};
  constexpr double sy[4] = {1.0, 1.0, -1.0, -1.0};
  std::array<std::array<double, 2>, 4> out;
  for (int i = 0; i < 4; ++i) {
    const double lx = sx[i] * hl;
    const double ly = sy[i] * hw;
    out[i] = {box.x + c * lx - s * ly, box.y + s * lx + c * ly};
  }
  return out;
}

double roi_radius(const Box3D& box, double alpha) {
  return alpha * std::sqrt(0.25 * box.l * box.l + 0.25 * box.w * box.w);
}

bool contains_point_bev(const Box3D& box, double px, double py) {
  const double dx = px - box.x;
  const double dy = py - box.y;
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * box.l && std::abs(v) <= 0.5 * box.w;
}

bool contains_point(const Box3D& box, Vec3 p) {
  return std::abs(p.z - box.z) <= 0.5 * box.h && contains_point_bev(box, p.x, p.y);
}

RoiSample sample_roi_points(const PointCloud& cloud, const Box3D& box, double alpha,
                            std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_roi_points: n must be >= 1");
  const double r = roi_radius(box, alpha);
  const double r2 = r * r;
  const Vec3 center = box.center();

  std::vector<std::int64_t> candidates;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 d = cloud.points[i] - center;
    if (d.x * d.x + d.y * d.y <= r2) candidates.push_back(static_cast<std::int64_t>(i));
  }

  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> chosen;
  chosen.reserve(n);
  if (candidates.size() > n) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
      std::swap(candidates[i], candidates[pick(rng)]);
    }
    chosen.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(chosen.begin(), chosen.end());
  } else if (!candidates.empty()) {
    chosen = candidates;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    while (chosen.size() < n) chosen.push_back(candidates[pick(rng)]);
  } else {
    chosen.assign(n, -1);
  }

  const std::size_t c_dim = cloud.feature_dim;
  const auto offsets = corner_offsets(box);
  RoiSample out;
  out.proposal = box;
  out.source_indices = chosen;
  out.rel_features = num::Tensor2(n, kRelCoordCols + c_dim);
  for (std::size_t row = 0; row < n; ++row) {
    const std::int64_t src = chosen[row];
    // Corner offsets are taken relative to Δp^c so that a joint translation of
    // cloud and box leaves every feature bit-identical.
    const Vec3 dc = src >= 0 ? cloud.points[static_cast<std::size_t>(src)] - center : Vec3{};
    auto feat = out.rel_features.row(row);
    feat[0] = dc.x;
    feat[1] = dc.y;
    feat[2] = dc.z;
    for (std::size_t j = 0; j < 8; ++j) {
      const Vec3 dj = dc - offsets[j];
      feat[3 + 3 * j] = dj.x;
      feat[4 + 3 * j] = dj.y;
      feat[5 + 3 * j] = dj.z;
    }
    if (src >= 0) {
      const auto f = cloud.feature(static_cast<std::size_t>(src));
      std::copy(f.begin(), f.end(), feat.begin() + kRelCoordCols);
    }
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto pa = bev_polygon(a);
  const auto pb = bev_polygon(b);
  const double reach = 0.5 * (std::hypot(a.l, a.w) + std::hypot(b.l, b.w));
  if (std::hypot(a.x - b.x, a.y - b.y) > reach) return 0.0;
  const auto clipped = clip_convex(std::vector<Point2>(pa.begin(), pa.end()), pb);
  const double area = polygon_area(clipped);
  return area < kDegenerateArea ? 0.0 : area;
}

double iou_bev(const Box3D& a, const Box3D& b) {
  const double inter = bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.l * a.w + b.l * b.w - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  const double top = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double bottom = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double overlap_h = std::max(0.0, top - bottom);
  if (overlap_h <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * overlap_h;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

ResidualTargets encode_targets(const Box3D& proposal, const Box3D& gt) {
  const double d = std::sqrt(proposal.l * proposal.l + proposal.w * proposal.w);
  return {(gt.x - proposal.x) / d,
          (gt.y - proposal.y) / d,
          (gt.z - proposal.z) / proposal.h,
          std::log(gt.l / proposal.l),
          std::log(gt.w / proposal.w),
          std::log(gt.h / proposal.h),
          gt.yaw - proposal.yaw};
}

Box3D decode_box(const Box3D& proposal, const ResidualTargets& r) {
  const double d = std::sqrt(proposal.l * proposal.l + proposal.w * proposal.w);
  return {proposal.x + r.x * d,
          proposal.y + r.y * d,
          proposal.z + r.z * proposal.h,
          proposal.l * std::exp(r.l),
          proposal.w * std::exp(r.w),
          proposal.h * std::exp(r.h),
          proposal.yaw + r.theta};
}

}  // namespace ct3d
