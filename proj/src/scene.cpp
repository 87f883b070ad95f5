#include "ct3d/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "ct3d/errors.hpp"

namespace ct3d {

void validate(const SceneConfig& c) {
  if (c.min_objects > c.max_objects) throw ConfigError("scene: min_objects > max_objects");
  if (!(c.x_min < c.x_max && c.y_min < c.y_max)) throw ConfigError("scene: empty extent");
  if (!(0 < c.l_min && c.l_min <= c.l_max && 0 < c.w_min && c.w_min <= c.w_max && 0 < c.h_min &&
        c.h_min <= c.h_max))
    throw ConfigError("scene: invalid dimension priors");
  if (c.min_object_points > c.max_object_points)
    throw ConfigError("scene: min_object_points > max_object_points");
  if (c.ground_density < 0 || c.point_noise < 0) throw ConfigError("scene: negative density or noise");
}

void validate(const RpnNoiseConfig& c) {
  if (c.sigma_xy < 0 || c.sigma_z < 0 || c.sigma_size < 0 || c.sigma_yaw < 0 || c.score_noise < 0)
    throw ConfigError("rpn_sim: noise scales must be >= 0");
  if (!(0.0 <= c.p_miss && c.p_miss <= 1.0)) throw ConfigError("rpn_sim: p_miss must be in [0,1]");
  if (c.fp_rate < 0) throw ConfigError("rpn_sim: fp_rate must be >= 0");
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gauss(std::mt19937_64& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

// Random car-sized box whose footprint lies inside the extent.
Box3D random_box(const SceneConfig& c, std::mt19937_64& rng) {
  Box3D b;
  b.l = uniform(rng, c.l_min, c.l_max);
  b.w = uniform(rng, c.w_min, c.w_max);
  b.h = uniform(rng, c.h_min, c.h_max);
  b.yaw = uniform(rng, -std::numbers::pi, std::numbers::pi);
  const double r = 0.5 * std::hypot(b.l, b.w);
  b.x = uniform(rng, c.x_min + r, std::max(c.x_min + r, c.x_max - r));
  b.y = uniform(rng, c.y_min + r, std::max(c.y_min + r, c.y_max - r));
  b.z = c.ground_z + 0.5 * b.h;
  return b;
}

bool overlaps_any(const Box3D& b, const std::vector<Box3D>& boxes) {
  return std::any_of(boxes.begin(), boxes.end(),
                     [&b](const Box3D& o) { return bev_intersection_area(b, o) > 0.0; });
}

struct Face {
  Vec3 center;
  Vec3 normal;
  Vec3 axis_a;  // spans the face, full extent
  Vec3 axis_b;
  double area;
};

Vec3 scaled(Vec3 v, double s) { return {v.x * s, v.y * s, v.z * s}; }
double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

std::vector<Face> visible_faces(const Box3D& b) {
  const Vec3 u{std::cos(b.yaw), std::sin(b.yaw), 0.0};
  const Vec3 v{-std::sin(b.yaw), std::cos(b.yaw), 0.0};
  const Vec3 up{0.0, 0.0, 1.0};
  const Vec3 c = b.center();
  const std::vector<Face> all = {
      {c + scaled(u, 0.5 * b.l), u, scaled(v, b.w), scaled(up, b.h), b.w * b.h},
      {c - scaled(u, 0.5 * b.l), scaled(u, -1.0), scaled(v, b.w), scaled(up, b.h), b.w * b.h},
      {c + scaled(v, 0.5 * b.w), v, scaled(u, b.l), scaled(up, b.h), b.l * b.h},
      {c - scaled(v, 0.5 * b.w), scaled(v, -1.0), scaled(u, b.l), scaled(up, b.h), b.l * b.h},
      {c + scaled(up, 0.5 * b.h), up, scaled(u, b.l), scaled(v, b.w), b.l * b.w},
  };
  std::vector<Face> out;
  const Vec3 sensor{};
  for (const Face& f : all)
    if (dot(f.normal, sensor - f.center) > 0.0) out.push_back(f);
  return out;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  std::mt19937_64 rng(seed);
  Scene scene;
  scene.scene_id = "scene_" + std::to_string(seed);
  scene.cloud.feature_dim = 1;

  const std::size_t k =
      std::uniform_int_distribution<std::size_t>(cfg.min_objects, cfg.max_objects)(rng);
  std::size_t retries = 0;
  while (scene.gt_boxes.size() < k) {
    Box3D b = random_box(cfg, rng);
    if (overlaps_any(b, scene.gt_boxes)) {
      if (++retries > cfg.max_placement_retries)
        throw std::runtime_error("generate_scene: could not place non-overlapping objects");
      continue;
    }
    scene.gt_boxes.push_back(b);
  }

  for (const Box3D& b : scene.gt_boxes) {
    const auto faces = visible_faces(b);
    if (faces.empty()) continue;
    std::vector<double> areas;
    for (const Face& f : faces) areas.push_back(f.area);
    std::discrete_distribution<std::size_t> pick_face(areas.begin(), areas.end());
    const std::size_t n = std::uniform_int_distribution<std::size_t>(cfg.min_object_points,
                                                                     cfg.max_object_points)(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const Face& f = faces[pick_face(rng)];
      const double a = uniform(rng, -0.5, 0.5);
      const double c = uniform(rng, -0.5, 0.5);
      Vec3 p = f.center + scaled(f.axis_a, a) + scaled(f.axis_b, c);
      p = p + Vec3{cfg.point_noise * gauss(rng), cfg.point_noise * gauss(rng),
                   cfg.point_noise * gauss(rng)};
      const double refl = uniform(rng, 0.0, 1.0);
      scene.cloud.push_back(p, std::span<const double>(&refl, 1));
    }
  }

  const double area = (cfg.x_max - cfg.x_min) * (cfg.y_max - cfg.y_min);
  const auto ground_points = static_cast<std::size_t>(std::llround(cfg.ground_density * area));
  for (std::size_t i = 0; i < ground_points; ++i) {
    const double x = uniform(rng, cfg.x_min, cfg.x_max);
    const double y = uniform(rng, cfg.y_min, cfg.y_max);
    const double z = cfg.ground_z + cfg.point_noise * gauss(rng);
    const double refl = uniform(rng, 0.0, 1.0);
    const bool covered = std::any_of(scene.gt_boxes.begin(), scene.gt_boxes.end(),
                                     [&](const Box3D& b) { return contains_point_bev(b, x, y); });
    if (!covered) scene.cloud.push_back({x, y, z}, std::span<const double>(&refl, 1));
  }
  return scene;
}

double best_iou(const Box3D& box, const std::vector<Box3D>& gts) {
  double best = 0.0;
  for (const Box3D& g : gts) best = std::max(best, iou_3d(box, g));
  return best;
}

ProposalSet simulate_rpn(const Scene& scene, const RpnNoiseConfig& noise, const SceneConfig& extent,
                         std::uint64_t seed) {
  validate(noise);
  std::mt19937_64 rng(seed);
  ProposalSet out;
  std::bernoulli_distribution miss(noise.p_miss);
  for (const Box3D& g : scene.gt_boxes) {
    // Draw the jitter even for missed boxes so the stream does not depend on p_miss.
    const double n[7] = {gauss(rng), gauss(rng), gauss(rng), gauss(rng),
                         gauss(rng), gauss(rng), gauss(rng)};
    if (miss(rng)) continue;
    Box3D p = g;
    p.x += noise.sigma_xy * n[0];
    p.y += noise.sigma_xy * n[1];
    p.z += noise.sigma_z * n[2];
    p.l *= std::exp(noise.sigma_size * n[3]);
    p.w *= std::exp(noise.sigma_size * n[4]);
    p.h *= std::exp(noise.sigma_size * n[5]);
    p.yaw += noise.sigma_yaw * n[6];
    out.boxes.push_back(p);
  }

  if (noise.fp_rate > 0.0) {
    const int fps = std::poisson_distribution<int>(noise.fp_rate)(rng);
    for (int i = 0; i < fps; ++i) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        Box3D b = random_box(extent, rng);
        b.z += noise.sigma_z * gauss(rng);
        if (!overlaps_any(b, scene.gt_boxes)) {
          out.boxes.push_back(b);
          break;
        }
      }
    }
  }

  for (const Box3D& b : out.boxes) {
    const double s = best_iou(b, scene.gt_boxes) + noise.score_noise * gauss(rng);
    out.scores.push_back(std::clamp(s, 0.0, 1.0));
  }
  return out;
}

}  // namespace ct3d
