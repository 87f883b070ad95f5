#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "ct3d/geometry.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace ct3d {
namespace {

using std::numbers::pi;
using testing::nearby_box;
using testing::random_box;

constexpr double kTight = 1e-12;

void expect_vec_near(Vec3 a, Vec3 b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

double dist(Vec3 a, Vec3 b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)); }

TEST(Box, ValidateRejectsBadBoxes) {
  EXPECT_NO_THROW(validate(Box3D{}));
  EXPECT_THROW(validate(Box3D{0, 0, 0, 0.0, 1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(validate(Box3D{0, 0, 0, 1, -1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(validate(Box3D{NAN, 0, 0, 1, 1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(Box3D::from_array(std::vector<double>{1, 2, 3}), std::invalid_argument);
}

TEST(Box, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
  EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
  EXPECT_NEAR(wrap_angle(3 * pi / 2), -pi / 2, kTight);
  EXPECT_NEAR(wrap_angle(-7.0), -7.0 + 2 * pi, kTight);
  EXPECT_DOUBLE_EQ(wrap_angle(0.25), 0.25);
}

TEST(Corners, AxisAlignedCubeInCanonicalOrder) {
  const auto c = box_corners(Box3D{0, 0, 0, 2, 2, 2, 0});
  const Vec3 expected[8] = {{1, 1, 1},  {1, 1, -1},  {1, -1, 1},  {1, -1, -1},
                            {-1, 1, 1}, {-1, 1, -1}, {-1, -1, 1}, {-1, -1, -1}};
  for (int i = 0; i < 8; ++i) expect_vec_near(c[i], expected[i], kTight);
}

TEST(Corners, QuarterTurnOfCubeGivesSameSet) {
  const auto a = box_corners(Box3D{0, 0, 0, 2, 2, 2, 0});
  const auto b = box_corners(Box3D{0, 0, 0, 2, 2, 2, pi / 2});
  for (const Vec3& p : b) {
    bool found = false;
    for (const Vec3& q : a) found = found || dist(p, q) < 1e-12;
    EXPECT_TRUE(found);
  }
}

TEST(Corners, RotatedBoxFirstCornerByHand) {
  const auto c = box_corners(Box3D{1, 2, 0, 4, 2, 1, pi / 6});
  expect_vec_near(c[0], {1 + 2 * std::cos(pi / 6) - std::sin(pi / 6), 2 + 2 * std::sin(pi / 6) + std::cos(pi / 6), 0.5},
                  kTight);
}

TEST(Corners, CentroidAndEdgeLengths) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Box3D b = random_box(rng);
    const auto c = box_corners(b);
    Vec3 mean{};
    for (const Vec3& p : c) mean = mean + p;
    expect_vec_near({mean.x / 8, mean.y / 8, mean.z / 8}, b.center(), kTight);
    // Index bits: 4 → length sign, 2 → width sign, 1 → height sign.
    EXPECT_NEAR(dist(c[0], c[4]), b.l, 1e-12);
    EXPECT_NEAR(dist(c[0], c[2]), b.w, 1e-12);
    EXPECT_NEAR(dist(c[0], c[1]), b.h, 1e-12);
  }
}

TEST(Roi, RadiusFormula) {
  EXPECT_NEAR(roi_radius(Box3D{0, 0, 0, 4, 2, 9, 0}, 1.2), 1.2 * std::sqrt(5.0), kTight);
  EXPECT_NEAR(roi_radius(Box3D{0, 0, 0, 2, 2, 1, 0}, 1.0), std::sqrt(2.0), kTight);
}

PointCloud cloud_of(std::initializer_list<Vec3> pts) {
  PointCloud c;
  c.feature_dim = 1;
  double r = 0.0;
  for (const Vec3& p : pts) {
    r += 0.25;
    c.push_back(p, std::span<const double>(&r, 1));
  }
  return c;
}

TEST(Roi, FewerCandidatesFillWithReplacement) {
  const PointCloud cloud = cloud_of({{0.1, 0, 0}, {0.2, 0.1, 5}, {-0.3, 0, -9}, {50, 50, 0}});
  const Box3D box{0, 0, 0, 2, 2, 2, 0};
  const RoiSample s = sample_roi_points(cloud, box, 1.0, 4, 9);
  ASSERT_EQ(s.rel_features.rows(), 4u);
  ASSERT_EQ(s.rel_features.cols(), kRelCoordCols + 1);
  std::set<std::int64_t> distinct(s.source_indices.begin(), s.source_indices.end());
  EXPECT_EQ(distinct, (std::set<std::int64_t>{0, 1, 2}));  // vertical offset does not exclude
  const RoiSample again = sample_roi_points(cloud, box, 1.0, 4, 9);
  EXPECT_EQ(again.source_indices, s.source_indices);
  EXPECT_EQ(again.rel_features, s.rel_features);
}

TEST(Roi, MoreCandidatesSampleWithoutReplacement) {
  PointCloud cloud;
  cloud.feature_dim = 1;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const double f = i;
    cloud.push_back({testing::uniform(rng, -1, 1), testing::uniform(rng, -1, 1), 0}, std::span<const double>(&f, 1));
  }
  const RoiSample s = sample_roi_points(cloud, Box3D{0, 0, 0, 2, 2, 2, 0}, 1.2, 64, 3);
  std::set<std::int64_t> distinct(s.source_indices.begin(), s.source_indices.end());
  EXPECT_EQ(distinct.size(), 64u);
  for (std::size_t r = 0; r < 64; ++r) {
    const auto k = static_cast<std::size_t>(s.source_indices[r]);
    EXPECT_EQ(s.rel_features(r, 0), cloud.points[k].x);
    EXPECT_EQ(s.rel_features(r, 1), cloud.points[k].y);
    EXPECT_EQ(s.rel_features(r, kRelCoordCols), static_cast<double>(k));
  }
}

TEST(Roi, EmptyRoiIsPadding) {
  const PointCloud cloud = cloud_of({{40, 40, 0}});
  const Box3D box{0, 0, 0, 2, 2, 2, 0.3};
  const RoiSample s = sample_roi_points(cloud, box, 1.2, 5, 1);
  const auto offsets = corner_offsets(box);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(s.source_indices[r], -1);
    EXPECT_EQ(s.rel_features(r, 0), 0.0);
    EXPECT_DOUBLE_EQ(s.rel_features(r, 3), -offsets[0].x);
    EXPECT_EQ(s.rel_features(r, kRelCoordCols), 0.0);
  }
  EXPECT_THROW(sample_roi_points(cloud, box, 1.2, 0, 1), std::invalid_argument);
}

TEST(Roi, CenterAndCornerCoincidence) {
  const Box3D box{1, 2, 0.5, 4, 2, 2, 0};
  const auto corner = box_corners(box)[1];
  const PointCloud cloud = cloud_of({{1, 2, 0.5}, corner});
  const RoiSample s = sample_roi_points(cloud, box, 1.2, 2, 0);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto row = s.rel_features.row(r);
    if (s.source_indices[r] == 0) {
      EXPECT_EQ(row[0], 0.0);
      EXPECT_EQ(row[1], 0.0);
      EXPECT_EQ(row[2], 0.0);
    } else {
      EXPECT_EQ(row[3 + 3], 0.0);
      EXPECT_EQ(row[4 + 3], 0.0);
      EXPECT_EQ(row[5 + 3], 0.0);
      EXPECT_NE(row[0], 0.0);
    }
  }
}

TEST(Roi, JointTranslationLeavesFeaturesBitIdentical) {
  std::mt19937_64 rng(8);
  // Coordinates on a 1/64 m grid keep every subtraction exact.
  const auto grid = [&](double lo, double hi) { return std::round(testing::uniform(rng, lo, hi) * 64) / 64; };
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud cloud;
    cloud.feature_dim = 1;
    for (int i = 0; i < 200; ++i) {
      const double f = testing::uniform(rng, 0, 1);
      cloud.push_back({grid(-4, 4), grid(-4, 4), grid(-2, 2)}, std::span<const double>(&f, 1));
    }
    Box3D box = random_box(rng, 1.0);
    box.x = grid(-1, 1);
    box.y = grid(-1, 1);
    box.z = grid(-1, 1);
    const Vec3 t{grid(-30, 30), grid(-30, 30), grid(-3, 3)};
    PointCloud moved = cloud;
    for (Vec3& p : moved.points) p = p + t;
    Box3D moved_box = box;
    moved_box.x += t.x;
    moved_box.y += t.y;
    moved_box.z += t.z;
    const RoiSample a = sample_roi_points(cloud, box, 1.2, 32, trial);
    const RoiSample b = sample_roi_points(moved, moved_box, 1.2, 32, trial);
    EXPECT_EQ(a.source_indices, b.source_indices);
    EXPECT_EQ(a.rel_features, b.rel_features);
  }
}

TEST(Iou, IdenticalDisjointAndHandCases) {
  const Box3D a{0, 0, 0, 1, 1, 1, 0};
  EXPECT_NEAR(iou_bev(a, a), 1.0, kTight);
  EXPECT_NEAR(iou_3d(a, a), 1.0, kTight);
  EXPECT_EQ(iou_bev(a, Box3D{5, 5, 0, 1, 1, 1, 0}), 0.0);
  EXPECT_NEAR(iou_bev(a, Box3D{0.5, 0, 0, 1, 1, 1, 0}), 1.0 / 3.0, kTight);
  EXPECT_EQ(iou_3d(a, Box3D{0, 0, 1, 1, 1, 1, 0}), 0.0);
  // Unit cubes offset by (0.5, 0, 0.5): overlap 0.25, union 1.75.
  EXPECT_NEAR(iou_3d(a, Box3D{0.5, 0, 0.5, 1, 1, 1, 0}), 0.25 / 1.75, kTight);
  // Corner-touching rectangles have zero-area intersection.
  EXPECT_EQ(iou_bev(a, Box3D{1, 1, 0, 1, 1, 1, 0}), 0.0);
}

TEST(Iou, MatchesMonteCarloOracle) {
  std::mt19937_64 rng(12);
  std::mt19937_64 mc(99);
  for (int trial = 0; trial < 40; ++trial) {
    const Box3D a = random_box(rng);
    const Box3D b = trial % 4 == 0 ? random_box(rng) : nearby_box(a, rng);
    EXPECT_NEAR(iou_bev(a, b), oracle::monte_carlo_iou(a, b, true, 200000, mc), 1e-2);
    EXPECT_NEAR(iou_3d(a, b), oracle::monte_carlo_iou(a, b, false, 200000, mc), 1e-2);
  }
}

TEST(Iou, SymmetryAndRigidInvariance) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const Box3D a = random_box(rng);
    const Box3D b = nearby_box(a, rng);
    EXPECT_NEAR(iou_bev(a, b), iou_bev(b, a), 1e-9);
    EXPECT_NEAR(iou_3d(a, b), iou_3d(b, a), 1e-9);

    const double phi = testing::uniform(rng, -pi, pi);
    const Vec3 t{testing::uniform(rng, -50, 50), testing::uniform(rng, -50, 50), testing::uniform(rng, -5, 5)};
    const auto move = [&](Box3D box) {
      const double x = std::cos(phi) * box.x - std::sin(phi) * box.y;
      const double y = std::sin(phi) * box.x + std::cos(phi) * box.y;
      box.x = x + t.x;
      box.y = y + t.y;
      box.z += t.z;
      box.yaw += phi;
      return box;
    };
    EXPECT_NEAR(iou_bev(move(a), move(b)), iou_bev(a, b), 1e-9);
    EXPECT_NEAR(iou_3d(move(a), move(b)), iou_3d(a, b), 1e-9);
  }
}

TEST(Iou, HalfTurnOfSquareFootprintIsInvisible) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    Box3D a = random_box(rng);
    a.w = a.l;
    const Box3D b = nearby_box(a, rng);
    Box3D flipped = a;
    flipped.yaw += pi;
    EXPECT_NEAR(iou_3d(a, b), iou_3d(flipped, b), 1e-9);
  }
}

TEST(Iou, ContainmentGivesVolumeRatio) {
  const Box3D outer{0, 0, 0, 4, 4, 4, 0.3};
  const Box3D inner{0.1, -0.2, 0.1, 1, 1, 1, 1.1};
  EXPECT_NEAR(iou_3d(outer, inner), 1.0 / 64.0, kTight);
}

TEST(Codec, HandValues) {
  const Box3D p{0, 0, 0, 4, 3, 2, 0};
  Box3D g = p;
  g.x = 2.5;
  EXPECT_NEAR(encode_targets(p, g).x, 0.5, kTight);
  g = p;
  g.l = std::exp(1.0) * p.l;
  EXPECT_NEAR(encode_targets(p, g).l, 1.0, kTight);
  for (double v : encode_targets(p, p).to_array()) EXPECT_EQ(v, 0.0);
  ResidualTargets r;
  r.x = 0.5;
  EXPECT_NEAR(decode_box(p, r).x, 2.5, kTight);
  EXPECT_EQ(decode_box(p, ResidualTargets{}), p);
}

TEST(Codec, RoundTrip) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 1000; ++trial) {
    const Box3D p = random_box(rng, 40.0);
    const Box3D g = random_box(rng, 40.0);
    const Box3D back = decode_box(p, encode_targets(p, g));
    const auto x = back.to_array(), y = g.to_array();
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(x[k], y[k], 1e-9 * std::max(1.0, std::abs(y[k])));
  }
}

TEST(Contains, PointsInsideAndOutside) {
  const Box3D b{1, 1, 0, 4, 2, 2, pi / 2};
  EXPECT_TRUE(contains_point(b, {1, 2.9, 0.9}));
  EXPECT_FALSE(contains_point(b, {2.9, 1, 0}));
  EXPECT_FALSE(contains_point(b, {1, 1, 1.5}));
  EXPECT_TRUE(contains_point_bev(b, 1, 2.9));
}

TEST(PointCloudType, ValidateChecksLengths) {
  PointCloud c = cloud_of({{0, 0, 0}});
  EXPECT_NO_THROW(validate(c));
  c.features.push_back(1.0);
  EXPECT_THROW(validate(c), std::invalid_argument);
}

}  // namespace
}  // namespace ct3d
