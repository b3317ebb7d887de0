#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "ovprop/errors.hpp"
#include "ovprop/harness/synth.hpp"
#include "ovprop/lift.hpp"

using namespace ovprop;
using namespace ovprop::lift;
using geom::Vec3;
using std::numbers::pi;

namespace {

geom::CameraModel identity_camera() {
  return geom::CameraModel::make(geom::Intrinsics::make(480, 480, 320, 240), geom::Pose(), {480, 640});
}

std::vector<Vec3> cube_corners(double yaw) {
  std::vector<Vec3> out;
  for (int i = 0; i < 8; ++i) {
    const double x = (i & 1) ? 0.5 : -0.5, y = (i & 2) ? 0.5 : -0.5, z = (i & 4) ? 0.5 : -0.5;
    out.emplace_back(std::cos(yaw) * x - std::sin(yaw) * y, std::sin(yaw) * x + std::cos(yaw) * y, z);
  }
  return out;
}

boxes::Detection lifted(const boxes::Box3D& b, double score, int cls) {
  return {b, std::nullopt, cls, score, boxes::Source::lifted};
}

}  // namespace

TEST(ClusterParams, Validates) {
  EXPECT_THROW((ClusterParams{0.0, 5}).validate(), InvalidArgument);
  EXPECT_THROW((ClusterParams{0.3, 0}).validate(), InvalidArgument);
}

TEST(FusionParams, Validates) {
  EXPECT_THROW((FusionParams{1.0, 0.4, 0.25}).validate(), InvalidArgument);
  EXPECT_THROW((FusionParams{2.0, 1.4, 0.25}).validate(), InvalidArgument);
  EXPECT_THROW((FusionParams{2.0, 0.4, -0.1}).validate(), InvalidArgument);
}

TEST(PointsInBox2D, Examples) {
  PointCloud cloud{{{0, 0, 2}, {0, 0, -2}}, std::nullopt};
  const auto cam = identity_camera();
  EXPECT_EQ(points_in_box2d(cloud, boxes::Box2D::make(300, 220, 340, 260), cam),
            std::vector<std::size_t>{0});
  EXPECT_TRUE(points_in_box2d(cloud, boxes::Box2D::make(0, 0, 100, 100), cam).empty());
  EXPECT_TRUE(points_in_box2d(cloud, boxes::Box2D::make(-1e9, -1e9, 1e9, 1e9), cam) ==
              std::vector<std::size_t>{0});
}

TEST(PointsInBox2D, ClosedBoxAndMask) {
  PointCloud cloud{{{0, 0, 2}, {0, 0, 3}}, std::vector<std::uint8_t>{1, 0}};
  const auto cam = identity_camera();
  EXPECT_EQ(points_in_box2d(cloud, boxes::Box2D::make(320, 240, 320, 240), cam),
            std::vector<std::size_t>{0});
}

TEST(ClusterPoints, DenseBallBeatsFarOutliers) {
  oracle::Gen g(4);
  std::vector<Vec3> pts;
  for (int i = 0; i < 50; ++i) {
    Vec3 p;
    do {
      p = Vec3(g.uniform(-0.2, 0.2), g.uniform(-0.2, 0.2), g.uniform(-0.2, 0.2));
    } while (p.norm() > 0.2);
    pts.push_back(p);
  }
  for (int i = 0; i < 5; ++i) pts.push_back(Vec3(10 + 3 * i, 0, 0));
  const auto got = cluster_points(pts, {0.5, 5, KeepRule::largest});
  std::vector<std::size_t> want(50);
  std::iota(want.begin(), want.end(), 0);
  EXPECT_EQ(got, want);
  const auto clusters = oracle::dbscan_quadratic(pts, 0.5, 5);
  ASSERT_EQ(clusters.size(), 1u);
  EXPECT_EQ(clusters[0], want);
}

TEST(ClusterPoints, IdenticalPointsAndEmptyInput) {
  const std::vector<Vec3> same(7, Vec3(1, 2, 3));
  EXPECT_EQ(cluster_points(same, {0.3, 5}).size(), 7u);
  EXPECT_TRUE(cluster_points(std::vector<Vec3>{}, {0.3, 5}).empty());
  EXPECT_TRUE(cluster_points(std::vector<Vec3>(4, Vec3::Zero()), {0.3, 5}).empty());
}

TEST(ClusterPoints, AgreesWithQuadraticDbscan) {
  oracle::Gen g(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Vec3> pts;
    const int blobs = g.integer(1, 4);
    for (int b = 0; b < blobs; ++b) {
      const Vec3 c(g.uniform(-3, 3), g.uniform(-3, 3), g.uniform(-1, 1));
      const int n = g.integer(1, 40);
      const double r = g.uniform(0.05, 0.6);
      for (int i = 0; i < n; ++i) pts.push_back(c + Vec3(g.normal(r), g.normal(r), g.normal(r)));
    }
    const ClusterParams params{g.uniform(0.1, 0.6), static_cast<std::size_t>(g.integer(1, 8)),
                               KeepRule::largest};
    const auto clusters = oracle::dbscan_quadratic(pts, params.eps, params.min_points);
    const auto got = cluster_points(pts, params);
    if (clusters.empty()) {
      EXPECT_TRUE(got.empty());
      continue;
    }
    // Clusters are seeded in index order and border points go to the first
    // cluster that reaches them, so the largest one (first on ties) is exact.
    std::size_t best = 0;
    for (std::size_t c = 1; c < clusters.size(); ++c) {
      if (clusters[c].size() > clusters[best].size()) best = c;
    }
    EXPECT_EQ(got, clusters[best]) << trial;
  }
}

TEST(ClusterPoints, NearestRulePicksClusterClosestToReference) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(Vec3(10 + 0.01 * i, 0, 0));  // larger, far
  for (int i = 0; i < 10; ++i) pts.push_back(Vec3(1 + 0.01 * i, 0, 0));   // smaller, near
  const auto near = cluster_points(pts, {0.3, 5, KeepRule::nearest}, Vec3::Zero());
  ASSERT_EQ(near.size(), 10u);
  EXPECT_EQ(near.front(), 30u);
  EXPECT_EQ(cluster_points(pts, {0.3, 5, KeepRule::largest}).size(), 30u);
}

TEST(FitBox3D, UnitCubeZeroMode) {
  const auto b = fit_box3d(cube_corners(0.0), YawMode::zero);
  EXPECT_EQ(b, boxes::Box3D::make(0, 0, 0, 1, 1, 1, 0));
}

TEST(FitBox3D, RotatedCubeMinArea) {
  const double yaw = pi / 6;
  const auto b = fit_box3d(cube_corners(yaw), YawMode::bev_min_area);
  EXPECT_NEAR(b.l, 1.0, 1e-9);
  EXPECT_NEAR(b.w, 1.0, 1e-9);
  EXPECT_NEAR(b.h, 1.0, 1e-12);
  const double r = std::remainder(b.yaw - yaw, pi / 2);
  EXPECT_NEAR(r, 0.0, 1e-9);
  EXPECT_GE(b.yaw, -pi / 2);
  EXPECT_LT(b.yaw, pi / 2);
}

TEST(FitBox3D, MinAreaMatchesAngleScan) {
  oracle::Gen g(21);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> pts;
    std::vector<Eigen::Vector2d> bev;
    const int n = g.integer(3, 60);
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(g.uniform(-2, 2) * 1.5, g.uniform(-1, 1), g.uniform(0, 1));
      const double t = 0.4;
      pts.back().head<2>() = Eigen::Rotation2Dd(t) * Eigen::Vector2d(pts.back().head<2>());
      bev.push_back(pts.back().head<2>());
    }
    const auto b = fit_box3d(pts, YawMode::bev_min_area, 0.0);
    const auto scan = oracle::min_area_rect_scan(bev);
    EXPECT_LE(b.l * b.w, scan.area * (1 + 1e-9) + 1e-12) << trial;
    EXPECT_GE(b.l * b.w, scan.area * (1 - 1e-6)) << trial;
    for (const auto& p : pts) {
      EXPECT_TRUE(oracle::inside_box(boxes::Box3D::make(b.cx, b.cy, b.cz, b.l + 1e-9, b.w + 1e-9,
                                                        b.h + 1e-9, b.yaw),
                                     p));
    }
  }
}

TEST(FitBox3D, FloorAndDegenerateInputs) {
  const std::vector<Vec3> one{Vec3(1, 2, 3)};
  const auto b = fit_box3d(one, YawMode::zero);
  EXPECT_EQ(b.l, kMinBoxSize);
  EXPECT_EQ(b.cx, 1.0);
  EXPECT_THROW(fit_box3d(one, YawMode::zero, 0.0), TooFewPoints);
  EXPECT_THROW(fit_box3d(std::vector<Vec3>{}, YawMode::zero), TooFewPoints);
  EXPECT_THROW(fit_box3d(std::vector<Vec3>{{0, 0, 0}, {1, 1, 0}, {2, 2, 1}}, YawMode::bev_min_area),
               TooFewPoints);
  EXPECT_THROW(fit_box3d(one, YawMode::bev_min_area), TooFewPoints);
}

TEST(LiftDetections, RecoversSyntheticCube) {
  harness::SynthSpec spec;
  spec.num_objects = 1;
  spec.points_per_object = 500;
  const auto scene = harness::generate_synthetic_scene(spec, 5, "one");
  const auto dets = harness::oracle_detections_2d(scene, 0.9);
  const auto cams = scene.cameras();
  const auto out = lift_detections(scene.cloud, cams, dets, {});
  ASSERT_EQ(out.detections.size(), 1u);
  EXPECT_GE(boxes::iou_3d(out.detections[0].box3d, scene.gt3d[0].box), 0.7);
  EXPECT_EQ(out.detections[0].source, boxes::Source::lifted);
  EXPECT_EQ(out.detections[0].class_id, scene.gt3d[0].class_id);
  EXPECT_EQ(out.detections[0].score, 0.9);
}

TEST(LiftDetections, EmptyBoxIsSkipped) {
  PointCloud cloud{{{0, 0, 2}}, std::nullopt};
  const std::vector<geom::CameraModel> cams{identity_camera()};
  const std::vector<std::vector<Detection2D>> dets{{{boxes::Box2D::make(0, 0, 10, 10), 1, 0.9}}};
  const auto out = lift_detections(cloud, cams, dets, {});
  EXPECT_TRUE(out.detections.empty());
  ASSERT_EQ(out.skipped.size(), 1u);
  EXPECT_EQ(out.skipped[0].reason, "empty");
}

TEST(LiftDetections, SparseBoxIsSkippedAsTooSmall) {
  PointCloud cloud{{{0, 0, 2}, {0.01, 0, 2}}, std::nullopt};
  const std::vector<geom::CameraModel> cams{identity_camera()};
  const std::vector<std::vector<Detection2D>> dets{{{boxes::Box2D::make(300, 220, 340, 260), 1, 0.9}}};
  const auto out = lift_detections(cloud, cams, dets, {});
  ASSERT_EQ(out.skipped.size(), 1u);
  EXPECT_EQ(out.skipped[0].reason, "cluster-too-small");
}

TEST(LiftDetections, TwoViewsGiveTwoBoxes) {
  harness::SynthSpec spec;
  spec.num_objects = 1;
  spec.num_views = 2;
  const auto scene = harness::generate_synthetic_scene(spec, 9, "two");
  const auto dets = harness::oracle_detections_2d(scene, 0.9);
  ASSERT_EQ(dets[0].size() + dets[1].size(), 2u);
  const auto cams = scene.cameras();
  EXPECT_EQ(lift_detections(scene.cloud, cams, dets, {}).detections.size(), 2u);
}

TEST(LiftDetections, OutliersOutsideEveryBoxChangeNothing) {
  harness::SynthSpec spec;
  spec.num_objects = 3;
  const auto scene = harness::generate_synthetic_scene(spec, 13, "mono");
  const auto dets = harness::oracle_detections_2d(scene, 0.9);
  const auto cams = scene.cameras();
  const auto before = lift_detections(scene.cloud, cams, dets, {});
  auto cloud = scene.cloud;
  oracle::Gen g(1);
  for (int i = 0; i < 300; ++i) {
    // Points behind the camera project nowhere.
    const Vec3 c = cams[0].pose.camera_center();
    const Vec3 back = -cams[0].pose.rotation().row(2).transpose();
    cloud.points.push_back(c + back * g.uniform(1, 5) + Vec3(g.normal(0.3), g.normal(0.3), 0));
  }
  const auto after = lift_detections(cloud, cams, dets, {});
  EXPECT_EQ(before.detections, after.detections);
}

TEST(LiftDetections, Deterministic) {
  harness::SynthSpec spec;
  spec.point_noise = 0.02;
  const auto scene = harness::generate_synthetic_scene(spec, 17, "d");
  const auto dets = harness::oracle_detections_2d(scene, 0.9);
  const auto cams = scene.cameras();
  EXPECT_EQ(lift_detections(scene.cloud, cams, dets, {}).detections,
            lift_detections(scene.cloud, cams, dets, {}).detections);
}

TEST(FuseInference, DividesLiftedScores) {
  const auto b = boxes::Box3D::make(0, 0, 0, 1, 1, 1, 0);
  const std::vector<boxes::Detection> l{lifted(b, 0.8, 0)};
  const auto out = fuse_inference({}, l, {2.0, 0.4, 0.25});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].score, 0.4);
}

TEST(FuseInference, EmptyLiftedIsThresholdedNms) {
  oracle::Gen g(6);
  std::vector<boxes::Detection> model;
  for (int i = 0; i < 20; ++i) model.push_back({g.box(1, 0.5, 1.5), std::nullopt, 0, g.uniform(0, 1)});
  const FusionParams p{2.0, 0.4, 0.25};
  std::vector<boxes::Detection> want;
  for (const auto& d : boxes::nms_3d(model, p.nms_iou)) {
    if (d.score >= p.confidence_threshold) want.push_back(d);
  }
  EXPECT_EQ(fuse_inference(model, {}, p), want);
}

TEST(FuseInference, ModelBeatsDuplicateLifted) {
  const auto b = boxes::Box3D::make(0, 0, 0, 1, 1, 1, 0);
  const std::vector<boxes::Detection> model{{b, std::nullopt, 2, 0.9}};
  const std::vector<boxes::Detection> l{lifted(b, 1.0, 2)};
  const auto out = fuse_inference(model, l, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].source, boxes::Source::model);
}

TEST(FuseInference, ClassesDoNotSuppressEachOtherAndScoresAreNotInvented) {
  oracle::Gen g(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<boxes::Detection> model, lift_pool;
    for (int i = 0; i < 10; ++i) {
      model.push_back({g.box(0.5, 0.5, 1.5), std::nullopt, g.integer(0, 2), g.uniform(0, 1)});
      lift_pool.push_back(lifted(g.box(0.5, 0.5, 1.5), g.uniform(0, 1), g.integer(0, 2)));
    }
    const FusionParams p{};
    const auto out = fuse_inference(model, lift_pool, p);
    std::set<double> allowed;
    for (const auto& d : model) allowed.insert(d.score);
    for (const auto& d : lift_pool) allowed.insert(d.score / p.score_divisor);
    for (const auto& d : out) {
      EXPECT_TRUE(allowed.count(d.score));
      EXPECT_GE(d.score, p.confidence_threshold);
    }
    for (int c = 0; c < 3; ++c) {
      std::vector<boxes::Detection> pool;
      for (const auto& d : model) {
        if (d.class_id == c) pool.push_back(d);
      }
      for (auto d : lift_pool) {
        if (d.class_id != c) continue;
        d.score /= p.score_divisor;
        pool.push_back(d);
      }
      std::vector<boxes::Detection> want;
      for (const auto& d : boxes::nms_3d(pool, p.nms_iou)) {
        if (d.score >= p.confidence_threshold) want.push_back(d);
      }
      std::vector<boxes::Detection> got;
      for (const auto& d : out) {
        if (d.class_id == c) got.push_back(d);
      }
      EXPECT_EQ(got, want);
    }
  }
}
