#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovprop/boxes.hpp"
#include "ovprop/geom.hpp"

namespace ovprop::lift {

struct PointCloud {
  std::vector<geom::Vec3> points;  // world frame, meters
  // Optional per-point mask; when present must match points.size().
  std::optional<std::vector<std::uint8_t>> valid;

  bool is_valid(std::size_t i) const { return !valid || (*valid)[i] != 0; }
};

enum class KeepRule {
  largest,  // most points; ties go to the first-found cluster
  nearest,  // centroid closest to the reference point (the camera center)
};

struct ClusterParams {
  double eps = 0.3;  // meters
  std::size_t min_points = 5;
  KeepRule keep = KeepRule::largest;

  void validate() const;
};

enum class YawMode {
  zero,          // axis-aligned min/max box
  bev_min_area,  // minimum-area rectangle of the BEV hull
};

inline constexpr double kMinBoxSize = 0.02;

struct FusionParams {
  double score_divisor = 2.0;
  double confidence_threshold = 0.4;
  double nms_iou = 0.25;

  void validate() const;
};

// 2D open-vocabulary detection in one view.
struct Detection2D {
  boxes::Box2D box2d;
  int class_id = 0;
  double score = 0.0;
};

struct LiftParams {
  ClusterParams cluster;
  YawMode yaw_mode = YawMode::bev_min_area;
  double min_box_size = kMinBoxSize;
};

struct SkipRecord {
  std::size_t view = 0;
  std::size_t det_index = 0;
  std::string reason;  // "empty", "cluster-too-small" or "fit-failed"
};

struct LiftResult {
  std::vector<boxes::Detection> detections;
  std::vector<SkipRecord> skipped;
};

// Indices (ascending) of valid points whose projection is in front of the
// camera and inside the closed box.
std::vector<std::size_t> points_in_box2d(const PointCloud& cloud, const boxes::Box2D& box,
                                         const geom::CameraModel& camera);

// Same selection against precomputed projections of the whole cloud.
std::vector<std::size_t> points_in_box2d(const PointCloud& cloud,
                                         std::span<const geom::PixelProjection> projected,
                                         const boxes::Box2D& box);

// DBSCAN over `points`: a point is core when at least min_points points
// (itself included) lie within eps. Returns the indices (ascending) of the
// cluster selected by params.keep, or empty when there is no cluster.
std::vector<std::size_t> cluster_points(std::span<const geom::Vec3> points,
                                        const ClusterParams& params,
                                        const geom::Vec3& reference = geom::Vec3::Zero());

// Throws TooFewPoints when the input cannot support a box of the requested
// kind. Each size is raised to at least min_box_size. bev_min_area yaw is
// reported in [-pi/2, pi/2).
boxes::Box3D fit_box3d(std::span<const geom::Vec3> points, YawMode mode,
                       double min_box_size = kMinBoxSize);

// Per view and per 2D box: select points, cluster, fit. Class and score are
// copied from the 2D detection. Failures are recorded, never thrown.
LiftResult lift_detections(const PointCloud& cloud, std::span<const geom::CameraModel> cameras,
                           std::span<const std::vector<Detection2D>> dets2d,
                           const LiftParams& params);

// Lifted scores are divided by score_divisor, both pools are merged, per-class
// NMS is applied, and detections below confidence_threshold are dropped.
std::vector<boxes::Detection> fuse_inference(std::span<const boxes::Detection> model_dets,
                                             std::span<const boxes::Detection> lifted_dets,
                                             const FusionParams& params);

}  // namespace ovprop::lift
