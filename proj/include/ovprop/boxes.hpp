#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ovprop/geom.hpp"

namespace ovprop::boxes {

// Axis-aligned image box in pixels.
struct Box2D {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  // Throws InvalidArgument unless finite with x1 <= x2 and y1 <= y2.
  static Box2D make(double x1, double y1, double x2, double y2);

  double area() const { return (x2 - x1) * (y2 - y1); }

  bool operator==(const Box2D&) const = default;
};

// 7-DoF box: center, sizes along the box's local x (l), y (w), z (h), and yaw
// about the world z (gravity) axis. Yaw is kept in [-pi, pi).
struct Box3D {
  double cx = 0.0;
  double cy = 0.0;
  double cz = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;
  double yaw = 0.0;

  // Throws InvalidArgument for non-positive sizes or non-finite values;
  // normalizes yaw.
  static Box3D make(double cx, double cy, double cz, double l, double w, double h,
                    double yaw);

  double volume() const { return l * w * h; }

  bool operator==(const Box3D&) const = default;
};

enum class Source { model, lifted, pseudo };

std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct Detection {
  Box3D box3d;
  std::optional<Box2D> box2d;
  int class_id = 0;
  double score = 0.0;
  Source source = Source::model;

  bool operator==(const Detection&) const = default;
};

enum class IoUMode {
  rotated,       // exact yaw-rotated intersection
  axis_aligned,  // yaw ignored, l along x and w along y
};

// Wraps an angle into [-pi, pi). Values already in range are returned
// unchanged, bit for bit.
double normalize_yaw(double yaw);

double iou_2d(const Box2D& a, const Box2D& b);
double giou_2d(const Box2D& a, const Box2D& b);

// Bird's-eye-view footprint corners, counter-clockwise, starting at local
// (+l/2, +w/2).
std::array<Eigen::Vector2d, 4> bev_corners(const Box3D& b);

// Area of the intersection of the two BEV rectangles (convex clipping).
double bev_intersection_area(const Box3D& a, const Box3D& b);

double iou_3d(const Box3D& a, const Box3D& b);
// Closed form for boxes treated as axis-aligned (yaw ignored).
double iou_3d_axis_aligned(const Box3D& a, const Box3D& b);
double iou_3d(const Box3D& a, const Box3D& b, IoUMode mode);

// Corner order: 0-3 are the bottom face (z = cz - h/2) in bev_corners order,
// 4-7 the top face in the same order.
std::array<geom::Vec3, 8> corners_3d(const Box3D& b);

// Bounding rectangle of the projected corners, clipped to the image. Empty
// when any corner is not in front of the camera or the clipped box has no
// extent inside the image.
std::optional<Box2D> project_box3d_to_2d(const Box3D& b, const geom::CameraModel& camera);

// Row-major a.size() x b.size() matrix of iou_3d. OpenMP-parallel over rows.
std::vector<double> cross_iou_3d(std::span<const Box3D> a, std::span<const Box3D> b,
                                 IoUMode mode = IoUMode::rotated);

// Greedy suppression in descending score order; equal scores keep the lower
// input index first. A candidate is dropped when its IoU with an already kept
// box exceeds iou_threshold. Class labels are ignored.
std::vector<Detection> nms_3d(std::span<const Detection> dets, double iou_threshold);

// nms_3d within each class_id; output merged in descending score order with
// the same tie rule.
std::vector<Detection> nms_3d_per_class(std::span<const Detection> dets, double iou_threshold);

}  // namespace ovprop::boxes
