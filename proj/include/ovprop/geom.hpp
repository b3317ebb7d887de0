#pragma once

#include <array>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ovprop::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Points at or closer than this depth (meters, camera frame) are treated as
// behind the camera.
inline constexpr double kDepthEpsilon = 1e-6;

// Below this angle the rotation axis is unobservable and encoded as +z.
inline constexpr double kSmallAngle = 1e-9;

struct ImageSize {
  int height = 0;
  int width = 0;

  bool operator==(const ImageSize&) const = default;
};

// Pinhole intrinsics in pixels. Pixel convention: u runs along the width, v
// along the height, origin at the top-left, and integer coordinates are pixel
// centers, so an image of width W spans u in [-0.5, W - 0.5].
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double px = 0.0;
  double py = 0.0;

  static Intrinsics make(double fx, double fy, double px, double py);

  bool operator==(const Intrinsics&) const = default;
};

// World-to-camera rigid transform p_cam = R * p_world + T.
class Pose {
 public:
  Pose();
  // Throws InvalidArgument unless R is orthonormal with det 1 (1e-9).
  Pose(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  // Camera center in world coordinates, -R^T T.
  Vec3 camera_center() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// [sin(theta), cos(theta), ux, uy, uz, tx, ty, tz]: axis-angle rotation plus
// translation.
using ExtrinsicCode = std::array<double, 8>;

struct CameraModel {
  Intrinsics intrinsics;
  Pose pose;
  ImageSize image_size;

  static CameraModel make(const Intrinsics& k, const Pose& pose, ImageSize size);
};

struct PixelProjection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool valid = false;
};

// f_x = f_y = h, principal point at (w/2, h/2).
Intrinsics estimate_intrinsics(int height, int width);

// Rodrigues rotation. The axis is renormalized; a zero axis is accepted only
// with |theta| <= kSmallAngle (yielding identity).
Mat3 rotation_from_axis_angle(const Vec3& axis, double theta);

ExtrinsicCode encode_extrinsics(const Pose& pose);

// Normalizes (sin, cos) jointly and the axis to unit length. Throws
// DegenerateCode when either cannot be recovered.
Pose decode_extrinsics(const ExtrinsicCode& code);

// Single-point projection. Every projection in the library goes through this
// function so the arithmetic order is identical everywhere.
inline PixelProjection project_point(const CameraModel& camera, const Vec3& p) noexcept {
  const Mat3& r = camera.pose.rotation();
  const Vec3& t = camera.pose.translation();
  const double x = r(0, 0) * p.x() + r(0, 1) * p.y() + r(0, 2) * p.z() + t.x();
  const double y = r(1, 0) * p.x() + r(1, 1) * p.y() + r(1, 2) * p.z() + t.y();
  const double z = r(2, 0) * p.x() + r(2, 1) * p.y() + r(2, 2) * p.z() + t.z();
  PixelProjection out;
  out.depth = z;
  if (!(z > kDepthEpsilon)) {
    out.u = std::numeric_limits<double>::quiet_NaN();
    out.v = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const Intrinsics& k = camera.intrinsics;
  out.u = k.fx * x / z + k.px;
  out.v = k.fy * y / z + k.py;
  out.valid = true;
  return out;
}

// Index-aligned with the input; invalid entries are flagged, not dropped.
// OpenMP-parallel over points.
std::vector<PixelProjection> project_points(std::span<const Vec3> points,
                                            const CameraModel& camera);

// True when (u, v) lies inside the image rectangle [-0.5, W-0.5] x [-0.5, H-0.5].
bool inside_image(double u, double v, ImageSize size) noexcept;

}  // namespace ovprop::geom
