#include "ovprop/geom.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ovprop/errors.hpp"

namespace ovprop::geom {
namespace {

constexpr double kOrthoTolerance = 1e-9;
constexpr double kNormFloor = 1e-12;

bool all_finite(const Mat3& m) { return m.allFinite(); }

// R = c I + s [u]_x + (1 - c) u u^T for a unit axis u.
Mat3 rodrigues(const Vec3& u, double s, double c) {
  Mat3 k;
  k << 0.0, -u.z(), u.y(),
       u.z(), 0.0, -u.x(),
       -u.y(), u.x(), 0.0;
  return c * Mat3::Identity() + s * k + (1.0 - c) * (u * u.transpose());
}

// Axis sign at theta = pi: first component with magnitude above the floor is
// made positive.
Vec3 canonical_sign(Vec3 axis) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(axis[i]) > kNormFloor) {
      return axis[i] < 0.0 ? Vec3(-axis) : axis;
    }
  }
  return axis;
}

}  // namespace

Intrinsics Intrinsics::make(double fx, double fy, double px, double py) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw InvalidArgument("intrinsics: focal lengths must be positive and finite");
  }
  if (!std::isfinite(px) || !std::isfinite(py)) {
    throw InvalidArgument("intrinsics: principal point must be finite");
  }
  return Intrinsics{fx, fy, px, py};
}

Pose::Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

Pose::Pose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!all_finite(rotation) || !translation.allFinite()) {
    throw InvalidArgument("pose: non-finite entries");
  }
  const double ortho_err =
      (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > kOrthoTolerance) {
    throw InvalidArgument("pose: rotation is not orthonormal (err " +
                          std::to_string(ortho_err) + ")");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTolerance) {
    throw InvalidArgument("pose: rotation determinant is not +1");
  }
}

Vec3 Pose::camera_center() const { return -(rotation_.transpose() * translation_); }

CameraModel CameraModel::make(const Intrinsics& k, const Pose& pose, ImageSize size) {
  if (size.height <= 0 || size.width <= 0) {
    throw InvalidArgument("camera: image size must be positive");
  }
  // Re-validate in case the intrinsics were aggregate-initialized.
  Intrinsics::make(k.fx, k.fy, k.px, k.py);
  return CameraModel{k, pose, size};
}

Intrinsics estimate_intrinsics(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw InvalidArgument("estimate_intrinsics: dimensions must be positive");
  }
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  return Intrinsics{h, h, w / 2.0, h / 2.0};
}

Mat3 rotation_from_axis_angle(const Vec3& axis, double theta) {
  if (!axis.allFinite() || !std::isfinite(theta)) {
    throw InvalidArgument("rotation_from_axis_angle: non-finite input");
  }
  const double norm = axis.norm();
  if (!(norm > kNormFloor)) {
    if (std::abs(theta) <= kSmallAngle) return Mat3::Identity();
    throw InvalidArgument("rotation_from_axis_angle: zero axis with nonzero angle");
  }
  return rodrigues(axis / norm, std::sin(theta), std::cos(theta));
}

ExtrinsicCode encode_extrinsics(const Pose& pose) {
  const Mat3& r = pose.rotation();
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));  // 2 sin(t) u
  double s = 0.5 * vee.norm();
  double c = 0.5 * (r.trace() - 1.0);
  const double sc_norm = std::hypot(s, c);
  s /= sc_norm;
  c /= sc_norm;
  const double theta = std::atan2(s, c);

  Vec3 axis;
  if (theta < kSmallAngle) {
    axis = Vec3::UnitZ();
    s = 0.0;
    c = 1.0;
  } else if (c >= 0.0) {
    axis = vee / vee.norm();
  } else {
    // Past a quarter turn the skew part loses precision; use the symmetric
    // part (R + R^T)/2 - cos(t) I = (1 - cos(t)) u u^T instead.
    Mat3 sym = 0.5 * (r + r.transpose());
    sym.diagonal().array() -= c;
    Eigen::Index k = 0;
    sym.diagonal().maxCoeff(&k);
    axis = sym.col(k).normalized();
    if (vee.norm() > kNormFloor) {
      if (axis.dot(vee) < 0.0) axis = -axis;
    } else {
      axis = canonical_sign(axis);
    }
  }

  const Vec3& t = pose.translation();
  return {s, c, axis.x(), axis.y(), axis.z(), t.x(), t.y(), t.z()};
}

Pose decode_extrinsics(const ExtrinsicCode& code) {
  for (double x : code) {
    if (!std::isfinite(x)) throw InvalidArgument("decode_extrinsics: non-finite entry");
  }
  const double sc_norm = std::hypot(code[0], code[1]);
  if (!(sc_norm > kNormFloor)) {
    throw DegenerateCode("decode_extrinsics: (sin, cos) pair is zero");
  }
  const double s = code[0] / sc_norm;
  const double c = code[1] / sc_norm;
  const Vec3 t(code[5], code[6], code[7]);

  const Vec3 axis(code[2], code[3], code[4]);
  const double axis_norm = axis.norm();
  if (!(axis_norm > kNormFloor)) {
    if (std::abs(std::atan2(s, c)) <= kSmallAngle) return Pose(Mat3::Identity(), t);
    throw DegenerateCode("decode_extrinsics: zero axis with nonzero angle");
  }
  return Pose(rodrigues(axis / axis_norm, s, c), t);
}

std::vector<PixelProjection> project_points(std::span<const Vec3> points,
                                            const CameraModel& camera) {
  std::vector<PixelProjection> out(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = project_point(camera, points[i]);
  }
  return out;
}

bool inside_image(double u, double v, ImageSize size) noexcept {
  return u >= -0.5 && u <= size.width - 0.5 && v >= -0.5 && v <= size.height - 0.5;
}

}  // namespace ovprop::geom
