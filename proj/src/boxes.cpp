#include "ovprop/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <tuple>

#include "ovprop/errors.hpp"

namespace ovprop::boxes {
namespace {

using Point2 = Eigen::Vector2d;

constexpr double kPi = std::numbers::pi;

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Keeps the part of `poly` on the left of the directed line e0 -> e1.
std::vector<Point2> clip_half_plane(const std::vector<Point2>& poly, const Point2& e0,
                                    const Point2& e1) {
  std::vector<Point2> out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  const Point2 dir = e1 - e0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& prev = poly[(i + n - 1) % n];
    const Point2& cur = poly[i];
    const double d_prev = cross(dir, prev - e0);
    const double d_cur = cross(dir, cur - e0);
    if (d_cur >= 0.0) {
      if (d_prev < 0.0) {
        const double t = d_prev / (d_prev - d_cur);
        out.push_back(prev + t * (cur - prev));
      }
      out.push_back(cur);
    } else if (d_prev > 0.0) {
      const double t = d_prev / (d_prev - d_cur);
      out.push_back(prev + t * (cur - prev));
    }
  }
  return out;
}

double polygon_area(const std::vector<Point2>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    twice += cross(poly[i], poly[(i + 1) % n]);
  }
  return std::abs(0.5 * twice);
}

double interval_overlap(double a_lo, double a_hi, double b_lo, double b_hi) {
  return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

auto as_tuple(const Box3D& b) { return std::tie(b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw); }

// Ratio in [0, 1]; 0 when the union is empty.
double ratio(double inter, double uni) {
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  return order;
}

// Indices (into dets) kept by greedy suppression over `order`.
std::vector<std::size_t> greedy_keep(std::span<const Detection> dets,
                                     const std::vector<std::size_t>& order,
                                     double iou_threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const Box3D& cand = dets[idx].box3d;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return iou_3d(dets[k].box3d, cand) > iou_threshold;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

void check_threshold(double iou_threshold) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0)) {
    throw InvalidArgument("nms_3d: iou_threshold must lie in [0, 1]");
  }
}

}  // namespace

Box2D Box2D::make(double x1, double y1, double x2, double y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw InvalidArgument("Box2D: non-finite coordinate");
  }
  if (x1 > x2 || y1 > y2) {
    throw InvalidArgument("Box2D: requires x1 <= x2 and y1 <= y2");
  }
  return Box2D{x1, y1, x2, y2};
}

Box3D Box3D::make(double cx, double cy, double cz, double l, double w, double h, double yaw) {
  for (double v : {cx, cy, cz, l, w, h, yaw}) {
    if (!std::isfinite(v)) throw InvalidArgument("Box3D: non-finite value");
  }
  if (!(l > 0.0) || !(w > 0.0) || !(h > 0.0)) {
    throw InvalidArgument("Box3D: sizes must be positive");
  }
  return Box3D{cx, cy, cz, l, w, h, normalize_yaw(yaw)};
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::model: return "model";
    case Source::lifted: return "lifted";
    case Source::pseudo: return "pseudo";
  }
  return "model";
}

Source source_from_string(std::string_view s) {
  if (s == "model") return Source::model;
  if (s == "lifted") return Source::lifted;
  if (s == "pseudo") return Source::pseudo;
  throw FormatError("unknown detection source '" + std::string(s) + "'");
}

double normalize_yaw(double yaw) {
  if (yaw >= -kPi && yaw < kPi) return yaw;
  double r = std::fmod(yaw + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  const double out = r - kPi;
  return out >= kPi ? -kPi : out;
}

double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = interval_overlap(a.x1, a.x2, b.x1, b.x2);
  const double ih = interval_overlap(a.y1, a.y2, b.y1, b.y2);
  const double inter = iw * ih;
  return ratio(inter, a.area() + b.area() - inter);
}

double giou_2d(const Box2D& a, const Box2D& b) {
  const double iw = interval_overlap(a.x1, a.x2, b.x1, b.x2);
  const double ih = interval_overlap(a.y1, a.y2, b.y1, b.y2);
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double enclosing =
      (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  const double iou = ratio(inter, uni);
  if (!(enclosing > 0.0)) return iou;
  return iou - (enclosing - uni) / enclosing;
}

std::array<Eigen::Vector2d, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double hl = 0.5 * b.l;
  const double hw = 0.5 * b.w;
  const std::array<Point2, 4> local = {Point2(hl, hw), Point2(-hl, hw), Point2(-hl, -hw),
                                       Point2(hl, -hw)};
  std::array<Point2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = Point2(b.cx + c * local[i].x() - s * local[i].y(),
                    b.cy + s * local[i].x() + c * local[i].y());
  }
  return out;
}

double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  std::vector<Point2> poly(ca.begin(), ca.end());
  for (std::size_t i = 0; i < 4 && !poly.empty(); ++i) {
    poly = clip_half_plane(poly, cb[i], cb[(i + 1) % 4]);
  }
  return polygon_area(poly);
}

double iou_3d(const Box3D& a, const Box3D& b) {
  // Evaluate in a canonical argument order so the result is exactly symmetric.
  if (as_tuple(b) < as_tuple(a)) return iou_3d(b, a);
  const double z_overlap =
      interval_overlap(a.cz - 0.5 * a.h, a.cz + 0.5 * a.h, b.cz - 0.5 * b.h, b.cz + 0.5 * b.h);
  if (z_overlap <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * z_overlap;
  return ratio(inter, a.volume() + b.volume() - inter);
}

double iou_3d_axis_aligned(const Box3D& a, const Box3D& b) {
  const double ox = interval_overlap(a.cx - 0.5 * a.l, a.cx + 0.5 * a.l, b.cx - 0.5 * b.l,
                                     b.cx + 0.5 * b.l);
  const double oy = interval_overlap(a.cy - 0.5 * a.w, a.cy + 0.5 * a.w, b.cy - 0.5 * b.w,
                                     b.cy + 0.5 * b.w);
  const double oz = interval_overlap(a.cz - 0.5 * a.h, a.cz + 0.5 * a.h, b.cz - 0.5 * b.h,
                                     b.cz + 0.5 * b.h);
  const double inter = ox * oy * oz;
  return ratio(inter, a.volume() + b.volume() - inter);
}

double iou_3d(const Box3D& a, const Box3D& b, IoUMode mode) {
  return mode == IoUMode::rotated ? iou_3d(a, b) : iou_3d_axis_aligned(a, b);
}

std::array<geom::Vec3, 8> corners_3d(const Box3D& b) {
  const auto bev = bev_corners(b);
  const double z0 = b.cz - 0.5 * b.h;
  const double z1 = b.cz + 0.5 * b.h;
  std::array<geom::Vec3, 8> out;
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = geom::Vec3(bev[i].x(), bev[i].y(), z0);
    out[i + 4] = geom::Vec3(bev[i].x(), bev[i].y(), z1);
  }
  return out;
}

std::optional<Box2D> project_box3d_to_2d(const Box3D& b, const geom::CameraModel& camera) {
  double u_min = std::numeric_limits<double>::infinity();
  double v_min = u_min;
  double u_max = -u_min;
  double v_max = -u_min;
  for (const auto& corner : corners_3d(b)) {
    const auto p = geom::project_point(camera, corner);
    if (!p.valid) return std::nullopt;
    u_min = std::min(u_min, p.u);
    u_max = std::max(u_max, p.u);
    v_min = std::min(v_min, p.v);
    v_max = std::max(v_max, p.v);
  }
  const double u_hi = camera.image_size.width - 0.5;
  const double v_hi = camera.image_size.height - 0.5;
  const double x1 = std::clamp(u_min, -0.5, u_hi);
  const double x2 = std::clamp(u_max, -0.5, u_hi);
  const double y1 = std::clamp(v_min, -0.5, v_hi);
  const double y2 = std::clamp(v_max, -0.5, v_hi);
  if (!(x1 < x2) || !(y1 < y2)) return std::nullopt;
  return Box2D{x1, y1, x2, y2};
}

std::vector<double> cross_iou_3d(std::span<const Box3D> a, std::span<const Box3D> b,
                                 IoUMode mode) {
  const std::size_t cols = b.size();
  std::vector<double> out(a.size() * cols);
  const auto rows = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      out[static_cast<std::size_t>(i) * cols + j] = iou_3d(a[i], b[j], mode);
    }
  }
  return out;
}

std::vector<Detection> nms_3d(std::span<const Detection> dets, double iou_threshold) {
  check_threshold(iou_threshold);
  const auto kept = greedy_keep(dets, score_order(dets), iou_threshold);
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

std::vector<Detection> nms_3d_per_class(std::span<const Detection> dets, double iou_threshold) {
  check_threshold(iou_threshold);
  const auto order = score_order(dets);
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t idx : order) by_class[dets[idx].class_id].push_back(idx);

  std::vector<std::size_t> kept;
  for (const auto& [cls, class_order] : by_class) {
    const auto k = greedy_keep(dets, class_order, iou_threshold);
    kept.insert(kept.end(), k.begin(), k.end());
  }
  std::stable_sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });
  std::vector<Detection> out;
  out.reserve(kept.size());
  for (std::size_t k : kept) out.push_back(dets[k]);
  return out;
}

}  // namespace ovprop::boxes
