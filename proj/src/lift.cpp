#include "ovprop/lift.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "ovprop/errors.hpp"

namespace ovprop::lift {
namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;
    for (std::int64_t v : {k.x, k.y, k.z}) {
      h ^= static_cast<std::uint64_t>(v);
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

// Uniform hash grid with cell size eps for radius queries.
class NeighborGrid {
 public:
  NeighborGrid(std::span<const geom::Vec3> points, double eps) : points_(points), eps_(eps) {
    for (std::size_t i = 0; i < points.size(); ++i) cells_[key(points[i])].push_back(i);
  }

  void query(std::size_t i, std::vector<std::size_t>& out) const {
    out.clear();
    const geom::Vec3& p = points_[i];
    const CellKey k = key(p);
    const double eps2 = eps_ * eps_;
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            if ((points_[j] - p).squaredNorm() <= eps2) out.push_back(j);
          }
        }
      }
    }
  }

 private:
  CellKey key(const geom::Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / eps_)),
            static_cast<std::int64_t>(std::floor(p.y() / eps_)),
            static_cast<std::int64_t>(std::floor(p.z() / eps_))};
  }

  std::span<const geom::Vec3> points_;
  double eps_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

using Point2 = Eigen::Vector2d;

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; counter-clockwise without collinear vertices.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double floored(double extent, double min_size) { return std::max(extent, min_size); }

void require_positive(double l, double w, double h) {
  if (!(l > 0.0) || !(w > 0.0) || !(h > 0.0)) {
    throw TooFewPoints("fit_box3d: points span a degenerate box");
  }
}

}  // namespace

void ClusterParams::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("cluster: eps must be > 0");
  if (min_points < 1) throw InvalidArgument("cluster: min_points must be >= 1");
}

void FusionParams::validate() const {
  if (!(score_divisor > 1.0) || !std::isfinite(score_divisor)) {
    throw InvalidArgument("fusion: score_divisor must be > 1");
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw InvalidArgument("fusion: confidence_threshold must lie in [0, 1]");
  }
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) {
    throw InvalidArgument("fusion: nms_iou must lie in [0, 1]");
  }
}

std::vector<std::size_t> points_in_box2d(const PointCloud& cloud,
                                         std::span<const geom::PixelProjection> projected,
                                         const boxes::Box2D& box) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < projected.size(); ++i) {
    const auto& p = projected[i];
    if (!p.valid || !cloud.is_valid(i)) continue;
    if (p.u >= box.x1 && p.u <= box.x2 && p.v >= box.y1 && p.v <= box.y2) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> points_in_box2d(const PointCloud& cloud, const boxes::Box2D& box,
                                         const geom::CameraModel& camera) {
  const auto projected = geom::project_points(cloud.points, camera);
  return points_in_box2d(cloud, projected, box);
}

std::vector<std::size_t> cluster_points(std::span<const geom::Vec3> points,
                                        const ClusterParams& params,
                                        const geom::Vec3& reference) {
  params.validate();
  const std::size_t n = points.size();
  if (n == 0) return {};

  constexpr int kUnvisited = -2;
  constexpr int kNoise = -1;
  std::vector<int> label(n, kUnvisited);
  const NeighborGrid grid(points, params.eps);
  std::vector<std::size_t> neighbors;
  std::vector<std::size_t> frontier;
  int clusters = 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnvisited) continue;
    grid.query(i, neighbors);
    if (neighbors.size() < params.min_points) {
      label[i] = kNoise;
      continue;
    }
    const int c = clusters++;
    label[i] = c;
    frontier.assign(neighbors.begin(), neighbors.end());
    for (std::size_t f = 0; f < frontier.size(); ++f) {
      const std::size_t q = frontier[f];
      if (label[q] == kNoise) label[q] = c;  // border point
      if (label[q] != kUnvisited) continue;
      label[q] = c;
      grid.query(q, neighbors);
      if (neighbors.size() >= params.min_points) {
        frontier.insert(frontier.end(), neighbors.begin(), neighbors.end());
      }
    }
  }
  if (clusters == 0) return {};

  std::vector<std::size_t> sizes(clusters, 0);
  std::vector<geom::Vec3> sums(clusters, geom::Vec3::Zero());
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] < 0) continue;
    ++sizes[label[i]];
    sums[label[i]] += points[i];
  }

  int chosen = 0;
  if (params.keep == KeepRule::largest) {
    for (int c = 1; c < clusters; ++c) {
      if (sizes[c] > sizes[chosen]) chosen = c;
    }
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < clusters; ++c) {
      const double d = (sums[c] / static_cast<double>(sizes[c]) - reference).squaredNorm();
      if (d < best) {
        best = d;
        chosen = c;
      }
    }
  }

  std::vector<std::size_t> out;
  out.reserve(sizes[chosen]);
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] == chosen) out.push_back(i);
  }
  return out;
}

boxes::Box3D fit_box3d(std::span<const geom::Vec3> points, YawMode mode, double min_box_size) {
  if (!(min_box_size >= 0.0)) throw InvalidArgument("fit_box3d: min_box_size must be >= 0");
  if (points.empty()) throw TooFewPoints("fit_box3d: no points");

  double z_lo = points[0].z();
  double z_hi = z_lo;
  for (const auto& p : points) {
    z_lo = std::min(z_lo, p.z());
    z_hi = std::max(z_hi, p.z());
  }
  const double h = floored(z_hi - z_lo, min_box_size);
  const double cz = 0.5 * (z_lo + z_hi);

  if (mode == YawMode::zero) {
    geom::Vec3 lo = points[0];
    geom::Vec3 hi = points[0];
    for (const auto& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double l = floored(hi.x() - lo.x(), min_box_size);
    const double w = floored(hi.y() - lo.y(), min_box_size);
    require_positive(l, w, h);
    return boxes::Box3D::make(0.5 * (lo.x() + hi.x()), 0.5 * (lo.y() + hi.y()), cz, l, w, h,
                              0.0);
  }

  if (points.size() < 3) throw TooFewPoints("fit_box3d: bev_min_area needs >= 3 points");
  std::vector<Point2> bev;
  bev.reserve(points.size());
  for (const auto& p : points) bev.emplace_back(p.x(), p.y());
  const auto hull = convex_hull(std::move(bev));
  if (hull.size() < 3) throw TooFewPoints("fit_box3d: points are collinear in BEV");

  // Rotating calipers: the minimum-area rectangle has a side on a hull edge.
  double best_area = std::numeric_limits<double>::infinity();
  Point2 best_dir(1.0, 0.0);
  double a_lo = 0, a_hi = 0, b_lo = 0, b_hi = 0;
  for (std::size_t e = 0; e < hull.size(); ++e) {
    const Point2 dir = (hull[(e + 1) % hull.size()] - hull[e]).normalized();
    const Point2 nrm(-dir.y(), dir.x());
    double alo = std::numeric_limits<double>::infinity(), ahi = -alo;
    double blo = alo, bhi = -alo;
    for (const auto& p : hull) {
      const double a = dir.dot(p);
      const double b = nrm.dot(p);
      alo = std::min(alo, a);
      ahi = std::max(ahi, a);
      blo = std::min(blo, b);
      bhi = std::max(bhi, b);
    }
    const double area = (ahi - alo) * (bhi - blo);
    if (area < best_area) {
      best_area = area;
      best_dir = dir;
      a_lo = alo, a_hi = ahi, b_lo = blo, b_hi = bhi;
    }
  }
  const Point2 nrm(-best_dir.y(), best_dir.x());
  const Point2 center = best_dir * (0.5 * (a_lo + a_hi)) + nrm * (0.5 * (b_lo + b_hi));
  double yaw = std::atan2(best_dir.y(), best_dir.x());
  // A rectangle is symmetric under a half turn.
  if (yaw >= 0.5 * std::numbers::pi) yaw -= std::numbers::pi;
  if (yaw < -0.5 * std::numbers::pi) yaw += std::numbers::pi;
  const double l = floored(a_hi - a_lo, min_box_size);
  const double w = floored(b_hi - b_lo, min_box_size);
  require_positive(l, w, h);
  return boxes::Box3D::make(center.x(), center.y(), cz, l, w, h, yaw);
}

LiftResult lift_detections(const PointCloud& cloud, std::span<const geom::CameraModel> cameras,
                           std::span<const std::vector<Detection2D>> dets2d,
                           const LiftParams& params) {
  params.cluster.validate();
  if (cameras.size() != dets2d.size()) {
    throw InvalidArgument("lift_detections: one detection list per view is required");
  }
  if (cloud.valid && cloud.valid->size() != cloud.points.size()) {
    throw InvalidArgument("lift_detections: validity mask size mismatch");
  }
  LiftResult out;
  std::vector<geom::Vec3> selected;
  for (std::size_t view = 0; view < cameras.size(); ++view) {
    const auto& camera = cameras[view];
    const auto projected = geom::project_points(cloud.points, camera);
    const geom::Vec3 eye = camera.pose.camera_center();
    for (std::size_t d = 0; d < dets2d[view].size(); ++d) {
      const Detection2D& det = dets2d[view][d];
      const auto inside = points_in_box2d(cloud, projected, det.box2d);
      if (inside.empty()) {
        out.skipped.push_back({view, d, "empty"});
        continue;
      }
      selected.clear();
      for (std::size_t i : inside) selected.push_back(cloud.points[i]);
      const auto cluster = cluster_points(selected, params.cluster, eye);
      if (cluster.empty()) {
        out.skipped.push_back({view, d, "cluster-too-small"});
        continue;
      }
      std::vector<geom::Vec3> members;
      members.reserve(cluster.size());
      for (std::size_t i : cluster) members.push_back(selected[i]);
      try {
        const auto box = fit_box3d(members, params.yaw_mode, params.min_box_size);
        out.detections.push_back(
            boxes::Detection{box, det.box2d, det.class_id, det.score, boxes::Source::lifted});
      } catch (const TooFewPoints&) {
        out.skipped.push_back({view, d, "fit-failed"});
      }
    }
  }
  return out;
}

std::vector<boxes::Detection> fuse_inference(std::span<const boxes::Detection> model_dets,
                                             std::span<const boxes::Detection> lifted_dets,
                                             const FusionParams& params) {
  params.validate();
  std::vector<boxes::Detection> pool(model_dets.begin(), model_dets.end());
  pool.reserve(model_dets.size() + lifted_dets.size());
  for (boxes::Detection d : lifted_dets) {
    d.score /= params.score_divisor;
    d.source = boxes::Source::lifted;
    pool.push_back(d);
  }
  auto kept = boxes::nms_3d_per_class(pool, params.nms_iou);
  std::erase_if(kept, [&](const boxes::Detection& d) {
    return d.score < params.confidence_threshold;
  });
  return kept;
}

}  // namespace ovprop::lift
