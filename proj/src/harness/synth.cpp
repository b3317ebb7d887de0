#include "ovprop/harness/synth.hpp"

#include <cmath>
#include <numbers>

#include "ovprop/errors.hpp"
#include "ovprop/rng.hpp"

namespace ovprop::harness {
namespace {

constexpr double kPi = std::numbers::pi;

// World frame is z-up; the camera looks along +z with y pointing down the
// image.
geom::Pose look_at(const geom::Vec3& eye, const geom::Vec3& target) {
  const geom::Vec3 forward = (target - eye).normalized();
  const geom::Vec3 right = forward.cross(geom::Vec3::UnitZ()).normalized();
  const geom::Vec3 down = forward.cross(right);
  geom::Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  return geom::Pose(r, -(r * eye));
}

geom::Vec3 sample_surface(const boxes::Box3D& b, Rng& rng) {
  const double a_xy = b.l * b.w;
  const double a_xz = b.l * b.h;
  const double a_yz = b.w * b.h;
  const double pick = rng.uniform() * 2.0 * (a_xy + a_xz + a_yz);
  const double s = rng.uniform() - 0.5;
  const double t = rng.uniform() - 0.5;
  const double side = rng.bernoulli(0.5) ? 0.5 : -0.5;
  geom::Vec3 local;
  if (pick < 2.0 * a_xy) {
    local = {s * b.l, t * b.w, side * b.h};
  } else if (pick < 2.0 * (a_xy + a_xz)) {
    local = {s * b.l, side * b.w, t * b.h};
  } else {
    local = {side * b.l, s * b.w, t * b.h};
  }
  const double c = std::cos(b.yaw);
  const double sn = std::sin(b.yaw);
  return {b.cx + c * local.x() - sn * local.y(), b.cy + sn * local.x() + c * local.y(),
          b.cz + local.z()};
}

bool inside(const boxes::Box3D& b, const geom::Vec3& p) {
  const double c = std::cos(b.yaw);
  const double s = std::sin(b.yaw);
  const double dx = p.x() - b.cx;
  const double dy = p.y() - b.cy;
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * b.l && std::abs(ly) <= 0.5 * b.w &&
         std::abs(p.z() - b.cz) <= 0.5 * b.h;
}

}  // namespace

std::vector<ClassInfo> SynthSpec::default_vocabulary() {
  return {{"chair", Split::base},   {"table", Split::base},    {"bed", Split::base},
          {"sofa", Split::base},    {"bathtub", Split::novel}, {"bookshelf", Split::novel}};
}

void SynthSpec::validate() const {
  if (num_objects < 0 || num_views < 0 || points_per_object < 0 || background_points < 0) {
    throw InvalidArgument("synth: counts must be nonnegative");
  }
  if (!(min_size > 0.0) || !(max_size >= min_size)) {
    throw InvalidArgument("synth: need 0 < min_size <= max_size");
  }
  if (!(room_size > 0.0) || !(camera_distance > 0.0)) {
    throw InvalidArgument("synth: room_size and camera_distance must be positive");
  }
  if (point_noise < 0.0 || dropout < 0.0 || dropout > 1.0 || min_gap < 0.0) {
    throw InvalidArgument("synth: invalid noise settings");
  }
  if (image_height < 1 || image_width < 1) throw InvalidArgument("synth: invalid image size");
  if (vocabulary.empty()) throw InvalidArgument("synth: empty vocabulary");
}

Scene generate_synthetic_scene(const SynthSpec& spec, std::uint64_t seed, const std::string& id) {
  spec.validate();
  Rng rng(seed);
  Scene scene;
  scene.id = id;
  scene.kind = SceneKind::detection3d;
  scene.vocabulary = spec.vocabulary;

  const double half = 0.5 * spec.room_size;
  for (int k = 0; k < spec.num_objects; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_placement_attempts && !placed; ++attempt) {
      const double l = rng.uniform(spec.min_size, spec.max_size);
      const double w = rng.uniform(spec.min_size, spec.max_size);
      const double h = rng.uniform(spec.min_size, spec.max_size);
      const double yaw = spec.random_yaw ? rng.uniform(-kPi, kPi) : 0.0;
      const double cx = rng.uniform(-half, half);
      const double cy = rng.uniform(-half, half);
      const auto candidate = boxes::Box3D::make(cx, cy, 0.5 * h, l, w, h, yaw);
      auto padded = candidate;
      padded.l += 2.0 * spec.min_gap;
      padded.w += 2.0 * spec.min_gap;
      bool clear = true;
      for (const auto& g : scene.gt3d) {
        if (boxes::bev_intersection_area(padded, g.box) > 0.0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      const int cls = static_cast<int>(rng.index(spec.vocabulary.size()));
      scene.gt3d.push_back({cls, candidate});
      placed = true;
    }
    if (!placed) {
      throw PackingFailure("synth: could not place object " + std::to_string(k) + " in scene " + id);
    }
  }

  const geom::Vec3 target(0.0, 0.0, 0.5);
  for (int v = 0; v < spec.num_views; ++v) {
    const double phi = 2.0 * kPi * v / std::max(spec.num_views, 1) + rng.uniform(-0.3, 0.3);
    const geom::Vec3 eye(spec.camera_distance * std::cos(phi), spec.camera_distance * std::sin(phi),
                         spec.camera_height);
    // Round-trip through the stored code so files reproduce the camera exactly.
    const auto code = geom::encode_extrinsics(look_at(eye, target));
    scene.views.push_back(View::from_record(spec.image_height, spec.image_width, std::nullopt, code));
  }

  for (const auto& g : scene.gt3d) {
    for (int i = 0; i < spec.points_per_object; ++i) {
      geom::Vec3 p = sample_surface(g.box, rng);
      const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
      const bool dropped = rng.bernoulli(spec.dropout);
      if (dropped) continue;
      if (spec.point_noise > 0.0) p += spec.point_noise * geom::Vec3(nx, ny, nz);
      scene.cloud.points.push_back(p);
    }
  }
  const double clutter_half = half + 1.0;
  for (int i = 0; i < spec.background_points; ++i) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      const geom::Vec3 p(rng.uniform(-clutter_half, clutter_half),
                         rng.uniform(-clutter_half, clutter_half), rng.uniform(0.0, 2.5));
      bool in_any = false;
      for (const auto& g : scene.gt3d) in_any = in_any || inside(g.box, p);
      if (!in_any) {
        scene.cloud.points.push_back(p);
        break;
      }
    }
  }

  scene.gt2d.resize(scene.views.size());
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    for (const auto& g : scene.gt3d) {
      if (auto box = boxes::project_box3d_to_2d(g.box, scene.views[v].camera)) {
        scene.gt2d[v].push_back({g.class_id, *box});
      }
    }
  }
  scene.validate();
  return scene;
}

ImageOnlyScene to_image_only(const Scene& scene) {
  ImageOnlyScene out;
  out.scene.id = scene.id;
  out.scene.kind = SceneKind::image2d;
  out.scene.vocabulary = scene.vocabulary;
  if (!scene.views.empty()) {
    out.scene.views.push_back(scene.views.front());
    out.scene.gt2d.push_back(scene.gt2d.front());
  }
  out.hidden_gt3d = scene.gt3d;
  return out;
}

std::vector<std::vector<lift::Detection2D>> oracle_detections_2d(const Scene& scene, double score) {
  std::vector<std::vector<lift::Detection2D>> out(scene.gt2d.size());
  for (std::size_t v = 0; v < scene.gt2d.size(); ++v) {
    for (const auto& g : scene.gt2d[v]) out[v].push_back({g.box, g.class_id, score});
  }
  return out;
}

}  // namespace ovprop::harness
