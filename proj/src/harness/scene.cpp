#include "ovprop/harness/scene.hpp"

#include <string>

#include "ovprop/errors.hpp"

namespace ovprop::harness {

View View::from_record(int height, int width, const std::optional<geom::Intrinsics>& k,
                       const geom::ExtrinsicCode& code) {
  View v;
  v.extrinsic_code = code;
  v.explicit_intrinsics = k;
  const geom::Intrinsics intr = k ? *k : geom::estimate_intrinsics(height, width);
  v.camera = geom::CameraModel::make(intr, geom::decode_extrinsics(code), {height, width});
  return v;
}

void Scene::validate() const {
  if (id.empty()) throw FormatError("scene: empty id");
  if (gt2d.size() != views.size()) {
    throw FormatError("scene " + id + ": gt2d must have one list per view");
  }
  const auto check_class = [&](int c) {
    if (c < 0 || static_cast<std::size_t>(c) >= vocabulary.size()) {
      throw FormatError("scene " + id + ": class_id " + std::to_string(c) +
                        " not in vocabulary");
    }
  };
  for (const auto& g : gt3d) check_class(g.class_id);
  for (const auto& view : gt2d) {
    for (const auto& g : view) check_class(g.class_id);
  }
  if (kind == SceneKind::image2d && (!cloud.points.empty() || !gt3d.empty())) {
    throw FormatError("scene " + id + ": image-only scenes carry no points or 3D boxes");
  }
  if (cloud.valid && cloud.valid->size() != cloud.points.size()) {
    throw FormatError("scene " + id + ": validity mask size mismatch");
  }
}

std::vector<geom::CameraModel> Scene::cameras() const {
  std::vector<geom::CameraModel> out;
  out.reserve(views.size());
  for (const auto& v : views) out.push_back(v.camera);
  return out;
}

}  // namespace ovprop::harness
