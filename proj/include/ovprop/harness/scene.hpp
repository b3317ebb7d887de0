#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovprop/boxes.hpp"
#include "ovprop/geom.hpp"
#include "ovprop/lift.hpp"

namespace ovprop::harness {

enum class Split { base, novel };

struct ClassInfo {
  std::string name;
  Split split = Split::base;

  bool operator==(const ClassInfo&) const = default;
};

// One camera view. The extrinsic code is the stored form; `camera` is its
// decoded counterpart.
struct View {
  geom::CameraModel camera;
  geom::ExtrinsicCode extrinsic_code{};
  // Absent in the file means estimate_intrinsics applies.
  std::optional<geom::Intrinsics> explicit_intrinsics;
  std::optional<std::string> features_path;  // relative to the scene file

  static View from_record(int height, int width, const std::optional<geom::Intrinsics>& k,
                          const geom::ExtrinsicCode& code);
};

struct GtBox3D {
  int class_id = 0;
  boxes::Box3D box;
};

struct GtBox2D {
  int class_id = 0;
  boxes::Box2D box;
};

enum class SceneKind {
  detection3d,  // point cloud + images + 3D annotations
  image2d,      // 2D-only image: no point cloud, no 3D annotations
};

struct Scene {
  std::string id;
  SceneKind kind = SceneKind::detection3d;
  lift::PointCloud cloud;
  std::vector<View> views;
  std::vector<GtBox3D> gt3d;
  std::vector<std::vector<GtBox2D>> gt2d;  // one list per view
  std::vector<ClassInfo> vocabulary;

  // Throws FormatError on inconsistent contents.
  void validate() const;

  std::vector<geom::CameraModel> cameras() const;
};

}  // namespace ovprop::harness
