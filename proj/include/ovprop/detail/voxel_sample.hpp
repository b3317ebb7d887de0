#pragma once

// Per-voxel arithmetic shared by the parallel kernels and the serial reference
// so both produce bit-identical results.

#include <algorithm>
#include <cmath>

#include "ovprop/fuse.hpp"

namespace ovprop::fuse::detail {

inline VoxelSample sample_voxel(const geom::CameraModel& camera, const geom::Vec3& center,
                                geom::ImageSize feature_size) noexcept {
  VoxelSample s;
  s.projection = geom::project_point(camera, center);
  if (!s.projection.valid) return s;

  double fu = s.projection.u;
  double fv = s.projection.v;
  if (!(feature_size == camera.image_size)) {
    fu = (fu + 0.5) * (static_cast<double>(feature_size.width) / camera.image_size.width) - 0.5;
    fv = (fv + 0.5) * (static_cast<double>(feature_size.height) / camera.image_size.height) - 0.5;
  }
  const double max_u = feature_size.width - 1;
  const double max_v = feature_size.height - 1;
  if (!(fu >= 0.0 && fu <= max_u && fv >= 0.0 && fv <= max_v)) return s;

  const int u0 = std::min(static_cast<int>(std::floor(fu)), std::max(feature_size.width - 2, 0));
  const int v0 = std::min(static_cast<int>(std::floor(fv)), std::max(feature_size.height - 2, 0));
  const int u1 = std::min(u0 + 1, feature_size.width - 1);
  const int v1 = std::min(v0 + 1, feature_size.height - 1);
  const double au = fu - u0;
  const double av = fv - v0;
  const auto flat = [&](int x, int y) {
    return static_cast<std::uint32_t>(y * feature_size.width + x);
  };
  s.valid = true;
  s.pixel = {flat(u0, v0), flat(u1, v0), flat(u0, v1), flat(u1, v1)};
  s.weight = {(1.0 - au) * (1.0 - av), au * (1.0 - av), (1.0 - au) * av, au * av};
  return s;
}

inline double gather(const FeatureGrid2D& feat, int channel, const VoxelSample& s) noexcept {
  const double* plane = feat.values().data() + static_cast<std::size_t>(channel) * feat.plane();
  return s.weight[0] * plane[s.pixel[0]] + s.weight[1] * plane[s.pixel[1]] +
         s.weight[2] * plane[s.pixel[2]] + s.weight[3] * plane[s.pixel[3]];
}

}  // namespace ovprop::fuse::detail
