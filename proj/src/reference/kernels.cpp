#include "ovprop/reference.hpp"

#include "ovprop/detail/voxel_sample.hpp"
#include "ovprop/errors.hpp"

namespace ovprop::reference {
namespace {

void check_same_shape(const fuse::FeatureGrid3D& a, const fuse::FeatureGrid3D& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": shape mismatch");
}

}  // namespace

std::vector<geom::PixelProjection> project_points(std::span<const geom::Vec3> points,
                                                  const geom::CameraModel& camera) {
  std::vector<geom::PixelProjection> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(geom::project_point(camera, p));
  return out;
}

std::vector<double> cross_iou_3d(std::span<const boxes::Box3D> a, std::span<const boxes::Box3D> b,
                                 boxes::IoUMode mode) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (const auto& x : a) {
    for (const auto& y : b) out.push_back(boxes::iou_3d(x, y, mode));
  }
  return out;
}

fuse::ProjectionMap build_projection_map(const fuse::VoxelGridSpec& grid,
                                         const geom::CameraModel& camera,
                                         geom::ImageSize feature_size) {
  grid.validate();
  if (feature_size.height < 1 || feature_size.width < 1) {
    throw InvalidArgument("build_projection_map: feature size must be positive");
  }
  fuse::ProjectionMap map;
  map.grid = grid;
  map.feature_size = feature_size;
  map.samples.reserve(grid.voxel_count());
  for (int x = 0; x < grid.dims[0]; ++x) {
    for (int y = 0; y < grid.dims[1]; ++y) {
      for (int z = 0; z < grid.dims[2]; ++z) {
        map.samples.push_back(fuse::detail::sample_voxel(camera, grid.center(x, y, z), feature_size));
      }
    }
  }
  return map;
}

fuse::FeatureGrid3D resample_to_voxels(const fuse::FeatureGrid2D& feat,
                                       const fuse::ProjectionMap& map) {
  if (feat.height() != map.feature_size.height || feat.width() != map.feature_size.width ||
      map.samples.size() != map.grid.voxel_count()) {
    throw InvalidArgument("resample_to_voxels: dimension mismatch");
  }
  fuse::FeatureGrid3D out(feat.channels(), map.grid.dims);
  auto ov = out.values();
  const std::size_t voxels = map.samples.size();
  for (int c = 0; c < feat.channels(); ++c) {
    for (std::size_t i = 0; i < voxels; ++i) {
      const auto& s = map.samples[i];
      if (s.valid) ov[static_cast<std::size_t>(c) * voxels + i] = fuse::detail::gather(feat, c, s);
    }
  }
  return out;
}

fuse::FeatureGrid3D sum_multiview(std::span<const fuse::FeatureGrid3D> grids) {
  if (grids.empty()) throw InvalidArgument("sum_multiview: no grids");
  for (const auto& g : grids) check_same_shape(grids[0], g, "sum_multiview");
  fuse::FeatureGrid3D out = grids[0];
  auto ov = out.values();
  for (std::size_t g = 1; g < grids.size(); ++g) {
    const auto gv = grids[g].values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += gv[i];
  }
  return out;
}

fuse::FeatureGrid3D fuse_modalities(const fuse::FeatureGrid3D& fp_reg,
                                    const fuse::FeatureGrid3D& fi_reg) {
  check_same_shape(fp_reg, fi_reg, "fuse_modalities");
  fuse::FeatureGrid3D out = fp_reg;
  auto ov = out.values();
  const auto iv = fi_reg.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] += iv[i];
  return out;
}

}  // namespace ovprop::reference
