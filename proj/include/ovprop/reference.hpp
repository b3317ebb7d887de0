#pragma once

// Serial counterparts of the OpenMP kernels. They share the per-element
// arithmetic with the parallel versions, so outputs must match bitwise for any
// thread count.

#include <span>
#include <vector>

#include "ovprop/boxes.hpp"
#include "ovprop/fuse.hpp"
#include "ovprop/geom.hpp"

namespace ovprop::reference {

std::vector<geom::PixelProjection> project_points(std::span<const geom::Vec3> points,
                                                  const geom::CameraModel& camera);

std::vector<double> cross_iou_3d(std::span<const boxes::Box3D> a, std::span<const boxes::Box3D> b,
                                 boxes::IoUMode mode = boxes::IoUMode::rotated);

fuse::ProjectionMap build_projection_map(const fuse::VoxelGridSpec& grid,
                                         const geom::CameraModel& camera,
                                         geom::ImageSize feature_size);

fuse::FeatureGrid3D resample_to_voxels(const fuse::FeatureGrid2D& feat,
                                       const fuse::ProjectionMap& map);

fuse::FeatureGrid3D sum_multiview(std::span<const fuse::FeatureGrid3D> grids);

fuse::FeatureGrid3D fuse_modalities(const fuse::FeatureGrid3D& fp_reg,
                                    const fuse::FeatureGrid3D& fi_reg);

}  // namespace ovprop::reference
