#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ovprop/geom.hpp"
#include "ovprop/rng.hpp"

namespace ovprop::fuse {

// Regular voxel lattice. `origin` is the minimum corner; voxel (i, j, k) has
// its center at origin + (index + 0.5) * voxel_size.
struct VoxelGridSpec {
  geom::Vec3 origin = geom::Vec3::Zero();
  geom::Vec3 voxel_size = geom::Vec3::Ones();
  std::array<int, 3> dims = {1, 1, 1};

  void validate() const;
  std::size_t voxel_count() const;
  geom::Vec3 center(int x, int y, int z) const;
};

// C x H x W, channel-major.
class FeatureGrid2D {
 public:
  FeatureGrid2D() = default;
  FeatureGrid2D(int channels, int height, int width, double fill = 0.0);
  FeatureGrid2D(int channels, int height, int width, std::vector<double> values);

  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane() const { return static_cast<std::size_t>(height_) * width_; }

  double& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  double at(int c, int y, int x) const { return values_[index(c, y, x)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

// C x X x Y x Z, channel-major, z fastest.
class FeatureGrid3D {
 public:
  FeatureGrid3D() = default;
  FeatureGrid3D(int channels, std::array<int, 3> dims, double fill = 0.0);
  FeatureGrid3D(int channels, std::array<int, 3> dims, std::vector<double> values);

  int channels() const { return channels_; }
  const std::array<int, 3>& dims() const { return dims_; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  }
  bool same_shape(const FeatureGrid3D& other) const {
    return channels_ == other.channels_ && dims_ == other.dims_;
  }

  double& at(int c, int x, int y, int z) { return values_[index(c, x, y, z)]; }
  double at(int c, int x, int y, int z) const { return values_[index(c, x, y, z)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const FeatureGrid3D&) const = default;

 private:
  std::size_t index(int c, int x, int y, int z) const {
    return ((static_cast<std::size_t>(c) * dims_[0] + x) * dims_[1] + y) * dims_[2] + z;
  }

  int channels_ = 0;
  std::array<int, 3> dims_ = {0, 0, 0};
  std::vector<double> values_;
};

// Bilinear footprint of one voxel in the feature map. Pixel indices are flat
// (y * W + x). Invalid samples carry zero weights.
struct VoxelSample {
  bool valid = false;
  std::array<std::uint32_t, 4> pixel = {0, 0, 0, 0};
  std::array<double, 4> weight = {0.0, 0.0, 0.0, 0.0};
  geom::PixelProjection projection;  // in camera-image pixels
};

struct ProjectionMap {
  VoxelGridSpec grid;
  geom::ImageSize feature_size;
  std::vector<VoxelSample> samples;  // flat voxel order: x, then y, then z fastest
};

// Voxel centers are projected with geom::project_point. When feature_size
// differs from the camera's image size, pixel coordinates are rescaled with
// centers aligned. A voxel is valid when it is in front of the camera and its
// feature-map coordinate lies within [0, W-1] x [0, H-1]. OpenMP-parallel.
ProjectionMap build_projection_map(const VoxelGridSpec& grid, const geom::CameraModel& camera,
                                   geom::ImageSize feature_size);

// Bilinear gather per valid voxel; invalid voxels are zero. OpenMP-parallel.
FeatureGrid3D resample_to_voxels(const FeatureGrid2D& feat, const ProjectionMap& map);

// Elementwise sum in list order. OpenMP-parallel.
FeatureGrid3D sum_multiview(std::span<const FeatureGrid3D> grids);

using Regularizer = std::function<FeatureGrid3D(const FeatureGrid3D&)>;

// F_M = point features + image features, over already-regularized inputs.
FeatureGrid3D fuse_modalities(const FeatureGrid3D& fp_reg, const FeatureGrid3D& fi_reg);

// Applies each modality's regularizer (identity when empty) before summing.
FeatureGrid3D fuse_modalities(const FeatureGrid3D& fp, const FeatureGrid3D& fi,
                              const Regularizer& point_reg, const Regularizer& image_reg);

enum class Modality { multimodal, points_only, images_only };

std::string_view to_string(Modality m);

struct ModalityProbs {
  double multimodal = 0.5;
  double points_only = 0.25;
  double images_only = 0.25;

  // Nonnegative and summing to 1 within 1e-9.
  void validate() const;
};

// Categorical sampler with its own RNG state.
class ModalitySampler {
 public:
  ModalitySampler(const ModalityProbs& probs, std::uint64_t seed);
  Modality next();

 private:
  ModalityProbs probs_;
  Rng rng_;
};

Modality select_modality(const ModalityProbs& probs, std::uint64_t seed);

struct LossInputs {
  double l_cls = 0.0;
  double l1_3d = 0.0;
  double l1_2d = 0.0;
  double l_iou3d = 0.0;
  double l_iou2d = 0.0;
  double mu = 0.0;  // log-uncertainty

  void validate() const;
};

// L = l_cls + sqrt(2) e^-mu (l1_3d + l1_2d) + l_iou3d + l_iou2d + mu
double total_loss(const LossInputs& in);
// dL/dmu = 1 - sqrt(2) e^-mu (l1_3d + l1_2d)
double d_total_loss_d_mu(const LossInputs& in);
// argmin over mu: ln(sqrt(2) (l1_3d + l1_2d)). Requires a positive L1 sum.
double optimal_mu(const LossInputs& in);

}  // namespace ovprop::fuse
