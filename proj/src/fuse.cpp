#include "ovprop/fuse.hpp"

#include <cmath>
#include <numbers>

#include "ovprop/detail/voxel_sample.hpp"
#include "ovprop/errors.hpp"

namespace ovprop::fuse {
namespace {

void check_grid_shape(int channels, std::array<int, 3> dims) {
  if (channels < 1 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw InvalidArgument("feature grid: channels and dims must be >= 1");
  }
}

void check_same_shape(const FeatureGrid3D& a, const FeatureGrid3D& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": grid shape mismatch");
}

FeatureGrid3D add(const FeatureGrid3D& a, const FeatureGrid3D& b) {
  FeatureGrid3D out(a.channels(), a.dims());
  const auto av = a.values();
  const auto bv = b.values();
  auto ov = out.values();
  const auto n = static_cast<std::ptrdiff_t>(ov.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
  return out;
}

}  // namespace

void VoxelGridSpec::validate() const {
  if (!origin.allFinite() || !voxel_size.allFinite()) {
    throw InvalidArgument("voxel grid: non-finite origin or voxel size");
  }
  if (!(voxel_size.array() > 0.0).all()) {
    throw InvalidArgument("voxel grid: voxel size must be positive");
  }
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    throw InvalidArgument("voxel grid: dims must be >= 1");
  }
}

std::size_t VoxelGridSpec::voxel_count() const {
  return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
}

geom::Vec3 VoxelGridSpec::center(int x, int y, int z) const {
  return geom::Vec3(origin.x() + (x + 0.5) * voxel_size.x(),
                    origin.y() + (y + 0.5) * voxel_size.y(),
                    origin.z() + (z + 0.5) * voxel_size.z());
}

FeatureGrid2D::FeatureGrid2D(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw InvalidArgument("feature grid: C, H, W must be >= 1");
  }
  values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

FeatureGrid2D::FeatureGrid2D(int channels, int height, int width, std::vector<double> values)
    : FeatureGrid2D(channels, height, width) {
  if (values.size() != values_.size()) {
    throw InvalidArgument("feature grid: value count does not match C*H*W");
  }
  values_ = std::move(values);
}

FeatureGrid3D::FeatureGrid3D(int channels, std::array<int, 3> dims, double fill)
    : channels_(channels), dims_(dims) {
  check_grid_shape(channels, dims);
  values_.assign(static_cast<std::size_t>(channels) * voxel_count(), fill);
}

FeatureGrid3D::FeatureGrid3D(int channels, std::array<int, 3> dims, std::vector<double> values)
    : FeatureGrid3D(channels, dims) {
  if (values.size() != values_.size()) {
    throw InvalidArgument("feature grid: value count does not match C*X*Y*Z");
  }
  values_ = std::move(values);
}

ProjectionMap build_projection_map(const VoxelGridSpec& grid, const geom::CameraModel& camera,
                                   geom::ImageSize feature_size) {
  grid.validate();
  if (feature_size.height < 1 || feature_size.width < 1) {
    throw InvalidArgument("build_projection_map: feature size must be positive");
  }
  ProjectionMap map{grid, feature_size, std::vector<VoxelSample>(grid.voxel_count())};
  const int ny = grid.dims[1];
  const int nz = grid.dims[2];
  const auto n = static_cast<std::ptrdiff_t>(map.samples.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const int z = static_cast<int>(i % nz);
    const int y = static_cast<int>((i / nz) % ny);
    const int x = static_cast<int>(i / (static_cast<std::ptrdiff_t>(nz) * ny));
    map.samples[i] = detail::sample_voxel(camera, grid.center(x, y, z), feature_size);
  }
  return map;
}

FeatureGrid3D resample_to_voxels(const FeatureGrid2D& feat, const ProjectionMap& map) {
  if (feat.height() != map.feature_size.height || feat.width() != map.feature_size.width) {
    throw InvalidArgument("resample_to_voxels: feature size does not match projection map");
  }
  if (map.samples.size() != map.grid.voxel_count()) {
    throw InvalidArgument("resample_to_voxels: malformed projection map");
  }
  FeatureGrid3D out(feat.channels(), map.grid.dims);
  auto ov = out.values();
  const std::size_t voxels = map.samples.size();
  const auto n = static_cast<std::ptrdiff_t>(voxels);
  const int channels = feat.channels();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const VoxelSample& s = map.samples[i];
    if (!s.valid) continue;
    for (int c = 0; c < channels; ++c) {
      ov[static_cast<std::size_t>(c) * voxels + i] = detail::gather(feat, c, s);
    }
  }
  return out;
}

FeatureGrid3D sum_multiview(std::span<const FeatureGrid3D> grids) {
  if (grids.empty()) throw InvalidArgument("sum_multiview: no grids");
  for (const auto& g : grids) check_same_shape(grids[0], g, "sum_multiview");
  FeatureGrid3D out(grids[0].channels(), grids[0].dims());
  auto ov = out.values();
  const auto n = static_cast<std::ptrdiff_t>(ov.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = grids[0].values()[i];
    for (std::size_t g = 1; g < grids.size(); ++g) acc += grids[g].values()[i];
    ov[i] = acc;
  }
  return out;
}

FeatureGrid3D fuse_modalities(const FeatureGrid3D& fp_reg, const FeatureGrid3D& fi_reg) {
  check_same_shape(fp_reg, fi_reg, "fuse_modalities");
  return add(fp_reg, fi_reg);
}

FeatureGrid3D fuse_modalities(const FeatureGrid3D& fp, const FeatureGrid3D& fi,
                              const Regularizer& point_reg, const Regularizer& image_reg) {
  const FeatureGrid3D p = point_reg ? point_reg(fp) : fp;
  const FeatureGrid3D i = image_reg ? image_reg(fi) : fi;
  return fuse_modalities(p, i);
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::multimodal: return "multimodal";
    case Modality::points_only: return "points_only";
    case Modality::images_only: return "images_only";
  }
  return "multimodal";
}

void ModalityProbs::validate() const {
  for (double p : {multimodal, points_only, images_only}) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("modality probabilities must be nonnegative");
    }
  }
  if (std::abs(multimodal + points_only + images_only - 1.0) > 1e-9) {
    throw InvalidArgument("modality probabilities must sum to 1");
  }
}

ModalitySampler::ModalitySampler(const ModalityProbs& probs, std::uint64_t seed)
    : probs_(probs), rng_(seed) {
  probs_.validate();
}

Modality ModalitySampler::next() {
  const double u = rng_.uniform();
  if (u < probs_.multimodal) return Modality::multimodal;
  if (u < probs_.multimodal + probs_.points_only) return Modality::points_only;
  // Guard against the sum falling just short of 1 when images_only is 0.
  if (probs_.images_only == 0.0) {
    return probs_.points_only > 0.0 ? Modality::points_only : Modality::multimodal;
  }
  return Modality::images_only;
}

Modality select_modality(const ModalityProbs& probs, std::uint64_t seed) {
  return ModalitySampler(probs, seed).next();
}

void LossInputs::validate() const {
  for (double v : {l_cls, l1_3d, l1_2d, l_iou3d, l_iou2d}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("loss components must be finite and nonnegative");
    }
  }
  if (!std::isfinite(mu)) throw InvalidArgument("loss: mu must be finite");
}

double total_loss(const LossInputs& in) {
  in.validate();
  return in.l_cls + std::numbers::sqrt2 * std::exp(-in.mu) * (in.l1_3d + in.l1_2d) + in.l_iou3d +
         in.l_iou2d + in.mu;
}

double d_total_loss_d_mu(const LossInputs& in) {
  in.validate();
  return 1.0 - std::numbers::sqrt2 * std::exp(-in.mu) * (in.l1_3d + in.l1_2d);
}

double optimal_mu(const LossInputs& in) {
  in.validate();
  const double a = in.l1_3d + in.l1_2d;
  if (!(a > 0.0)) throw InvalidArgument("optimal_mu: L1 sum must be positive");
  return std::log(std::numbers::sqrt2 * a);
}

}  // namespace ovprop::fuse
