// Serial reference kernels against their OpenMP counterparts. The thread
// count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>

#include "ovprop/reference.hpp"

using namespace ovprop;

namespace {

geom::CameraModel bench_camera() {
  return geom::CameraModel::make(geom::Intrinsics::make(480, 480, 320, 240),
                                 geom::Pose(geom::Mat3::Identity(), geom::Vec3(0, 0, 6)), {480, 640});
}

std::vector<geom::Vec3> bench_points(std::size_t n) {
  std::mt19937_64 eng(1);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<geom::Vec3> pts(n);
  for (auto& p : pts) p = geom::Vec3(u(eng), u(eng), u(eng));
  return pts;
}

std::vector<boxes::Box3D> bench_boxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> c(-3.0, 3.0), s(0.3, 1.5), y(-3.0, 3.0);
  std::vector<boxes::Box3D> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(boxes::Box3D::make(c(eng), c(eng), c(eng), s(eng), s(eng), s(eng), y(eng)));
  }
  return out;
}

fuse::VoxelGridSpec bench_grid(int n) {
  fuse::VoxelGridSpec g;
  g.origin = geom::Vec3(-4, -4, -4);
  g.voxel_size = geom::Vec3::Constant(8.0 / n);
  g.dims = {n, n, n};
  return g;
}

fuse::FeatureGrid2D bench_features() {
  fuse::FeatureGrid2D f(8, 60, 80);
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : f.values()) v = u(eng);
  return f;
}

template <bool Parallel>
void BM_ProjectPoints(benchmark::State& state) {
  const auto pts = bench_points(static_cast<std::size_t>(state.range(0)));
  const auto cam = bench_camera();
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(geom::project_points(pts, cam));
    } else {
      benchmark::DoNotOptimize(reference::project_points(pts, cam));
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <bool Parallel>
void BM_CrossIou3D(benchmark::State& state) {
  const auto a = bench_boxes(static_cast<std::size_t>(state.range(0)), 3);
  const auto b = bench_boxes(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(boxes::cross_iou_3d(a, b));
    } else {
      benchmark::DoNotOptimize(reference::cross_iou_3d(a, b));
    }
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

template <bool Parallel>
void BM_ProjectAndResample(benchmark::State& state) {
  const auto grid = bench_grid(static_cast<int>(state.range(0)));
  const auto cam = bench_camera();
  const auto feat = bench_features();
  for (auto _ : state) {
    if constexpr (Parallel) {
      const auto map = fuse::build_projection_map(grid, cam, {feat.height(), feat.width()});
      benchmark::DoNotOptimize(fuse::resample_to_voxels(feat, map));
    } else {
      const auto map = reference::build_projection_map(grid, cam, {feat.height(), feat.width()});
      benchmark::DoNotOptimize(reference::resample_to_voxels(feat, map));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(grid.voxel_count()));
}

template <bool Parallel>
void BM_SumMultiview(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<fuse::FeatureGrid3D> views(4, fuse::FeatureGrid3D(8, {n, n, n}, 1.0));
  for (auto _ : state) {
    if constexpr (Parallel) {
      benchmark::DoNotOptimize(fuse::sum_multiview(views));
    } else {
      benchmark::DoNotOptimize(reference::sum_multiview(views));
    }
  }
}

}  // namespace

BENCHMARK(BM_ProjectPoints<false>)->Name("project_points/serial")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_ProjectPoints<true>)->Name("project_points/openmp")->Arg(1 << 16)->Arg(1 << 20);
BENCHMARK(BM_CrossIou3D<false>)->Name("cross_iou_3d/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_CrossIou3D<true>)->Name("cross_iou_3d/openmp")->Arg(64)->Arg(256);
BENCHMARK(BM_ProjectAndResample<false>)->Name("project_resample/serial")->Arg(32)->Arg(64);
BENCHMARK(BM_ProjectAndResample<true>)->Name("project_resample/openmp")->Arg(32)->Arg(64);
BENCHMARK(BM_SumMultiview<false>)->Name("sum_multiview/serial")->Arg(32)->Arg(64);
BENCHMARK(BM_SumMultiview<true>)->Name("sum_multiview/openmp")->Arg(32)->Arg(64);

BENCHMARK_MAIN();
