// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Usage: ovprop_acceptance <path to the ovprop CLI>

#include <Eigen/Geometry>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "ovprop/boxes.hpp"
#include "ovprop/fuse.hpp"
#include "ovprop/geom.hpp"
#include "ovprop/harness/eval.hpp"
#include "ovprop/harness/synth.hpp"
#include "ovprop/lift.hpp"
#include "ovprop/pseudo.hpp"

using namespace ovprop;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1 -------------------------------------------------------------------

Outcome hungarian_optimality() {
  oracle::Gen g(101);
  std::size_t mismatches = 0;
  double solver_seconds = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto m = static_cast<std::size_t>(g.integer(1, 7));
    const auto n = static_cast<std::size_t>(g.integer(1, 7));
    std::vector<std::vector<double>> rows(m, std::vector<double>(n));
    pseudo::CostMatrix cost(m, n);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        rows[r][c] = trial % 4 == 0 ? g.integer(0, 4) / 4.0 : g.uniform(0.0, 1.0);
        cost(r, c) = rows[r][c];
      }
    }
    const auto t0 = Clock::now();
    const auto got = pseudo::hungarian(cost);
    solver_seconds += seconds_since(t0);
    double total = 0.0;  // row order, as in the enumeration
    for (std::size_t r = 0; r < m; ++r) {
      if (got.row_to_col[r]) total += rows[r][*got.row_to_col[r]];
    }
    mismatches += total != oracle::brute_force_assignment(rows).total;
  }
  return {mismatches == 0 && solver_seconds < 5.0,
          fmt("1000 matrices, %zu cost mismatches, solver time %.3f s", mismatches, solver_seconds)};
}

// ---- 2 -------------------------------------------------------------------

Outcome rotated_iou() {
  oracle::Gen g(202);
  std::vector<boxes::Box3D> as, bs;
  for (int i = 0; i < 1000; ++i) {
    as.push_back(g.box(1.0, 0.3, 2.0, true));
    // Second box near the first so most pairs overlap.
    const auto& a = as.back();
    bs.push_back(boxes::Box3D::make(a.cx + g.uniform(-1, 1), a.cy + g.uniform(-1, 1), a.cz + g.uniform(-0.7, 0.7),
                                    g.uniform(0.3, 2.0), g.uniform(0.3, 2.0), g.uniform(0.3, 2.0),
                                    g.uniform(-pi, pi)));
  }
  double worst_mc = 0.0;
#pragma omp parallel for schedule(dynamic) reduction(max : worst_mc)
  for (int i = 0; i < 1000; ++i) {
    const double mc = oracle::monte_carlo_iou_in_a(as[i], bs[i], 10'000'000, 1000 + i);
    worst_mc = std::max(worst_mc, std::abs(boxes::iou_3d(as[i], bs[i]) - mc));
  }
  double worst_aligned = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = g.box(1.0, 0.3, 2.0, false);
    const auto b = g.box(1.0, 0.3, 2.0, false);
    worst_aligned = std::max(worst_aligned, std::abs(boxes::iou_3d(a, b) - oracle::interval_iou(a, b)));
  }
  return {worst_mc <= 5e-3 && worst_aligned <= 1e-12,
          fmt("max |iou - MC(1e7)| = %.2e over 1000 pairs; max yaw=0 deviation = %.2e", worst_mc, worst_aligned)};
}

// ---- 3 -------------------------------------------------------------------

Outcome extrinsic_round_trip() {
  oracle::Gen g(303);
  double worst = 0.0;
  std::size_t translation_mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const double theta = g.uniform(1e-4, pi - 1e-4);
    const geom::Mat3 r = Eigen::AngleAxisd(theta, g.direction()).toRotationMatrix();
    const geom::Vec3 t(g.uniform(-20, 20), g.uniform(-20, 20), g.uniform(-20, 20));
    const geom::Pose back = geom::decode_extrinsics(geom::encode_extrinsics(geom::Pose(r, t)));
    worst = std::max(worst, (back.rotation() - r).norm());
    translation_mismatches += back.translation() != t;
  }
  return {worst < 1e-9 && translation_mismatches == 0,
          fmt("10000 poses, max Frobenius error %.2e, %zu translation mismatches", worst, translation_mismatches)};
}

// ---- 4 -------------------------------------------------------------------

// Greedy same-class matching at IoU >= 0.25; a lower bound on the optimal
// matched count.
std::size_t matched_ground_truth(const std::vector<harness::GtBox3D>& gt, const std::vector<boxes::Detection>& dets) {
  std::vector<bool> used(dets.size(), false);
  std::size_t hits = 0;
  for (const auto& g : gt) {
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (!used[j] && dets[j].class_id == g.class_id && boxes::iou_3d(g.box, dets[j].box3d) >= 0.25) {
        used[j] = true;
        ++hits;
        break;
      }
    }
  }
  return hits;
}

double lifting_recall(double point_noise) {
  harness::SynthSpec spec;
  spec.num_objects = 5;
  spec.points_per_object = 300;
  spec.point_noise = point_noise;
  const lift::LiftParams params;
  std::size_t total = 0, hits = 0;
  for (int s = 0; s < 100; ++s) {
    const auto scene = harness::generate_synthetic_scene(spec, 4000 + s, "scene");
    const auto dets2d = harness::oracle_detections_2d(scene, 1.0);
    const auto cameras = scene.cameras();
    const auto lifted = lift::lift_detections(scene.cloud, cameras, dets2d, params);
    total += scene.gt3d.size();
    hits += matched_ground_truth(scene.gt3d, lifted.detections);
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

Outcome lifting() {
  const auto t0 = Clock::now();
  const double clean = lifting_recall(0.0);
  const double noisy = lifting_recall(0.05);
  const double secs = seconds_since(t0);
  return {clean >= 0.95 && noisy >= 0.85 && secs < 30.0,
          fmt("recall %.4f (zero noise), %.4f (sigma 0.05), %.2f s for 200 scenes", clean, noisy, secs)};
}

// ---- 5 -------------------------------------------------------------------

struct LabelStats {
  std::size_t labels = 0, correct = 0, exact_boxes = 0, annotated = 0;
};

LabelStats pseudo_label_run(const pseudo::NoiseSpec& noise) {
  harness::SynthSpec spec;
  LabelStats st;
  for (int s = 0; s < 100; ++s) {
    const auto split = harness::to_image_only(harness::generate_synthetic_scene(spec, 5000 + s, "image"));
    std::vector<boxes::Box3D> hidden;
    for (const auto& h : split.hidden_gt3d) hidden.push_back(h.box);
    const auto preds =
        pseudo::simulate_agnostic_predictions(hidden, split.scene.views[0].camera, noise, 9000 + s);
    std::vector<pseudo::AnnotatedBox> gt;
    for (const auto& g : split.scene.gt2d[0]) gt.push_back({g.class_id, g.box});
    st.annotated += gt.size();
    for (const auto& l : pseudo::make_pseudo_labels(gt, preds).labels) {
      ++st.labels;
      const auto origin = preds[l.pred_index].origin;
      if (!origin) continue;  // a spurious box can never carry the right class
      const auto& truth = split.hidden_gt3d[*origin];
      st.correct += truth.class_id == l.class_id;
      st.exact_boxes += truth.box == l.box3d;
    }
  }
  return st;
}

Outcome pseudo_labeling() {
  const auto clean = pseudo_label_run(pseudo::NoiseSpec{});
  pseudo::NoiseSpec noisy;
  noisy.spurious_rate = 0.2;
  noisy.drop_prob = 0.1;
  const auto rough = pseudo_label_run(noisy);
  const double accuracy = rough.labels ? static_cast<double>(rough.correct) / rough.labels : 0.0;
  const bool clean_ok = clean.labels == clean.annotated && clean.correct == clean.labels &&
                        clean.exact_boxes == clean.labels;
  return {clean_ok && accuracy >= 0.95,
          fmt("zero noise: %zu/%zu annotated boxes labeled, %zu correct, %zu bitwise boxes; "
              "noisy class accuracy %.4f over %zu pairs",
              clean.labels, clean.annotated, clean.correct, clean.exact_boxes, accuracy, rough.labels)};
}

// ---- 6 -------------------------------------------------------------------

Outcome loss_calculus() {
  oracle::Gen g(606);
  double worst_rel = 0.0;
  for (int i = 0; i < 1000; ++i) {
    fuse::LossInputs x{g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2),
                       g.uniform(-3, 3)};
    // Richardson-extrapolated central differences.
    const auto central = [&](double h) {
      auto lo = x, hi = x;
      lo.mu -= h;
      hi.mu += h;
      return (fuse::total_loss(hi) - fuse::total_loss(lo)) / (2 * h);
    };
    const double h = 1e-3;
    const double fd = (4 * central(h / 2) - central(h)) / 3;
    const double an = fuse::d_total_loss_d_mu(x);
    worst_rel = std::max(worst_rel, std::abs(fd - an) / std::abs(an));
  }
  double worst_gap = 0.0;
  int outside = 0, far_argmin = 0;
  for (int i = 0; i < 200; ++i) {
    fuse::LossInputs x{g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2), g.uniform(0, 2), 0};
    // Keep the minimizer inside the grid.
    const double target = g.uniform(-4.5, 4.5);
    const double sum = std::exp(target) / std::numbers::sqrt2;
    x.l1_3d = sum * g.uniform(0, 1);
    x.l1_2d = sum - x.l1_3d;
    const double mu_star = fuse::optimal_mu(x);
    if (mu_star < -5 || mu_star > 5) ++outside;
    double grid_min = INFINITY, grid_arg = 0.0;
    for (int k = 0; k <= 10000; ++k) {
      x.mu = -5.0 + k * 1e-3;
      const double v = fuse::total_loss(x);
      if (v < grid_min) grid_min = v, grid_arg = x.mu;
    }
    x.mu = mu_star;
    // Rounding allowance of a few ulps on L; the grid argmin must be the
    // lattice point next to mu*.
    worst_gap = std::max(worst_gap, fuse::total_loss(x) - grid_min - 4e-16 * std::abs(grid_min));
    far_argmin += std::abs(grid_arg - mu_star) > 1e-3;
  }
  return {worst_rel <= 1e-6 && worst_gap <= 0.0 && outside == 0 && far_argmin == 0,
          fmt("max relative derivative error %.2e over 1000 inputs; L(mu*) - grid min <= %.2e over 200 inputs",
              worst_rel, worst_gap)};
}

// ---- 7 -------------------------------------------------------------------

Outcome resampling() {
  oracle::Gen g(707);
  double worst = 0.0;
  std::size_t valid_total = 0;
  int empty_configs = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const geom::Vec3 target(g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1));
    const geom::Vec3 eye = target + g.direction() * g.uniform(4, 9);
    const geom::Vec3 fwd = (target - eye).normalized();
    geom::Vec3 up = geom::Vec3::UnitZ();
    if (std::abs(fwd.dot(up)) > 0.95) up = geom::Vec3::UnitX();
    const geom::Vec3 right = fwd.cross(up).normalized();
    geom::Mat3 r;
    r.row(0) = right.transpose();
    r.row(1) = fwd.cross(right).transpose();
    r.row(2) = fwd.transpose();
    const int h = g.integer(60, 300), w = g.integer(60, 300);
    const auto cam = geom::CameraModel::make(
        geom::Intrinsics::make(g.uniform(50, 300), g.uniform(50, 300), g.uniform(0.3, 0.7) * w, g.uniform(0.3, 0.7) * h),
        geom::Pose(r, -(r * eye)), {h, w});
    fuse::VoxelGridSpec grid;
    grid.voxel_size = geom::Vec3(g.uniform(0.05, 0.3), g.uniform(0.05, 0.3), g.uniform(0.05, 0.3));
    grid.dims = {g.integer(5, 20), g.integer(5, 20), g.integer(5, 20)};
    grid.origin = target - 0.5 * grid.voxel_size.cwiseProduct(
                                     geom::Vec3(grid.dims[0], grid.dims[1], grid.dims[2]));
    const geom::ImageSize fs{g.integer(10, 200), g.integer(10, 200)};
    const int channels = g.integer(1, 3);
    std::vector<std::array<double, 3>> coef(channels);
    fuse::FeatureGrid2D feat(channels, fs.height, fs.width);
    for (int c = 0; c < channels; ++c) {
      coef[c] = {g.uniform(-3, 3), g.uniform(-3, 3), g.uniform(-10, 10)};
      for (int y = 0; y < fs.height; ++y) {
        for (int x = 0; x < fs.width; ++x) feat.at(c, y, x) = coef[c][0] * x + coef[c][1] * y + coef[c][2];
      }
    }
    const auto map = fuse::build_projection_map(grid, cam, fs);
    const auto out = fuse::resample_to_voxels(feat, map);
    std::size_t valid = 0;
    for (int x = 0; x < grid.dims[0]; ++x) {
      for (int y = 0; y < grid.dims[1]; ++y) {
        for (int z = 0; z < grid.dims[2]; ++z) {
          // Independent projection through K [R | t] in homogeneous form.
          geom::Mat3 k;
          k << cam.intrinsics.fx, 0, cam.intrinsics.px, 0, cam.intrinsics.fy, cam.intrinsics.py, 0, 0, 1;
          const geom::Vec3 pc = r * (grid.center(x, y, z) - eye);
          const geom::Vec3 hp = k * pc;
          const double fu = (hp.x() / hp.z() + 0.5) * fs.width / w - 0.5;
          const double fv = (hp.y() / hp.z() + 0.5) * fs.height / h - 0.5;
          const std::size_t i = (static_cast<std::size_t>(x) * grid.dims[1] + y) * grid.dims[2] + z;
          if (!map.samples[i].valid) continue;
          ++valid;
          for (int c = 0; c < channels; ++c) {
            const double want = coef[c][0] * fu + coef[c][1] * fv + coef[c][2];
            worst = std::max(worst, std::abs(out.at(c, x, y, z) - want));
          }
        }
      }
    }
    valid_total += valid;
    empty_configs += valid == 0;
  }
  return {worst <= 1e-6 && empty_configs == 0,
          fmt("20 configurations, %zu valid voxels, max deviation %.2e, %d configurations without valid voxels",
              valid_total, worst, empty_configs)};
}

// ---- 8 -------------------------------------------------------------------

Outcome evaluation() {
  using boxes::Box3D;
  using boxes::Detection;
  harness::Scene scene;
  scene.id = "fixture";
  scene.vocabulary = {{"chair", harness::Split::base}};
  const auto gt_box = Box3D::make(0, 0, 0.5, 1, 1, 1, 0);
  const auto far_box = Box3D::make(5, 5, 0.5, 1, 1, 1, 0);
  scene.gt3d = {{0, gt_box}};
  const std::vector<harness::Scene> scenes{scene};
  const auto ap = [&](std::vector<Detection> dets, harness::Interpolation mode) {
    const std::vector<std::vector<Detection>> per_scene{std::move(dets)};
    harness::EvalParams p;
    p.interpolation = mode;
    return harness::evaluate(per_scene, scenes, p).per_class[0].ap.value();
  };
  const Detection tp{gt_box, std::nullopt, 0, 0.9, boxes::Source::model};
  const Detection fp_low{far_box, std::nullopt, 0, 0.5, boxes::Source::model};
  const Detection fp_high{far_box, std::nullopt, 0, 0.95, boxes::Source::model};
  const auto c = harness::Interpolation::continuous;
  const double single = ap({tp}, c);
  const double tp_fp = ap({tp, fp_low}, c);
  const double fp_tp = ap({tp, fp_high}, c);
  const double eleven = ap({tp}, harness::Interpolation::eleven_point);
  return {single == 1.0 && tp_fp == 1.0 && fp_tp == 0.5 && eleven == single,
          fmt("single %.17g, TP then FP %.17g, FP then TP %.17g, eleven-point single %.17g", single, tp_fp, fp_tp,
              eleven)};
}

// ---- 9 -------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] = {std::istreambuf_iterator<char>(in), {}};
  }
  return out;
}

int run(const std::string& cmd) { return std::system((cmd + " > /dev/null").c_str()); }

Outcome determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / "ovprop_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream base(root / "base.json");
    base << R"({"seed": 7, "pseudo": {"noise": {"center_sigma": 0.05, "spurious_rate": 0.2, "drop_prob": 0.1}}})";
  }
  const std::string q = "'" + cli + "'";
  const std::string w = "'" + root.string() + "'";
  if (run(q + " --config " + w + "/base.json --out-dir " + w + "/work synth --scenes 6 --image-only 3 "
              "--feature-channels 2") != 0) {
    return {false, "synth command failed"};
  }
  for (const auto& [dir, threads] : {std::pair{"run_a", "1"}, std::pair{"run_b", "4"}}) {
    if (run(q + " --config " + w + "/work/pipeline.json --threads " + threads + " --out-dir " + w + "/" + dir +
            " pipeline") != 0) {
      return {false, std::string("pipeline command failed for ") + dir};
    }
  }
  const auto a = snapshot(root / "run_a");
  const auto b = snapshot(root / "run_b");
  std::size_t differing = 0;
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    differing += it == b.end() || it->second != bytes;
  }
  differing += b.size() > a.size() ? b.size() - a.size() : 0;
  return {!a.empty() && differing == 0 && a.count("manifest.json") && a.count("eval_report.json"),
          fmt("%zu output files compared across two runs (1 and 4 threads), %zu differ", a.size(), differing)};
}

// ---- 10 ------------------------------------------------------------------

std::vector<boxes::Detection> same_class(const std::vector<boxes::Detection>& d, int c) {
  std::vector<boxes::Detection> out;
  for (const auto& x : d) {
    if (x.class_id == c) out.push_back(x);
  }
  return out;
}

Outcome nms_contract() {
  oracle::Gen g(1010);
  std::size_t overlap_violations = 0, idempotence_violations = 0, isolation_violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = g.integer(0, 30);
    const double thr = g.uniform(0.05, 0.9);
    std::vector<boxes::Detection> pool;
    for (int i = 0; i < n; ++i) {
      const double score = trial % 3 == 0 ? g.integer(0, 4) / 4.0 : g.uniform(0, 1);  // ties on some pools
      pool.push_back({g.box(1.5, 0.3, 1.5, true), std::nullopt, g.integer(0, 3), score, boxes::Source::model});
    }
    const auto kept = boxes::nms_3d_per_class(pool, thr);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) {
        overlap_violations +=
            kept[i].class_id == kept[j].class_id && boxes::iou_3d(kept[i].box3d, kept[j].box3d) > thr;
      }
    }
    idempotence_violations += boxes::nms_3d_per_class(kept, thr) != kept;
    const auto agnostic = boxes::nms_3d(pool, thr);
    idempotence_violations += boxes::nms_3d(agnostic, thr) != agnostic;
    for (std::size_t i = 0; i < agnostic.size(); ++i) {
      for (std::size_t j = i + 1; j < agnostic.size(); ++j) {
        overlap_violations += boxes::iou_3d(agnostic[i].box3d, agnostic[j].box3d) > thr;
      }
    }
    for (int c = 0; c <= 3; ++c) {
      isolation_violations += same_class(kept, c) != boxes::nms_3d(same_class(pool, c), thr);
    }
  }
  return {overlap_violations == 0 && idempotence_violations == 0 && isolation_violations == 0,
          fmt("10000 pools: %zu overlap, %zu idempotence, %zu isolation violations", overlap_violations,
              idempotence_violations, isolation_violations)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <ovprop cli>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"hungarian optimality", hungarian_optimality},
      {"rotated 3D IoU", rotated_iou},
      {"extrinsic round trip", extrinsic_round_trip},
      {"lifting recall", lifting},
      {"pseudo-label fidelity", pseudo_labeling},
      {"loss calculus", loss_calculus},
      {"resampling exactness", resampling},
      {"evaluation fixtures", evaluation},
      {"pipeline determinism", [&] { return determinism(cli); }},
      {"NMS contract", nms_contract},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
