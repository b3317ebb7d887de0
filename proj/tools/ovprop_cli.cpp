// ovprop command-line front end. Every subcommand reads and writes the JSON /
// float32 interchange formats documented in ovprop/harness/io.hpp. Failures
// print {"error": {"kind", "message"}} on stderr and exit nonzero.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "ovprop/errors.hpp"
#include "ovprop/harness/config.hpp"
#include "ovprop/harness/eval.hpp"
#include "ovprop/harness/io.hpp"
#include "ovprop/harness/pipeline.hpp"
#include "ovprop/harness/synth.hpp"
#include "ovprop/rng.hpp"

namespace {

using namespace ovprop;
using namespace ovprop::harness;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out_dir = ".";
  int threads = 0;
};

Config resolve_config(const Globals& g) {
  Config c = g.config.empty() ? config_from_json(Json::object(), fs::current_path())
                              : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  return c;
}

fs::path sidecar(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  p += suffix;
  return p;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

int cmd_synth(const Globals& g, int num_scenes, int num_image_only, double det_score,
              int feature_channels) {
  Config c = resolve_config(g);
  const fs::path out(g.out_dir);
  const fs::path scenes_dir = out / "scenes";
  const fs::path dets_dir = out / "dets2d";
  const fs::path oracle_dir = out / "oracle";
  for (const auto& d : {scenes_dir, dets_dir, oracle_dir}) fs::create_directories(d);

  const auto make_id = [](const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%04d", prefix, i);
    return std::string(buf);
  };
  const int fh = std::max(1, c.synth.image_height / 8);
  const int fw = std::max(1, c.synth.image_width / 8);

  c.scenes.clear();
  c.image_only.clear();
  for (int i = 0; i < num_scenes; ++i) {
    const std::string id = make_id("scene_", i);
    Scene scene = generate_synthetic_scene(c.synth, scene_seed(c.seed, id), id);
    if (feature_channels > 0) {
      // Smooth per-view feature maps: each channel is an affine ramp.
      Rng rng(scene_seed(c.seed, id + "/features"));
      for (std::size_t v = 0; v < scene.views.size(); ++v) {
        fuse::FeatureGrid2D feat(feature_channels, fh, fw);
        for (int ch = 0; ch < feature_channels; ++ch) {
          const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0), k = rng.uniform(-1.0, 1.0);
          for (int y = 0; y < fh; ++y) {
            for (int x = 0; x < fw; ++x) feat.at(ch, y, x) = a * x / fw + b * y / fh + k;
          }
        }
        const std::string name = id + ".view" + std::to_string(v) + ".features.bin";
        write_feature_grid(scenes_dir / name, feat);
        scene.views[v].features_path = name;
      }
    }
    save_scene(scene, scenes_dir);
    write_json_atomic(dets_dir / (id + ".json"), dets2d_to_json(oracle_detections_2d(scene, det_score)));
    c.scenes.push_back({"scenes/" + id + ".json", "dets2d/" + id + ".json", std::nullopt});
  }
  for (int i = 0; i < num_image_only; ++i) {
    const std::string id = make_id("image_", i);
    auto spec = c.synth;
    spec.num_views = std::max(spec.num_views, 1);
    const auto split = to_image_only(generate_synthetic_scene(spec, scene_seed(c.seed, id), id));
    save_scene(split.scene, scenes_dir);
    write_json_atomic(oracle_dir / (id + ".json"), gt3d_to_json(split.hidden_gt3d));
    c.image_only.push_back({"scenes/" + id + ".json", std::nullopt, "oracle/" + id + ".json"});
  }
  if (feature_channels > 0) {
    const double half = 0.5 * c.synth.room_size + 0.5;
    fuse::VoxelGridSpec grid;
    grid.origin = geom::Vec3(-half, -half, 0.0);
    grid.voxel_size = geom::Vec3(0.25, 0.25, 0.25);
    const int n = static_cast<int>(std::ceil(2.0 * half / 0.25));
    grid.dims = {n, n, static_cast<int>(std::ceil((c.synth.max_size + 0.5) / 0.25))};
    c.voxel_grid = grid;
  }
  write_json_atomic(out / "pipeline.json", config_to_json(c));
  std::cout << (out / "pipeline.json").string() << "\n";
  return 0;
}

int cmd_lift(const Globals& g, const std::string& scene_path, const std::string& dets_path,
             const std::string& model_path, const std::string& out_path) {
  const Config c = resolve_config(g);
  const Scene scene = load_scene(scene_path);
  const auto dets2d = dets2d_from_json(read_json(dets_path));
  if (dets2d.size() != scene.views.size()) {
    throw FormatError("2D detections must have one list per scene view");
  }
  const auto cameras = scene.cameras();
  const auto lifted = lift::lift_detections(scene.cloud, cameras, dets2d, c.lift);
  auto out_dets = lifted.detections;
  if (!model_path.empty()) {
    const auto model = detections_from_json(read_json(model_path));
    out_dets = lift::fuse_inference(model, lifted.detections, c.fusion);
  }
  Json skips = Json::array();
  for (const auto& s : lifted.skipped) {
    skips.push_back({{"view", s.view}, {"det_index", s.det_index}, {"reason", s.reason}});
  }
  const fs::path out(out_path);
  ensure_parent(out);
  write_json_atomic(out, detections_to_json(out_dets));
  write_json_atomic(sidecar(out, ".skips.json"), skips);
  return 0;
}

int cmd_pseudo(const Globals& g, const std::string& gt_path, const std::string& preds_path,
               const std::string& out_path) {
  const Config c = resolve_config(g);
  const auto gt = annotated_boxes_from_json(read_json(gt_path));
  const auto preds = agnostic_predictions_from_json(read_json(preds_path));
  const auto result = pseudo::make_pseudo_labels(gt, preds, c.pseudo_max_cost);
  Json labels = Json::array();
  for (const auto& p : result.labels) labels.push_back(pseudo_label_to_json(p));
  Json unmatched = Json::array();
  for (const auto& u : result.unmatched) unmatched.push_back({{"gt_index", u.gt_index}, {"reason", u.reason}});
  const fs::path out(out_path);
  ensure_parent(out);
  write_json_atomic(out, labels);
  write_json_atomic(sidecar(out, ".unmatched.json"), unmatched);
  return 0;
}

int cmd_project(const std::string& grid_path, const std::string& camera_path,
                const std::string& features_path, const std::string& out_path) {
  const auto grid = grid_spec_from_json(read_json(grid_path));
  const View view = camera_from_json(read_json(camera_path));
  const auto feat = read_feature_grid_2d(features_path);
  const auto map = fuse::build_projection_map(grid, view.camera, {feat.height(), feat.width()});
  ensure_parent(out_path);
  write_feature_grid(out_path, fuse::resample_to_voxels(feat, map));
  return 0;
}

int cmd_fuse(const Globals& g, const std::string& points_path, const std::vector<std::string>& image_paths,
             const std::string& modality, const std::string& out_path) {
  const Config c = resolve_config(g);
  const auto fp = read_feature_grid_3d(points_path);
  std::vector<fuse::FeatureGrid3D> views;
  for (const auto& p : image_paths) views.push_back(read_feature_grid_3d(p));
  const auto fi = fuse::sum_multiview(views);
  fuse::Modality m = fuse::Modality::multimodal;
  if (modality == "sample") {
    m = fuse::select_modality(c.modality, c.seed);
  } else if (modality == "points_only") {
    m = fuse::Modality::points_only;
  } else if (modality == "images_only") {
    m = fuse::Modality::images_only;
  }
  const fuse::FeatureGrid3D fused = fuse::fuse_modalities(fp, fi);
  ensure_parent(out_path);
  write_feature_grid(out_path, m == fuse::Modality::multimodal    ? fused
                               : m == fuse::Modality::points_only ? fp
                                                                  : fi);
  std::cout << Json{{"modality", std::string(fuse::to_string(m))}}.dump() << "\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::vector<std::string>& scene_paths,
             const std::vector<std::string>& det_paths, const std::string& interpolation,
             const std::string& out_path) {
  Config c = resolve_config(g);
  if (scene_paths.size() != det_paths.size()) {
    throw InvalidArgument("eval: --scenes and --dets must have the same length");
  }
  if (interpolation == "eleven_point") c.eval.interpolation = Interpolation::eleven_point;
  if (interpolation == "continuous") c.eval.interpolation = Interpolation::continuous;
  std::vector<Scene> scenes;
  std::vector<std::vector<boxes::Detection>> dets;
  for (std::size_t i = 0; i < scene_paths.size(); ++i) {
    scenes.push_back(load_scene(scene_paths[i]));
    dets.push_back(detections_from_json(read_json(det_paths[i])));
  }
  const Json report = eval_report_to_json(evaluate(dets, scenes, c.eval));
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
  } else {
    ensure_parent(out_path);
    write_json_atomic(out_path, report);
  }
  return 0;
}

int cmd_pipeline(const Globals& g) {
  if (g.config.empty()) throw InvalidArgument("pipeline: --config is required");
  const Config c = resolve_config(g);
  const auto result = run_pipeline(c, g.out_dir);
  Json summary = {{"scenes", result.manifest.at("scenes").size()},
                  {"failed", result.failed_scenes},
                  {"out_dir", g.out_dir}};
  if (result.report && result.report->ap_all) summary["ap_all"] = *result.report->ap_all;
  if (result.report) summary["recall"] = result.report->recall;
  std::cout << summary.dump() << "\n";
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ovprop: 2D/3D cycle-modality propagation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Run seed (overrides the config)");
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--threads", g.threads, "OpenMP threads (0 keeps the runtime default)")
      ->check(CLI::NonNegativeNumber);

  int num_scenes = 4, num_image_only = 2, feature_channels = 0;
  double det_score = 1.0;
  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes and a pipeline config");
  synth->add_option("--scenes", num_scenes, "Number of 3D scenes")->check(CLI::NonNegativeNumber);
  synth->add_option("--image-only", num_image_only, "Number of 2D-only scenes")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--det-score", det_score, "Score of the oracle 2D detections")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--feature-channels", feature_channels, "Write per-view feature maps")
      ->check(CLI::NonNegativeNumber);

  std::string scene_path, dets_path, model_path, out_path;
  auto* lift_cmd = app.add_subcommand("lift", "Lift 2D detections into 3D boxes");
  lift_cmd->add_option("--scene", scene_path)->required()->check(CLI::ExistingFile);
  lift_cmd->add_option("--dets2d", dets_path)->required()->check(CLI::ExistingFile);
  lift_cmd->add_option("--model-dets", model_path, "3D model detections to fuse with")
      ->check(CLI::ExistingFile);
  lift_cmd->add_option("--out", out_path)->required();

  std::string gt_path, preds_path;
  auto* pseudo_cmd = app.add_subcommand("pseudo-label", "Match 2D ground truth to agnostic 3D boxes");
  pseudo_cmd->add_option("--gt2d", gt_path)->required()->check(CLI::ExistingFile);
  pseudo_cmd->add_option("--preds", preds_path)->required()->check(CLI::ExistingFile);
  pseudo_cmd->add_option("--out", out_path)->required();

  std::string grid_path, camera_path, features_path;
  auto* project_cmd = app.add_subcommand("project", "Resample a 2D feature map into a voxel grid");
  project_cmd->add_option("--grid", grid_path)->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--camera", camera_path)->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--features", features_path)->required()->check(CLI::ExistingFile);
  project_cmd->add_option("--out", out_path)->required();

  std::string points_path, modality = "multimodal";
  std::vector<std::string> image_paths;
  auto* fuse_cmd = app.add_subcommand("fuse", "Sum per-view voxel features and fuse with points");
  fuse_cmd->add_option("--points", points_path)->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--images", image_paths)->required()->check(CLI::ExistingFile);
  fuse_cmd->add_option("--modality", modality)
      ->check(CLI::IsMember({"multimodal", "points_only", "images_only", "sample"}));
  fuse_cmd->add_option("--out", out_path)->required();

  std::vector<std::string> eval_scenes, eval_dets;
  std::string interpolation;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate 3D detections against scene ground truth");
  eval_cmd->add_option("--scenes", eval_scenes)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--dets", eval_dets)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--interpolation", interpolation)
      ->check(CLI::IsMember({"continuous", "eleven_point"}));
  eval_cmd->add_option("--out", out_path);

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run lifting, pseudo-labeling and evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  if (seed_opt->count() > 0) g.seed = seed_value;
  if (g.threads > 0) omp_set_num_threads(g.threads);

  try {
    if (synth->parsed()) return cmd_synth(g, num_scenes, num_image_only, det_score, feature_channels);
    if (lift_cmd->parsed()) return cmd_lift(g, scene_path, dets_path, model_path, out_path);
    if (pseudo_cmd->parsed()) return cmd_pseudo(g, gt_path, preds_path, out_path);
    if (project_cmd->parsed()) return cmd_project(grid_path, camera_path, features_path, out_path);
    if (fuse_cmd->parsed()) return cmd_fuse(g, points_path, image_paths, modality, out_path);
    if (eval_cmd->parsed()) return cmd_eval(g, eval_scenes, eval_dets, interpolation, out_path);
    if (pipeline_cmd->parsed()) return cmd_pipeline(g);
  } catch (const std::exception& e) {
    print_error(error_kind(e), e.what());
    return 1;
  }
  return 1;
}
