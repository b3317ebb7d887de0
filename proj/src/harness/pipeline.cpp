#include "ovprop/harness/pipeline.hpp"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "ovprop/errors.hpp"
#include "ovprop/harness/io.hpp"
#include "ovprop/version.hpp"

namespace ovprop::harness {
namespace {

// Raised inside a stage so the manifest can name where a scene failed.
struct StageError {
  std::string stage;
  std::string kind;
  std::string message;
};

template <typename F>
auto run_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw StageError{stage, error_kind(e), e.what()};
  }
}

// Points per voxel, repeated over `channels`. Stands in for the point branch
// features, whose learned backbone is outside this toolkit.
fuse::FeatureGrid3D point_occupancy(const std::vector<geom::Vec3>& points,
                                    const fuse::VoxelGridSpec& grid, int channels) {
  fuse::FeatureGrid3D out(channels, grid.dims);
  for (const auto& p : points) {
    std::array<int, 3> idx{};
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((p[a] - grid.origin[a]) / grid.voxel_size[a]);
      if (!(f >= 0.0 && f < grid.dims[a])) {
        inside = false;
        break;
      }
      idx[a] = static_cast<int>(f);
    }
    if (!inside) continue;
    for (int c = 0; c < channels; ++c) out.at(c, idx[0], idx[1], idx[2]) += 1.0;
  }
  return out;
}

Json skips_to_json(const std::vector<lift::SkipRecord>& skips) {
  Json out = Json::array();
  for (const auto& s : skips) {
    out.push_back({{"view", s.view}, {"det_index", s.det_index}, {"reason", s.reason}});
  }
  return out;
}

Json unmatched_to_json(const std::vector<pseudo::UnmatchedGt>& unmatched) {
  Json out = Json::array();
  for (const auto& u : unmatched) out.push_back({{"gt_index", u.gt_index}, {"reason", u.reason}});
  return out;
}

Json error_record(const std::string& id, const std::string& kind_name, const StageError& e) {
  return {{"id", id},
          {"kind", kind_name},
          {"status", "error"},
          {"stage", e.stage},
          {"error", {{"kind", e.kind}, {"message", e.message}}}};
}

}  // namespace

PipelineResult run_pipeline(const Config& config, const std::filesystem::path& out_dir) {
  config.validate();
  for (const char* sub : {"detections", "lifted", "pseudo_labels", "voxel_features"}) {
    fs::create_directories(out_dir / sub);
  }

  PipelineResult result;
  Json scene_records = Json::array();
  Json notices = Json::array();
  std::set<std::string> seen_ids;
  std::vector<Scene> eval_scenes;
  std::vector<std::vector<boxes::Detection>> eval_dets;

  const auto claim_id = [&](const std::string& id) {
    if (!seen_ids.insert(id).second) throw InvalidArgument("duplicate scene id '" + id + "'");
  };

  for (const auto& entry : config.scenes) {
    std::string id = entry.scene;
    try {
      const fs::path scene_path = config.resolve(entry.scene);
      Scene scene = run_stage("load", [&] {
        Scene s = load_scene(scene_path);
        if (s.kind != SceneKind::detection3d) throw InvalidArgument("expected a 3D scene");
        return s;
      });
      id = scene.id;
      run_stage("load", [&] { claim_id(id); });
      const auto dets2d = run_stage("load", [&] {
        auto d = dets2d_from_json(read_json(config.resolve(entry.dets2d)));
        if (d.size() != scene.views.size()) {
          throw FormatError("2D detections have " + std::to_string(d.size()) + " views, scene has " +
                            std::to_string(scene.views.size()));
        }
        return d;
      });
      const auto model_dets = run_stage("load", [&] {
        return entry.model_dets ? detections_from_json(read_json(config.resolve(*entry.model_dets)))
                                : std::vector<boxes::Detection>{};
      });

      const auto cameras = scene.cameras();
      const auto lifted = run_stage(
          "lift", [&] { return lift::lift_detections(scene.cloud, cameras, dets2d, config.lift); });
      const auto fused = run_stage("fuse", [&] {
        return lift::fuse_inference(model_dets, lifted.detections, config.fusion);
      });

      Json record = {{"id", id}, {"kind", "3d"}, {"status", "ok"}};
      record["lifted"] = lifted.detections.size();
      record["skipped"] = lifted.skipped.size();
      record["detections"] = fused.size();

      run_stage("voxel", [&] {
        bool any_features = false;
        for (const auto& v : scene.views) any_features = any_features || v.features_path.has_value();
        if (!config.voxel_grid || !any_features) return;
        const auto& grid = *config.voxel_grid;
        std::vector<fuse::FeatureGrid3D> per_view;
        for (const auto& v : scene.views) {
          if (!v.features_path) continue;
          const auto feat = read_feature_grid_2d(scene_path.parent_path() / *v.features_path);
          const auto map = fuse::build_projection_map(grid, v.camera, {feat.height(), feat.width()});
          per_view.push_back(fuse::resample_to_voxels(feat, map));
        }
        const auto image_feat = fuse::sum_multiview(per_view);
        const auto point_feat = point_occupancy(scene.cloud.points, grid, image_feat.channels());
        const auto modality = fuse::select_modality(config.modality, scene_seed(config.seed, id));
        fuse::FeatureGrid3D selected;
        switch (modality) {
          case fuse::Modality::multimodal: selected = fuse::fuse_modalities(point_feat, image_feat); break;
          case fuse::Modality::points_only: selected = point_feat; break;
          case fuse::Modality::images_only: selected = image_feat; break;
        }
        write_feature_grid(out_dir / "voxel_features" / (id + ".bin"), selected);
        record["modality"] = std::string(fuse::to_string(modality));
      });

      run_stage("write", [&] {
        write_json_atomic(out_dir / "detections" / (id + ".json"), detections_to_json(fused));
        write_json_atomic(out_dir / "lifted" / (id + ".json"), detections_to_json(lifted.detections));
        write_json_atomic(out_dir / "lifted" / (id + ".skips.json"), skips_to_json(lifted.skipped));
      });
      scene_records.push_back(record);
      eval_scenes.push_back(std::move(scene));
      eval_dets.push_back(fused);
    } catch (const StageError& e) {
      scene_records.push_back(error_record(id, "3d", e));
      ++result.failed_scenes;
    }
  }

  for (const auto& entry : config.image_only) {
    std::string id = entry.scene;
    try {
      const Scene scene = run_stage("load", [&] {
        Scene s = load_scene(config.resolve(entry.scene));
        if (s.views.empty()) throw InvalidArgument("image-only scene has no view");
        return s;
      });
      id = scene.id;
      run_stage("load", [&] { claim_id(id); });
      const auto preds = run_stage("predict", [&] {
        if (entry.predictions) {
          return agnostic_predictions_from_json(read_json(config.resolve(*entry.predictions)));
        }
        std::vector<boxes::Box3D> hidden;
        for (const auto& g : gt3d_from_json(read_json(config.resolve(*entry.oracle)))) {
          hidden.push_back(g.box);
        }
        return pseudo::simulate_agnostic_predictions(hidden, scene.views.front().camera, config.noise,
                                                     scene_seed(config.seed, id));
      });
      const auto labels = run_stage("match", [&] {
        std::vector<pseudo::AnnotatedBox> gt;
        for (const auto& g : scene.gt2d.front()) gt.push_back({g.class_id, g.box});
        return pseudo::make_pseudo_labels(gt, preds, config.pseudo_max_cost);
      });
      run_stage("write", [&] {
        Json out = Json::array();
        for (const auto& p : labels.labels) out.push_back(pseudo_label_to_json(p));
        const fs::path dir = out_dir / "pseudo_labels";
        write_json_atomic(dir / (id + ".json"), out);
        write_json_atomic(dir / (id + ".unmatched.json"), unmatched_to_json(labels.unmatched));
        write_json_atomic(dir / (id + ".predictions.json"), agnostic_predictions_to_json(preds));
      });
      scene_records.push_back({{"id", id},
                               {"kind", "2d"},
                               {"status", "ok"},
                               {"predictions", preds.size()},
                               {"pseudo_labels", labels.labels.size()},
                               {"unmatched", labels.unmatched.size()}});
    } catch (const StageError& e) {
      scene_records.push_back(error_record(id, "2d", e));
      ++result.failed_scenes;
    }
  }

  Json eval_status = nullptr;
  if (eval_scenes.empty()) {
    notices.push_back("evaluation skipped: no 3D scene was processed");
  } else {
    try {
      result.report = evaluate(eval_dets, eval_scenes, config.eval);
      write_json_atomic(out_dir / "eval_report.json", eval_report_to_json(*result.report));
      eval_status = "ok";
    } catch (const std::exception& e) {
      eval_status = {{"stage", "eval"}, {"error", {{"kind", error_kind(e)}, {"message", e.what()}}}};
    }
  }

  Json manifest;
  manifest["tool"] = "ovprop";
  manifest["version"] = kVersion;
  manifest["seed"] = config.seed;
  manifest["config_hash"] = config_hash(config);
  manifest["config"] = config_to_json(config);
  manifest["scenes"] = scene_records;
  manifest["evaluation"] = eval_status;
  manifest["notices"] = notices;
  write_json_atomic(out_dir / "manifest.json", manifest);
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace ovprop::harness
