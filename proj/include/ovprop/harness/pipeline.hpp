#pragma once

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "ovprop/harness/config.hpp"
#include "ovprop/harness/eval.hpp"

namespace ovprop::harness {

struct PipelineResult {
  nlohmann::json manifest;
  std::optional<EvalReport> report;  // absent when no 3D scene was processed
  std::size_t failed_scenes = 0;
};

// Output layout under out_dir:
//   detections/<id>.json          fused 3D detections
//   lifted/<id>.json              raw lifted boxes, plus <id>.skips.json
//   pseudo_labels/<id>.json       pseudo-labels, plus <id>.unmatched.json and
//                                 <id>.predictions.json
//   voxel_features/<id>.bin       when a voxel grid is configured and views
//                                 carry feature files
//   eval_report.json              when at least one 3D scene succeeded
//   manifest.json
// A failing scene is recorded in the manifest with its stage and error; the
// remaining scenes still run. Outputs contain no timestamps or absolute
// paths, so reruns are byte-identical.
PipelineResult run_pipeline(const Config& config, const std::filesystem::path& out_dir);

}  // namespace ovprop::harness
