#pragma once

// File formats. Metadata is JSON; point clouds and feature grids are flat
// little-endian float32 blobs.
//
//   camera record   {height, width, intrinsics?: [fx,fy,px,py], extrinsic_code: [8]}
//   detection       {box3d: [cx,cy,cz,l,w,h,yaw], box2d?: [x1,y1,x2,y2], class_id, score, source}
//   pseudo-label    detection record + {branch: "noisy", match_iou}
//   2D detections   [[{box2d, class_id, score}, ...] per view]
//   feature grid    one JSON header line {"C","H","W"} or {"C","X","Y","Z"}, '\n',
//                   then C*H*W (or C*X*Y*Z) float32 values
//   scene           see scene_to_json(); the point cloud lives in a sibling
//                   "<id>.points.bin" of xyz float32 triples

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovprop/boxes.hpp"
#include "ovprop/fuse.hpp"
#include "ovprop/harness/eval.hpp"
#include "ovprop/harness/scene.hpp"
#include "ovprop/lift.hpp"
#include "ovprop/pseudo.hpp"

namespace ovprop::harness {

using Json = nlohmann::json;
namespace fs = std::filesystem;

// Reading helpers throw FormatError with the offending key in the message.
Json read_json(const fs::path& path);
// Write-temp-then-rename. Output is 2-space indented with a trailing newline.
void write_json_atomic(const fs::path& path, const Json& j);
void write_bytes_atomic(const fs::path& path, const std::string& bytes);

Json box3d_to_json(const boxes::Box3D& b);
boxes::Box3D box3d_from_json(const Json& j);
Json box2d_to_json(const boxes::Box2D& b);
boxes::Box2D box2d_from_json(const Json& j);

Json detection_to_json(const boxes::Detection& d);
boxes::Detection detection_from_json(const Json& j);
Json detections_to_json(const std::vector<boxes::Detection>& dets);
std::vector<boxes::Detection> detections_from_json(const Json& j);

Json dets2d_to_json(const std::vector<std::vector<lift::Detection2D>>& per_view);
std::vector<std::vector<lift::Detection2D>> dets2d_from_json(const Json& j);

Json pseudo_label_to_json(const pseudo::PseudoLabel& p);
Json agnostic_predictions_to_json(const std::vector<pseudo::AgnosticPrediction>& preds);
std::vector<pseudo::AgnosticPrediction> agnostic_predictions_from_json(const Json& j);
Json annotated_boxes_to_json(const std::vector<pseudo::AnnotatedBox>& gt);
std::vector<pseudo::AnnotatedBox> annotated_boxes_from_json(const Json& j);

Json camera_to_json(const View& v);
View camera_from_json(const Json& j);

Json grid_spec_to_json(const fuse::VoxelGridSpec& g);
fuse::VoxelGridSpec grid_spec_from_json(const Json& j);

void write_feature_grid(const fs::path& path, const fuse::FeatureGrid2D& g);
void write_feature_grid(const fs::path& path, const fuse::FeatureGrid3D& g);
fuse::FeatureGrid2D read_feature_grid_2d(const fs::path& path);
fuse::FeatureGrid3D read_feature_grid_3d(const fs::path& path);

std::string encode_points(const std::vector<geom::Vec3>& points);
std::vector<geom::Vec3> decode_points(const std::string& bytes);

// Writes "<dir>/<id>.json" and, when the cloud is non-empty,
// "<dir>/<id>.points.bin". Returns the JSON path.
fs::path save_scene(const Scene& scene, const fs::path& dir);
Scene load_scene(const fs::path& path);

Json scene_to_json(const Scene& scene, const std::string& points_file);

// [{class_id, box3d}]; also the format of image-only oracle files.
Json gt3d_to_json(const std::vector<GtBox3D>& gt);
std::vector<GtBox3D> gt3d_from_json(const Json& j);

// Classes without ground truth carry "ap": null and are listed by name in
// "excluded_classes".
Json eval_report_to_json(const EvalReport& r);

}  // namespace ovprop::harness
