#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ovprop/harness/scene.hpp"
#include "ovprop/lift.hpp"

namespace ovprop::harness {

struct SynthSpec {
  int num_objects = 5;
  int num_views = 1;
  double room_size = 8.0;                 // objects are placed in [-room/2, room/2]^2
  double min_size = 0.5;                  // box side lengths, meters
  double max_size = 1.5;
  bool random_yaw = true;
  int points_per_object = 500;            // surface samples; 0 gives an empty cloud
  int background_points = 0;              // uniform clutter outside every box
  double point_noise = 0.0;               // Gaussian sigma per coordinate, meters
  double dropout = 0.0;                   // fraction of object points removed
  double min_gap = 0.6;                   // BEV clearance between objects, meters
  int image_height = 480;
  int image_width = 640;
  double camera_distance = 16.0;          // from the room center, in BEV
  double camera_height = 1.6;
  int max_placement_attempts = 2000;
  std::vector<ClassInfo> vocabulary = default_vocabulary();

  static std::vector<ClassInfo> default_vocabulary();
  void validate() const;
};

// Places non-overlapping boxes, samples surface points, and renders per-view
// 2D ground truth with project_box3d_to_2d (objects whose footprint is
// invalid in a view are absent from that view's list). Deterministic in seed.
// Throws PackingFailure when placement runs out of attempts.
Scene generate_synthetic_scene(const SynthSpec& spec, std::uint64_t seed, const std::string& id);

// Splits a generated scene into its image-only form (first view, no cloud,
// no 3D boxes) and the hidden 3D ground truth used to simulate a
// class-agnostic detector.
struct ImageOnlyScene {
  Scene scene;
  std::vector<GtBox3D> hidden_gt3d;
};
ImageOnlyScene to_image_only(const Scene& scene);

// The 2D ground truth of every view, scored as a stand-in for an external 2D
// open-vocabulary detector.
std::vector<std::vector<lift::Detection2D>> oracle_detections_2d(const Scene& scene, double score);

}  // namespace ovprop::harness
