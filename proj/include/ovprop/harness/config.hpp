#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ovprop/fuse.hpp"
#include "ovprop/harness/eval.hpp"
#include "ovprop/harness/synth.hpp"
#include "ovprop/lift.hpp"
#include "ovprop/pseudo.hpp"

namespace ovprop::harness {

// A scene with a point cloud. dets2d is required for lifting; model_dets are
// optional detections from a 3D model that are fused with the lifted ones.
struct SceneEntry {
  std::string scene;
  std::string dets2d;
  std::optional<std::string> model_dets;
};

// A 2D-only scene. Class-agnostic predictions come from `predictions` when
// given, otherwise they are simulated from the 3D boxes in `oracle`.
struct ImageOnlyEntry {
  std::string scene;
  std::optional<std::string> predictions;
  std::optional<std::string> oracle;
};

struct Config {
  std::uint64_t seed = 0;
  lift::LiftParams lift;
  lift::FusionParams fusion;
  double pseudo_max_cost = pseudo::kDefaultMaxCost;
  pseudo::NoiseSpec noise;
  fuse::ModalityProbs modality;
  std::optional<fuse::VoxelGridSpec> voxel_grid;
  EvalParams eval;
  SynthSpec synth;
  std::vector<SceneEntry> scenes;
  std::vector<ImageOnlyEntry> image_only;
  // Entry paths are relative to this directory.
  std::filesystem::path base_dir;

  void validate() const;
  std::filesystem::path resolve(const std::string& relative) const;
};

// Missing sections and keys keep their defaults; unknown keys are rejected
// with FormatError.
Config config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Config load_config(const std::filesystem::path& path);

// Every field, defaults included. base_dir is not part of the record.
nlohmann::json config_to_json(const Config& c);

// FNV-1a 64 over the compact dump of config_to_json, as 16 hex digits.
std::string config_hash(const Config& c);

// Per-scene stream seed derived from the run seed and the scene id.
std::uint64_t scene_seed(std::uint64_t seed, const std::string& id);

}  // namespace ovprop::harness
