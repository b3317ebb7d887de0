#include "ovprop/harness/config.hpp"

#include <array>
#include <cstdio>
#include <set>
#include <utility>

#include "ovprop/errors.hpp"
#include "ovprop/harness/io.hpp"

namespace ovprop::harness {
namespace {

template <typename E, std::size_t N>
using EnumTable = std::array<std::pair<E, const char*>, N>;

constexpr EnumTable<lift::KeepRule, 2> kKeepRules{
    {{lift::KeepRule::largest, "largest"}, {lift::KeepRule::nearest, "nearest"}}};
constexpr EnumTable<lift::YawMode, 2> kYawModes{
    {{lift::YawMode::zero, "zero"}, {lift::YawMode::bev_min_area, "bev_min_area"}}};
constexpr EnumTable<Interpolation, 2> kInterpolations{
    {{Interpolation::continuous, "continuous"}, {Interpolation::eleven_point, "eleven_point"}}};
constexpr EnumTable<boxes::IoUMode, 2> kIoUModes{
    {{boxes::IoUMode::rotated, "rotated"}, {boxes::IoUMode::axis_aligned, "axis_aligned"}}};

template <typename E, std::size_t N>
std::string enum_name(const EnumTable<E, N>& table, E value) {
  for (const auto& [e, name] : table) {
    if (e == value) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
E enum_value(const EnumTable<E, N>& table, const Json& j, const std::string& key) {
  if (!j.is_string()) throw FormatError("config: '" + key + "' must be a string");
  const auto s = j.get<std::string>();
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  throw FormatError("config: '" + key + "' has unknown value '" + s + "'");
}

void check_keys(const Json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw FormatError("config: '" + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.contains(key)) {
      throw FormatError("config: unknown key '" + key + "' in '" + section + "'");
    }
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError("config: '" + section + "." + key + "': " + e.what());
  }
}

std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_string()) throw FormatError(std::string("config: '") + key + "' must be a path");
  return j.at(key).get<std::string>();
}

Json opt_to_json(const std::optional<std::string>& s) { return s ? Json(*s) : Json(nullptr); }

Json vocabulary_to_json(const std::vector<ClassInfo>& vocab) {
  Json out = Json::array();
  for (const auto& c : vocab) {
    out.push_back({{"name", c.name}, {"split", c.split == Split::base ? "base" : "novel"}});
  }
  return out;
}

std::vector<ClassInfo> vocabulary_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("config: 'synth.vocabulary' must be an array");
  std::vector<ClassInfo> out;
  for (const auto& c : j) {
    check_keys(c, "synth.vocabulary[]", {"name", "split"});
    ClassInfo info;
    read_opt(c, "name", info.name, "synth.vocabulary[]");
    std::string split = "base";
    read_opt(c, "split", split, "synth.vocabulary[]");
    if (split != "base" && split != "novel") {
      throw FormatError("config: class split must be \"base\" or \"novel\"");
    }
    info.split = split == "base" ? Split::base : Split::novel;
    out.push_back(info);
  }
  return out;
}

}  // namespace

void Config::validate() const {
  lift.cluster.validate();
  if (!(lift.min_box_size > 0.0)) throw InvalidArgument("config: lift.min_box_size must be positive");
  fusion.validate();
  if (!(pseudo_max_cost >= 0.0 && pseudo_max_cost <= 1.0)) {
    throw InvalidArgument("config: pseudo.max_cost must lie in [0, 1]");
  }
  if (noise.center_sigma < 0.0 || noise.size_sigma < 0.0 || noise.yaw_sigma < 0.0 ||
      noise.drop_prob < 0.0 || noise.drop_prob > 1.0 || noise.spurious_rate < 0.0 ||
      noise.spurious_margin < 0.0) {
    throw InvalidArgument("config: invalid pseudo.noise settings");
  }
  modality.validate();
  if (voxel_grid) voxel_grid->validate();
  if (!(eval.iou_threshold >= 0.0 && eval.iou_threshold <= 1.0)) {
    throw InvalidArgument("config: eval.iou_threshold must lie in [0, 1]");
  }
  synth.validate();
  for (const auto& e : image_only) {
    if (!e.predictions && !e.oracle) {
      throw InvalidArgument("config: image_only entry '" + e.scene +
                            "' needs 'predictions' or 'oracle'");
    }
  }
}

std::filesystem::path Config::resolve(const std::string& relative) const {
  return base_dir / relative;
}

Config config_from_json(const Json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "<root>", {"seed", "lift", "fusion", "pseudo", "modality", "voxel_grid", "eval",
                           "synth", "scenes", "image_only"});
  Config c;
  c.base_dir = base_dir;
  read_opt(j, "seed", c.seed, "<root>");

  if (j.contains("lift")) {
    const auto& s = j.at("lift");
    check_keys(s, "lift", {"eps", "min_points", "keep", "yaw_mode", "min_box_size"});
    read_opt(s, "eps", c.lift.cluster.eps, "lift");
    read_opt(s, "min_points", c.lift.cluster.min_points, "lift");
    read_opt(s, "min_box_size", c.lift.min_box_size, "lift");
    if (s.contains("keep")) c.lift.cluster.keep = enum_value(kKeepRules, s.at("keep"), "lift.keep");
    if (s.contains("yaw_mode")) {
      c.lift.yaw_mode = enum_value(kYawModes, s.at("yaw_mode"), "lift.yaw_mode");
    }
  }
  if (j.contains("fusion")) {
    const auto& s = j.at("fusion");
    check_keys(s, "fusion", {"score_divisor", "confidence_threshold", "nms_iou"});
    read_opt(s, "score_divisor", c.fusion.score_divisor, "fusion");
    read_opt(s, "confidence_threshold", c.fusion.confidence_threshold, "fusion");
    read_opt(s, "nms_iou", c.fusion.nms_iou, "fusion");
  }
  if (j.contains("pseudo")) {
    const auto& s = j.at("pseudo");
    check_keys(s, "pseudo", {"max_cost", "noise"});
    read_opt(s, "max_cost", c.pseudo_max_cost, "pseudo");
    if (s.contains("noise")) {
      const auto& n = s.at("noise");
      check_keys(n, "pseudo.noise", {"center_sigma", "size_sigma", "yaw_sigma", "drop_prob",
                                     "spurious_rate", "spurious_margin"});
      read_opt(n, "center_sigma", c.noise.center_sigma, "pseudo.noise");
      read_opt(n, "size_sigma", c.noise.size_sigma, "pseudo.noise");
      read_opt(n, "yaw_sigma", c.noise.yaw_sigma, "pseudo.noise");
      read_opt(n, "drop_prob", c.noise.drop_prob, "pseudo.noise");
      read_opt(n, "spurious_rate", c.noise.spurious_rate, "pseudo.noise");
      read_opt(n, "spurious_margin", c.noise.spurious_margin, "pseudo.noise");
    }
  }
  if (j.contains("modality")) {
    const auto& s = j.at("modality");
    check_keys(s, "modality", {"multimodal", "points_only", "images_only"});
    read_opt(s, "multimodal", c.modality.multimodal, "modality");
    read_opt(s, "points_only", c.modality.points_only, "modality");
    read_opt(s, "images_only", c.modality.images_only, "modality");
  }
  if (j.contains("voxel_grid") && !j.at("voxel_grid").is_null()) {
    check_keys(j.at("voxel_grid"), "voxel_grid", {"origin", "voxel_size", "dims"});
    c.voxel_grid = grid_spec_from_json(j.at("voxel_grid"));
  }
  if (j.contains("eval")) {
    const auto& s = j.at("eval");
    check_keys(s, "eval", {"iou_threshold", "interpolation", "iou_mode"});
    read_opt(s, "iou_threshold", c.eval.iou_threshold, "eval");
    if (s.contains("interpolation")) {
      c.eval.interpolation = enum_value(kInterpolations, s.at("interpolation"), "eval.interpolation");
    }
    if (s.contains("iou_mode")) {
      c.eval.iou_mode = enum_value(kIoUModes, s.at("iou_mode"), "eval.iou_mode");
    }
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    check_keys(s, "synth",
               {"num_objects", "num_views", "room_size", "min_size", "max_size", "random_yaw",
                "points_per_object", "background_points", "point_noise", "dropout", "min_gap",
                "image_height", "image_width", "camera_distance", "camera_height",
                "max_placement_attempts", "vocabulary"});
    auto& sp = c.synth;
    read_opt(s, "num_objects", sp.num_objects, "synth");
    read_opt(s, "num_views", sp.num_views, "synth");
    read_opt(s, "room_size", sp.room_size, "synth");
    read_opt(s, "min_size", sp.min_size, "synth");
    read_opt(s, "max_size", sp.max_size, "synth");
    read_opt(s, "random_yaw", sp.random_yaw, "synth");
    read_opt(s, "points_per_object", sp.points_per_object, "synth");
    read_opt(s, "background_points", sp.background_points, "synth");
    read_opt(s, "point_noise", sp.point_noise, "synth");
    read_opt(s, "dropout", sp.dropout, "synth");
    read_opt(s, "min_gap", sp.min_gap, "synth");
    read_opt(s, "image_height", sp.image_height, "synth");
    read_opt(s, "image_width", sp.image_width, "synth");
    read_opt(s, "camera_distance", sp.camera_distance, "synth");
    read_opt(s, "camera_height", sp.camera_height, "synth");
    read_opt(s, "max_placement_attempts", sp.max_placement_attempts, "synth");
    if (s.contains("vocabulary")) sp.vocabulary = vocabulary_from_json(s.at("vocabulary"));
  }
  if (j.contains("scenes")) {
    if (!j.at("scenes").is_array()) throw FormatError("config: 'scenes' must be an array");
    for (const auto& e : j.at("scenes")) {
      check_keys(e, "scenes[]", {"scene", "dets2d", "model_dets"});
      SceneEntry entry;
      entry.scene = opt_string(e, "scene").value_or("");
      entry.dets2d = opt_string(e, "dets2d").value_or("");
      if (entry.scene.empty() || entry.dets2d.empty()) {
        throw FormatError("config: scenes[] entries need 'scene' and 'dets2d'");
      }
      entry.model_dets = opt_string(e, "model_dets");
      c.scenes.push_back(entry);
    }
  }
  if (j.contains("image_only")) {
    if (!j.at("image_only").is_array()) throw FormatError("config: 'image_only' must be an array");
    for (const auto& e : j.at("image_only")) {
      check_keys(e, "image_only[]", {"scene", "predictions", "oracle"});
      ImageOnlyEntry entry;
      entry.scene = opt_string(e, "scene").value_or("");
      if (entry.scene.empty()) throw FormatError("config: image_only[] entries need 'scene'");
      entry.predictions = opt_string(e, "predictions");
      entry.oracle = opt_string(e, "oracle");
      c.image_only.push_back(entry);
    }
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) {
  return config_from_json(read_json(path), path.parent_path());
}

Json config_to_json(const Config& c) {
  Json j;
  j["seed"] = c.seed;
  j["lift"] = {{"eps", c.lift.cluster.eps},
               {"min_points", c.lift.cluster.min_points},
               {"keep", enum_name(kKeepRules, c.lift.cluster.keep)},
               {"yaw_mode", enum_name(kYawModes, c.lift.yaw_mode)},
               {"min_box_size", c.lift.min_box_size}};
  j["fusion"] = {{"score_divisor", c.fusion.score_divisor},
                 {"confidence_threshold", c.fusion.confidence_threshold},
                 {"nms_iou", c.fusion.nms_iou}};
  j["pseudo"] = {{"max_cost", c.pseudo_max_cost},
                 {"noise",
                  {{"center_sigma", c.noise.center_sigma},
                   {"size_sigma", c.noise.size_sigma},
                   {"yaw_sigma", c.noise.yaw_sigma},
                   {"drop_prob", c.noise.drop_prob},
                   {"spurious_rate", c.noise.spurious_rate},
                   {"spurious_margin", c.noise.spurious_margin}}}};
  j["modality"] = {{"multimodal", c.modality.multimodal},
                   {"points_only", c.modality.points_only},
                   {"images_only", c.modality.images_only}};
  j["voxel_grid"] = c.voxel_grid ? grid_spec_to_json(*c.voxel_grid) : Json(nullptr);
  j["eval"] = {{"iou_threshold", c.eval.iou_threshold},
               {"interpolation", enum_name(kInterpolations, c.eval.interpolation)},
               {"iou_mode", enum_name(kIoUModes, c.eval.iou_mode)}};
  const auto& sp = c.synth;
  j["synth"] = {{"num_objects", sp.num_objects},
                {"num_views", sp.num_views},
                {"room_size", sp.room_size},
                {"min_size", sp.min_size},
                {"max_size", sp.max_size},
                {"random_yaw", sp.random_yaw},
                {"points_per_object", sp.points_per_object},
                {"background_points", sp.background_points},
                {"point_noise", sp.point_noise},
                {"dropout", sp.dropout},
                {"min_gap", sp.min_gap},
                {"image_height", sp.image_height},
                {"image_width", sp.image_width},
                {"camera_distance", sp.camera_distance},
                {"camera_height", sp.camera_height},
                {"max_placement_attempts", sp.max_placement_attempts},
                {"vocabulary", vocabulary_to_json(sp.vocabulary)}};
  Json scenes = Json::array();
  for (const auto& e : c.scenes) {
    scenes.push_back({{"scene", e.scene}, {"dets2d", e.dets2d}, {"model_dets", opt_to_json(e.model_dets)}});
  }
  j["scenes"] = scenes;
  Json image_only = Json::array();
  for (const auto& e : c.image_only) {
    image_only.push_back({{"scene", e.scene},
                          {"predictions", opt_to_json(e.predictions)},
                          {"oracle", opt_to_json(e.oracle)}});
  }
  j["image_only"] = image_only;
  return j;
}

std::string config_hash(const Config& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t scene_seed(std::uint64_t seed, const std::string& id) {
  // FNV-1a of the id, then one splitmix64 round over the combination.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ovprop::harness
