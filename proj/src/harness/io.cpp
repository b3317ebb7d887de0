#include "ovprop/harness/io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "ovprop/errors.hpp"

namespace ovprop::harness {
namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return field(j, key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

template <std::size_t N>
std::array<double, N> fixed_array(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw FormatError(std::string(what) + ": expected an array of " + std::to_string(N) +
                      " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + ": non-numeric entry");
    out[i] = j[i].get<double>();
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_f32(std::string& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

double read_f32(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  }
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string grid_bytes(const Json& header, std::span<const double> values) {
  std::string out = header.dump() + "\n";
  out.reserve(out.size() + 4 * values.size());
  for (double v : values) append_f32(out, v);
  return out;
}

// Splits a grid file into its header and float payload.
std::pair<Json, std::vector<double>> read_grid(const fs::path& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw FormatError(path.string() + ": missing grid header");
  Json header;
  try {
    header = Json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": bad grid header: " + e.what());
  }
  const std::size_t payload = bytes.size() - nl - 1;
  if (payload % 4 != 0) throw FormatError(path.string() + ": truncated float block");
  std::vector<double> values(payload / 4);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = read_f32(bytes.data() + nl + 1 + 4 * i);
  return {header, std::move(values)};
}

std::string split_name(Split s) { return s == Split::base ? "base" : "novel"; }

Split split_from_string(const std::string& s) {
  if (s == "base") return Split::base;
  if (s == "novel") return Split::novel;
  throw FormatError("unknown class split '" + s + "'");
}

}  // namespace

Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_bytes_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json_atomic(const fs::path& path, const Json& j) {
  write_bytes_atomic(path, j.dump(2) + "\n");
}

Json box3d_to_json(const boxes::Box3D& b) {
  return Json::array({b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw});
}

boxes::Box3D box3d_from_json(const Json& j) {
  const auto v = fixed_array<7>(j, "box3d");
  try {
    return boxes::Box3D::make(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

Json box2d_to_json(const boxes::Box2D& b) { return Json::array({b.x1, b.y1, b.x2, b.y2}); }

boxes::Box2D box2d_from_json(const Json& j) {
  const auto v = fixed_array<4>(j, "box2d");
  try {
    return boxes::Box2D::make(v[0], v[1], v[2], v[3]);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

Json detection_to_json(const boxes::Detection& d) {
  Json j = Json::object();
  j["box3d"] = box3d_to_json(d.box3d);
  if (d.box2d) j["box2d"] = box2d_to_json(*d.box2d);
  j["class_id"] = d.class_id;
  j["score"] = d.score;
  j["source"] = std::string(boxes::to_string(d.source));
  return j;
}

boxes::Detection detection_from_json(const Json& j) {
  boxes::Detection d;
  d.box3d = box3d_from_json(field(j, "box3d"));
  if (j.contains("box2d") && !j.at("box2d").is_null()) d.box2d = box2d_from_json(j.at("box2d"));
  d.class_id = get<int>(j, "class_id");
  d.score = get<double>(j, "score");
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw FormatError("detection score outside [0, 1]");
  d.source = j.contains("source") ? boxes::source_from_string(get<std::string>(j, "source"))
                                  : boxes::Source::model;
  return d;
}

Json detections_to_json(const std::vector<boxes::Detection>& dets) {
  Json arr = Json::array();
  for (const auto& d : dets) arr.push_back(detection_to_json(d));
  return arr;
}

std::vector<boxes::Detection> detections_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("detections file must be an array");
  std::vector<boxes::Detection> out;
  out.reserve(j.size());
  for (const auto& rec : j) out.push_back(detection_from_json(rec));
  return out;
}

Json dets2d_to_json(const std::vector<std::vector<lift::Detection2D>>& per_view) {
  Json arr = Json::array();
  for (const auto& view : per_view) {
    Json v = Json::array();
    for (const auto& d : view) {
      v.push_back({{"box2d", box2d_to_json(d.box2d)}, {"class_id", d.class_id}, {"score", d.score}});
    }
    arr.push_back(std::move(v));
  }
  return arr;
}

std::vector<std::vector<lift::Detection2D>> dets2d_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("2D detections file must be an array of views");
  std::vector<std::vector<lift::Detection2D>> out;
  for (const auto& view : j) {
    if (!view.is_array()) throw FormatError("2D detections: each view must be an array");
    auto& dst = out.emplace_back();
    for (const auto& rec : view) {
      dst.push_back({box2d_from_json(field(rec, "box2d")), get<int>(rec, "class_id"),
                     get<double>(rec, "score")});
    }
  }
  return out;
}

Json pseudo_label_to_json(const pseudo::PseudoLabel& p) {
  return {{"box3d", box3d_to_json(p.box3d)},
          {"box2d", box2d_to_json(p.box2d)},
          {"class_id", p.class_id},
          {"score", p.score},
          {"source", "pseudo"},
          {"branch", pseudo::to_string(p.branch)},
          {"match_iou", p.match_iou}};
}

Json agnostic_predictions_to_json(const std::vector<pseudo::AgnosticPrediction>& preds) {
  Json arr = Json::array();
  for (const auto& p : preds) {
    arr.push_back({{"box3d", box3d_to_json(p.box3d)},
                   {"box2d", box2d_to_json(p.box2d)},
                   {"score", p.score}});
  }
  return arr;
}

std::vector<pseudo::AgnosticPrediction> agnostic_predictions_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("predictions file must be an array");
  std::vector<pseudo::AgnosticPrediction> out;
  for (const auto& rec : j) {
    out.push_back({box3d_from_json(field(rec, "box3d")), box2d_from_json(field(rec, "box2d")),
                   rec.contains("score") ? get<double>(rec, "score") : 1.0, std::nullopt});
  }
  return out;
}

Json annotated_boxes_to_json(const std::vector<pseudo::AnnotatedBox>& gt) {
  Json arr = Json::array();
  for (const auto& g : gt) arr.push_back({{"class_id", g.class_id}, {"box2d", box2d_to_json(g.box2d)}});
  return arr;
}

std::vector<pseudo::AnnotatedBox> annotated_boxes_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("2D ground-truth file must be an array");
  std::vector<pseudo::AnnotatedBox> out;
  for (const auto& rec : j) {
    out.push_back({get<int>(rec, "class_id"), box2d_from_json(field(rec, "box2d"))});
  }
  return out;
}

Json camera_to_json(const View& v) {
  Json j = Json::object();
  j["height"] = v.camera.image_size.height;
  j["width"] = v.camera.image_size.width;
  if (v.explicit_intrinsics) {
    const auto& k = *v.explicit_intrinsics;
    j["intrinsics"] = Json::array({k.fx, k.fy, k.px, k.py});
  }
  j["extrinsic_code"] = Json(v.extrinsic_code);
  if (v.features_path) j["features"] = *v.features_path;
  return j;
}

View camera_from_json(const Json& j) {
  const int height = get<int>(j, "height");
  const int width = get<int>(j, "width");
  std::optional<geom::Intrinsics> k;
  if (j.contains("intrinsics") && !j.at("intrinsics").is_null()) {
    const auto v = fixed_array<4>(j.at("intrinsics"), "intrinsics");
    k = geom::Intrinsics::make(v[0], v[1], v[2], v[3]);
  }
  const auto code = fixed_array<8>(field(j, "extrinsic_code"), "extrinsic_code");
  View view = View::from_record(height, width, k, code);
  if (j.contains("features") && j.at("features").is_string()) {
    view.features_path = j.at("features").get<std::string>();
  }
  return view;
}

Json grid_spec_to_json(const fuse::VoxelGridSpec& g) {
  return {{"origin", {g.origin.x(), g.origin.y(), g.origin.z()}},
          {"voxel_size", {g.voxel_size.x(), g.voxel_size.y(), g.voxel_size.z()}},
          {"dims", g.dims}};
}

fuse::VoxelGridSpec grid_spec_from_json(const Json& j) {
  fuse::VoxelGridSpec g;
  const auto o = fixed_array<3>(field(j, "origin"), "origin");
  const auto s = fixed_array<3>(field(j, "voxel_size"), "voxel_size");
  const auto d = fixed_array<3>(field(j, "dims"), "dims");
  g.origin = geom::Vec3(o[0], o[1], o[2]);
  g.voxel_size = geom::Vec3(s[0], s[1], s[2]);
  for (int i = 0; i < 3; ++i) g.dims[i] = static_cast<int>(d[i]);
  g.validate();
  return g;
}

void write_feature_grid(const fs::path& path, const fuse::FeatureGrid2D& g) {
  const Json header = {{"C", g.channels()}, {"H", g.height()}, {"W", g.width()}};
  write_bytes_atomic(path, grid_bytes(header, g.values()));
}

void write_feature_grid(const fs::path& path, const fuse::FeatureGrid3D& g) {
  const Json header = {
      {"C", g.channels()}, {"X", g.dims()[0]}, {"Y", g.dims()[1]}, {"Z", g.dims()[2]}};
  write_bytes_atomic(path, grid_bytes(header, g.values()));
}

fuse::FeatureGrid2D read_feature_grid_2d(const fs::path& path) {
  auto [header, values] = read_grid(path);
  try {
    return fuse::FeatureGrid2D(get<int>(header, "C"), get<int>(header, "H"), get<int>(header, "W"),
                               std::move(values));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

fuse::FeatureGrid3D read_feature_grid_3d(const fs::path& path) {
  auto [header, values] = read_grid(path);
  try {
    return fuse::FeatureGrid3D(
        get<int>(header, "C"),
        {get<int>(header, "X"), get<int>(header, "Y"), get<int>(header, "Z")}, std::move(values));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string encode_points(const std::vector<geom::Vec3>& points) {
  std::string out;
  out.reserve(12 * points.size());
  for (const auto& p : points) {
    append_f32(out, p.x());
    append_f32(out, p.y());
    append_f32(out, p.z());
  }
  return out;
}

std::vector<geom::Vec3> decode_points(const std::string& bytes) {
  if (bytes.size() % 12 != 0) throw FormatError("point blob is not a whole number of xyz triples");
  std::vector<geom::Vec3> out(bytes.size() / 12);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char* p = bytes.data() + 12 * i;
    out[i] = geom::Vec3(read_f32(p), read_f32(p + 4), read_f32(p + 8));
  }
  return out;
}

Json gt3d_to_json(const std::vector<GtBox3D>& gt) {
  Json out = Json::array();
  for (const auto& g : gt) out.push_back({{"class_id", g.class_id}, {"box3d", box3d_to_json(g.box)}});
  return out;
}

std::vector<GtBox3D> gt3d_from_json(const Json& j) {
  if (!j.is_array()) throw FormatError("3D ground truth must be an array");
  std::vector<GtBox3D> out;
  for (const auto& g : j) out.push_back({get<int>(g, "class_id"), box3d_from_json(field(g, "box3d"))});
  return out;
}

Json eval_report_to_json(const EvalReport& r) {
  const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json classes = Json::array();
  for (const auto& c : r.per_class) {
    classes.push_back({{"class_id", c.class_id},
                       {"name", c.name},
                       {"split", split_name(c.split)},
                       {"num_gt", c.num_gt},
                       {"num_det", c.num_det},
                       {"num_tp", c.num_tp},
                       {"ap", opt(c.ap)}});
  }
  Json excluded = Json::array();
  for (const auto& c : r.per_class) {
    if (!c.ap) excluded.push_back(c.name);
  }
  return {{"iou_threshold", r.params.iou_threshold},
          {"interpolation",
           r.params.interpolation == Interpolation::continuous ? "continuous" : "eleven_point"},
          {"iou_mode", r.params.iou_mode == boxes::IoUMode::rotated ? "rotated" : "axis_aligned"},
          {"ap_base", opt(r.ap_base)},
          {"ap_novel", opt(r.ap_novel)},
          {"ap_all", opt(r.ap_all)},
          {"recall", r.recall},
          {"num_gt", r.num_gt},
          {"num_tp", r.num_tp},
          {"per_class", classes},
          {"excluded_classes", excluded}};
}

Json scene_to_json(const Scene& scene, const std::string& points_file) {
  Json j = Json::object();
  j["id"] = scene.id;
  j["kind"] = scene.kind == SceneKind::detection3d ? "3d" : "2d";
  if (scene.cloud.points.empty()) {
    j["points"] = nullptr;
  } else {
    j["points"] = {{"file", points_file}, {"count", scene.cloud.points.size()}};
  }
  Json vocab = Json::array();
  for (const auto& c : scene.vocabulary) vocab.push_back({{"name", c.name}, {"split", split_name(c.split)}});
  j["vocabulary"] = std::move(vocab);
  Json views = Json::array();
  for (const auto& v : scene.views) views.push_back(camera_to_json(v));
  j["views"] = std::move(views);
  j["gt3d"] = gt3d_to_json(scene.gt3d);
  Json gt2d = Json::array();
  for (const auto& view : scene.gt2d) {
    Json v = Json::array();
    for (const auto& g : view) v.push_back({{"class_id", g.class_id}, {"box2d", box2d_to_json(g.box)}});
    gt2d.push_back(std::move(v));
  }
  j["gt2d"] = std::move(gt2d);
  return j;
}

fs::path save_scene(const Scene& scene, const fs::path& dir) {
  scene.validate();
  const std::string points_file = scene.id + ".points.bin";
  if (!scene.cloud.points.empty()) {
    write_bytes_atomic(dir / points_file, encode_points(scene.cloud.points));
  }
  const fs::path path = dir / (scene.id + ".json");
  write_json_atomic(path, scene_to_json(scene, points_file));
  return path;
}

Scene load_scene(const fs::path& path) {
  const Json j = read_json(path);
  Scene s;
  s.id = get<std::string>(j, "id");
  const auto kind = j.contains("kind") ? get<std::string>(j, "kind") : std::string("3d");
  if (kind == "3d") {
    s.kind = SceneKind::detection3d;
  } else if (kind == "2d") {
    s.kind = SceneKind::image2d;
  } else {
    throw FormatError("scene kind must be \"3d\" or \"2d\"");
  }
  if (j.contains("points") && !j.at("points").is_null()) {
    const auto& pts = j.at("points");
    const fs::path blob = path.parent_path() / get<std::string>(pts, "file");
    s.cloud.points = decode_points(read_file(blob));
    if (pts.contains("count") && get<std::size_t>(pts, "count") != s.cloud.points.size()) {
      throw FormatError("scene " + s.id + ": point count does not match blob");
    }
  }
  for (const auto& c : field(j, "vocabulary")) {
    s.vocabulary.push_back({get<std::string>(c, "name"), split_from_string(get<std::string>(c, "split"))});
  }
  for (const auto& v : field(j, "views")) s.views.push_back(camera_from_json(v));
  if (j.contains("gt3d")) s.gt3d = gt3d_from_json(j.at("gt3d"));
  if (j.contains("gt2d")) {
    for (const auto& view : j.at("gt2d")) {
      auto& dst = s.gt2d.emplace_back();
      for (const auto& g : view) dst.push_back({get<int>(g, "class_id"), box2d_from_json(field(g, "box2d"))});
    }
  } else {
    s.gt2d.resize(s.views.size());
  }
  s.validate();
  return s;
}

}  // namespace ovprop::harness
