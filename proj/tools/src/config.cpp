#include "i2preg/cli/config.hpp"

#include <algorithm>
#include <fstream>

#include "i2preg/error.hpp"

namespace i2preg::cli {

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& j, const std::string& where) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::InvalidArgument, where + " must have 3 components");
  return {v[0], v[1], v[2]};
}

json primitive_json(const Primitive& p) {
  switch (p.kind) {
    case Primitive::Kind::Plane:
      return {{"kind", "plane"}, {"center", vec_json(p.center)}, {"axis_u", vec_json(p.axis_u)},
              {"axis_v", vec_json(p.axis_v)}};
    case Primitive::Kind::Box:
      return {{"kind", "box"}, {"center", vec_json(p.center)}, {"half_extents", vec_json(p.half_extents)}};
    case Primitive::Kind::Sphere:
      return {{"kind", "sphere"}, {"center", vec_json(p.center)}, {"radius", p.radius}};
  }
  return {};
}

Primitive primitive_from(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "scene.primitives entries must be objects");
  Primitive p;
  const auto kind = j.at("kind").get<std::string>();
  std::vector<std::string> allowed{"kind", "center"};
  if (kind == "plane") {
    p.kind = Primitive::Kind::Plane;
    p.axis_u = vec_from(j.at("axis_u"), "axis_u");
    p.axis_v = vec_from(j.at("axis_v"), "axis_v");
    allowed.insert(allowed.end(), {"axis_u", "axis_v"});
  } else if (kind == "box") {
    p.kind = Primitive::Kind::Box;
    p.half_extents = vec_from(j.at("half_extents"), "half_extents");
    allowed.emplace_back("half_extents");
  } else if (kind == "sphere") {
    p.kind = Primitive::Kind::Sphere;
    p.radius = j.at("radius").get<double>();
    allowed.emplace_back("radius");
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown primitive kind '" + kind + "'");
  }
  p.center = vec_from(j.at("center"), "center");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown key '" + key + "' in " + kind + " primitive");
    }
  }
  return p;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void merge_strict(json& base, const json& over, const std::string& path) {
  if (!over.is_object()) throw Error(ErrorCode::InvalidArgument, (path.empty() ? "config" : path) + " must be an object");
  for (const auto& [key, value] : over.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + here + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_strict(slot, value, here);
    } else if (!same_kind(slot, value)) {
      throw Error(ErrorCode::InvalidArgument, "config key '" + here + "' has the wrong type");
    } else {
      slot = value;
    }
  }
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, "config key '" + path + key + "' has an invalid value");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (k_neighbors < 1) throw Error(ErrorCode::InvalidArgument, "k_neighbors must be >= 1");
  if (top_k_coarse < 1) throw Error(ErrorCode::InvalidArgument, "top_k_coarse must be >= 1");
  if (feature_channels < 4) throw Error(ErrorCode::InvalidArgument, "feature_channels must be >= 4");
  if (tile_rows < 1 || tile_cols < 1) throw Error(ErrorCode::InvalidArgument, "tile grid must be at least 1x1");
  if (!(voxel_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel_size must be > 0");
  if (epoch < 0) throw Error(ErrorCode::InvalidArgument, "epoch must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch_size must be >= 1");
  if (normal_cue.noise_weight < 0.0 || !(normal_cue.saturation_deg > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "normal_cue needs noise_weight >= 0 and saturation_deg > 0");
  }
  if (thresholds.tau1_m < 0.0 || thresholds.tau3_m < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "metric thresholds must be non-negative");
  }
  loss_weights.validate();
  warmup.validate();
  ransac.validate();
  corruption.validate();
  scene.validate();
}

nlohmann::json to_json(const PipelineConfig& c) {
  json prims = json::array();
  for (const auto& p : c.scene.primitives) prims.push_back(primitive_json(p));
  const auto& k = c.scene.intrinsics;
  return {
      {"seed", c.seed},
      {"k_neighbors", c.k_neighbors},
      {"adaptive_k", c.adaptive_k},
      {"top_k_coarse", c.top_k_coarse},
      {"min_fine_score", c.min_fine_score},
      {"feature_channels", c.feature_channels},
      {"tile_rows", c.tile_rows},
      {"tile_cols", c.tile_cols},
      {"voxel_size", c.voxel_size},
      {"gat_seed", c.gat_seed},
      {"epoch", c.epoch},
      {"batch_size", c.batch_size},
      {"loss_weights",
       {{"lambda1", c.loss_weights.lambda1}, {"lambda2", c.loss_weights.lambda2}, {"lambda3", c.loss_weights.lambda3}}},
      {"warmup", {{"start_epoch", c.warmup.start_epoch}, {"end_epoch", c.warmup.end_epoch}}},
      {"ransac",
       {{"max_iterations", c.ransac.max_iterations},
        {"inlier_threshold_px", c.ransac.inlier_threshold_px},
        {"min_sample", c.ransac.min_sample},
        {"confidence", c.ransac.confidence},
        {"seed", c.ransac.seed}}},
      {"thresholds",
       {{"tau1", c.thresholds.tau1_m},
        {"tau2", c.thresholds.tau2},
        {"tau3", c.thresholds.tau3_m},
        {"pir_overlap", c.thresholds.pir_overlap}}},
      {"normal_cue", {{"noise_weight", c.normal_cue.noise_weight}, {"saturation_deg", c.normal_cue.saturation_deg}}},
      {"corruption",
       {{"gaussian_sigma_m", c.corruption.gaussian_sigma_m},
        {"mask_ratio", c.corruption.mask_ratio},
        {"feature_noise_sigma", c.corruption.feature_noise_sigma},
        {"outlier_fraction", c.corruption.outlier_fraction},
        {"seed", c.corruption.seed}}},
      {"scene",
       {{"point_count", c.scene.point_count},
        {"width", k.width},
        {"height", k.height},
        {"fx", k.fx},
        {"fy", k.fy},
        {"cx", k.cx},
        {"cy", k.cy},
        {"max_rotation_deg", c.scene.max_rotation_deg},
        {"max_translation_m", c.scene.max_translation_m},
        {"primitives", prims}}},
  };
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  json merged = to_json(PipelineConfig{});
  merge_strict(merged, doc, "");

  PipelineConfig c;
  c.seed = get<std::uint64_t>(merged, "seed", "");
  c.k_neighbors = get<std::size_t>(merged, "k_neighbors", "");
  c.adaptive_k = get<bool>(merged, "adaptive_k", "");
  c.top_k_coarse = get<std::size_t>(merged, "top_k_coarse", "");
  c.min_fine_score = get<double>(merged, "min_fine_score", "");
  c.feature_channels = get<Eigen::Index>(merged, "feature_channels", "");
  c.tile_rows = get<int>(merged, "tile_rows", "");
  c.tile_cols = get<int>(merged, "tile_cols", "");
  c.voxel_size = get<double>(merged, "voxel_size", "");
  c.gat_seed = get<std::uint64_t>(merged, "gat_seed", "");
  c.epoch = get<int>(merged, "epoch", "");
  c.batch_size = get<int>(merged, "batch_size", "");

  const auto& lw = merged["loss_weights"];
  c.loss_weights = {get<double>(lw, "lambda1", "loss_weights."), get<double>(lw, "lambda2", "loss_weights."),
                    get<double>(lw, "lambda3", "loss_weights.")};
  const auto& wu = merged["warmup"];
  c.warmup = {get<int>(wu, "start_epoch", "warmup."), get<int>(wu, "end_epoch", "warmup.")};
  const auto& rs = merged["ransac"];
  c.ransac.max_iterations = get<int>(rs, "max_iterations", "ransac.");
  c.ransac.inlier_threshold_px = get<double>(rs, "inlier_threshold_px", "ransac.");
  c.ransac.min_sample = get<int>(rs, "min_sample", "ransac.");
  c.ransac.confidence = get<double>(rs, "confidence", "ransac.");
  c.ransac.seed = get<std::uint64_t>(rs, "seed", "ransac.");
  const auto& th = merged["thresholds"];
  c.thresholds.tau1_m = get<double>(th, "tau1", "thresholds.");
  c.thresholds.tau2 = get<double>(th, "tau2", "thresholds.");
  c.thresholds.tau3_m = get<double>(th, "tau3", "thresholds.");
  c.thresholds.pir_overlap = get<double>(th, "pir_overlap", "thresholds.");
  const auto& nc = merged["normal_cue"];
  c.normal_cue.noise_weight = get<double>(nc, "noise_weight", "normal_cue.");
  c.normal_cue.saturation_deg = get<double>(nc, "saturation_deg", "normal_cue.");
  const auto& co = merged["corruption"];
  c.corruption.gaussian_sigma_m = get<double>(co, "gaussian_sigma_m", "corruption.");
  c.corruption.mask_ratio = get<double>(co, "mask_ratio", "corruption.");
  c.corruption.feature_noise_sigma = get<double>(co, "feature_noise_sigma", "corruption.");
  c.corruption.outlier_fraction = get<double>(co, "outlier_fraction", "corruption.");
  c.corruption.seed = get<std::uint64_t>(co, "seed", "corruption.");
  const auto& sc = merged["scene"];
  c.scene.point_count = get<int>(sc, "point_count", "scene.");
  c.scene.intrinsics.width = get<int>(sc, "width", "scene.");
  c.scene.intrinsics.height = get<int>(sc, "height", "scene.");
  c.scene.intrinsics.fx = get<double>(sc, "fx", "scene.");
  c.scene.intrinsics.fy = get<double>(sc, "fy", "scene.");
  c.scene.intrinsics.cx = get<double>(sc, "cx", "scene.");
  c.scene.intrinsics.cy = get<double>(sc, "cy", "scene.");
  c.scene.max_rotation_deg = get<double>(sc, "max_rotation_deg", "scene.");
  c.scene.max_translation_m = get<double>(sc, "max_translation_m", "scene.");
  c.scene.primitives.clear();
  try {
    for (const auto& p : sc.at("primitives")) c.scene.primitives.push_back(primitive_from(p));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("scene.primitives: ") + e.what());
  }
  c.validate();
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::InvalidArgument, "override '" + assignment + "' is not of the form key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw Error(ErrorCode::InvalidArgument, "empty key in override '" + path + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

}  // namespace i2preg::cli
