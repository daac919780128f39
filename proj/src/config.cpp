#include "checal/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace checal {

const char* method_name(Method m) {
  switch (m) {
    case Method::Ours: return "ours";
    case Method::SarsOnly: return "sars_only";
    case Method::ReservoirReplay: return "reservoir_replay";
    case Method::Finetune: return "finetune";
    case Method::Joint: return "joint";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (const Method m : kAllMethods)
    if (name == method_name(m)) return m;
  fail(Status::ConfigError,
       "method: unknown value '" + name +
           "' (expected ours|sars_only|reservoir_replay|finetune|joint)");
}

namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& path, const std::string& msg) {
  fail(Status::ConfigError, path + ": " + msg);
}

// Typed field access with field-path diagnostics; tracks which keys were
// consumed so unknown keys can be rejected per object.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_fail(path_, "expected an object");
  }

  ~ObjectReader() = default;

  bool has(const char* key) const { return node_.contains(key); }

  double number(const char* key, double fallback) {
    if (!node_.contains(key)) return fallback;
    mark(key);
    const json& v = node_.at(key);
    if (!v.is_number()) config_fail(path_ + "." + key, "expected a number");
    return v.get<double>();
  }

  int integer(const char* key, int fallback) {
    if (!node_.contains(key)) return fallback;
    mark(key);
    const json& v = node_.at(key);
    if (!v.is_number_integer()) config_fail(path_ + "." + key, "expected an integer");
    return v.get<int>();
  }

  bool boolean(const char* key, bool fallback) {
    if (!node_.contains(key)) return fallback;
    mark(key);
    const json& v = node_.at(key);
    if (!v.is_boolean()) config_fail(path_ + "." + key, "expected a boolean");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) {
    if (!node_.contains(key)) return fallback;
    mark(key);
    const json& v = node_.at(key);
    if (!v.is_string()) config_fail(path_ + "." + key, "expected a string");
    return v.get<std::string>();
  }

  ObjectReader object(const char* key) {
    mark(key);
    if (!node_.contains(key)) {
      static const json empty = json::object();
      return ObjectReader(empty, path_ + "." + key);
    }
    return ObjectReader(node_.at(key), path_ + "." + key);
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key()))
        config_fail(path_ + "." + it.key(), "unknown key");
    }
  }

 private:
  void mark(const char* key) { seen_.insert(key); }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const char* path, const std::string& msg) {
  if (!ok) config_fail(path, msg);
}

}  // namespace

void ExperimentConfig::validate() const {
  check(scenes.count >= 1, "scenes.count", "must be >= 1");
  check(std::isfinite(scenes.box_side) && scenes.box_side > 0.0,
        "scenes.box_side", "must be positive");
  check(std::isfinite(scenes.box_gap) && scenes.box_gap >= 0.0, "scenes.box_gap",
        "must be non-negative");
  check(scenes.landmarks_per_scene >= 50, "scenes.landmarks_per_scene",
        "must be >= 50");
  check(trajectory.frames_per_scene >= 20, "trajectory.frames_per_scene",
        "must be >= 20");
  check(std::isfinite(trajectory.clustering) && trajectory.clustering >= 0.0 &&
            trajectory.clustering <= 1.0,
        "trajectory.clustering", "must be in [0, 1]");
  check(trajectory.train_fraction > 0.0 && trajectory.train_fraction < 1.0,
        "trajectory.train_fraction", "must be in (0, 1)");
  try {
    render.validate();
  } catch (const Error& e) {
    config_fail("render", e.what());
  }
  check(model.hidden_dim >= 1, "model.hidden_dim", "must be >= 1");
  check(model.num_centers >= scenes.count, "model.num_centers",
        "must be >= scenes.count");
  check(std::isfinite(model.learning_rate) && model.learning_rate > 0.0,
        "model.learning_rate", "must be positive");
  check(std::isfinite(model.lr_decay_floor) && model.lr_decay_floor > 0.0 &&
            model.lr_decay_floor <= 1.0,
        "model.lr_decay_floor", "must be in (0, 1]");
  check(std::isfinite(model.weight_decay) && model.weight_decay >= 0.0,
        "model.weight_decay", "must be non-negative");
  check(std::isfinite(model.pose_loss_clamp) && model.pose_loss_clamp > 0.0,
        "model.pose_loss_clamp", "must be positive");
  check(std::isfinite(model.grad_clip_norm) && model.grad_clip_norm > 0.0,
        "model.grad_clip_norm", "must be positive");
  try {
    scale_bounds.validate();
  } catch (const Error& e) {
    config_fail("scale_bounds", e.what());
  }
  check(sars.buffer_fraction > 0.0 && sars.buffer_fraction <= 1.0,
        "sars.buffer_fraction", "must be in (0, 1]");
  check(std::isfinite(sars.radius) && sars.radius >= 0.0, "sars.radius",
        "must be non-negative");
  check(std::isfinite(sars.lambda) && sars.lambda >= 0.0, "sars.lambda",
        "must be non-negative");
  try {
    distill.validate();
  } catch (const Error& e) {
    config_fail("distill", e.what());
  }
  check(training.iterations_per_scene >= 1, "training.iterations_per_scene",
        "must be >= 1");
  check(training.new_batch_frames >= 1, "training.new_batch_frames",
        "must be >= 1");
  check(training.replay_batch_frames >= 1, "training.replay_batch_frames",
        "must be >= 1");
  check(std::isfinite(eval.threshold_t_m) && eval.threshold_t_m >= 0.0,
        "eval.threshold_t_m", "must be non-negative");
  check(std::isfinite(eval.threshold_t_frac_diameter) &&
            eval.threshold_t_frac_diameter >= 0.0,
        "eval.threshold_t_frac_diameter", "must be non-negative");
  check(eval.threshold_t_m > 0.0 || eval.threshold_t_frac_diameter > 0.0,
        "eval", "one of threshold_t_m / threshold_t_frac_diameter must be > 0");
  check(std::isfinite(eval.threshold_r_deg) && eval.threshold_r_deg > 0.0,
        "eval.threshold_r_deg", "must be positive");
  check(eval.ransac_iterations >= 1, "eval.ransac_iterations", "must be >= 1");
  check(std::isfinite(eval.ransac_inlier_threshold) &&
            eval.ransac_inlier_threshold > 0.0,
        "eval.ransac_inlier_threshold", "must be positive");
}

ExperimentConfig parse_config(const nlohmann::json& doc) {
  ExperimentConfig c;
  ObjectReader root(doc, "config");
  const int version = root.integer("schema_version", 0);
  check(version == 1, "config.schema_version", "must be present and equal to 1");

  {
    ObjectReader o = root.object("scenes");
    c.scenes.count = o.integer("count", c.scenes.count);
    c.scenes.box_side = o.number("box_side", c.scenes.box_side);
    c.scenes.box_gap = o.number("box_gap", c.scenes.box_gap);
    c.scenes.landmarks_per_scene =
        o.integer("landmarks_per_scene", c.scenes.landmarks_per_scene);
    o.finish();
  }
  {
    ObjectReader o = root.object("trajectory");
    c.trajectory.frames_per_scene =
        o.integer("frames_per_scene", c.trajectory.frames_per_scene);
    c.trajectory.clustering = o.number("clustering", c.trajectory.clustering);
    c.trajectory.train_fraction =
        o.number("train_fraction", c.trajectory.train_fraction);
    o.finish();
  }
  {
    ObjectReader o = root.object("render");
    c.render.points_per_frame =
        o.integer("points_per_frame", c.render.points_per_frame);
    c.render.feature_dim = o.integer("feature_dim", c.render.feature_dim);
    c.render.noise_sigma = o.number("noise_sigma", c.render.noise_sigma);
    c.render.view_range = o.number("view_range", c.render.view_range);
    c.render.cone_half_angle_deg =
        o.number("cone_half_angle_deg", c.render.cone_half_angle_deg);
    c.render.encoder_seed = static_cast<std::uint64_t>(
        o.integer("encoder_seed", static_cast<int>(c.render.encoder_seed)));
    o.finish();
  }
  {
    ObjectReader o = root.object("model");
    c.model.hidden_dim = o.integer("hidden_dim", c.model.hidden_dim);
    c.model.num_centers = o.integer("num_centers", c.model.num_centers);
    c.model.learning_rate = o.number("learning_rate", c.model.learning_rate);
    c.model.lr_decay_floor =
        o.number("lr_decay_floor", c.model.lr_decay_floor);
    c.model.weight_decay = o.number("weight_decay", c.model.weight_decay);
    c.model.pose_loss_clamp = o.number("pose_loss_clamp", c.model.pose_loss_clamp);
    c.model.grad_clip_norm = o.number("grad_clip_norm", c.model.grad_clip_norm);
    o.finish();
  }
  {
    ObjectReader o = root.object("scale_bounds");
    c.scale_bounds.q_min = o.number("q_min", c.scale_bounds.q_min);
    c.scale_bounds.q_max = o.number("q_max", c.scale_bounds.q_max);
    o.finish();
  }
  {
    ObjectReader o = root.object("sars");
    c.sars.buffer_fraction = o.number("buffer_fraction", c.sars.buffer_fraction);
    c.sars.radius = o.number("radius", c.sars.radius);
    c.sars.lambda = o.number("lambda", c.sars.lambda);
    c.sars.cross_scene_radius =
        o.boolean("cross_scene_radius", c.sars.cross_scene_radius);
    const std::string norm = o.text(
        "normalization",
        c.sars.normalization == PoseNormalization::PerScene ? "per_scene"
                                                            : "global");
    if (norm == "per_scene") {
      c.sars.normalization = PoseNormalization::PerScene;
    } else if (norm == "global") {
      c.sars.normalization = PoseNormalization::Global;
    } else {
      config_fail("config.sars.normalization",
                  "expected 'per_scene' or 'global'");
    }
    o.finish();
  }
  {
    ObjectReader o = root.object("distill");
    c.distill.alpha = o.number("alpha", c.distill.alpha);
    c.distill.beta_metric = o.number("beta_metric", c.distill.beta_metric);
    c.distill.gamma = o.number("gamma", c.distill.gamma);
    c.distill.tau = o.number("tau", c.distill.tau);
    c.distill.active_size = o.integer("active_size", c.distill.active_size);
    o.finish();
  }
  {
    ObjectReader o = root.object("training");
    c.training.iterations_per_scene =
        o.integer("iterations_per_scene", c.training.iterations_per_scene);
    c.training.new_batch_frames =
        o.integer("new_batch_frames", c.training.new_batch_frames);
    c.training.replay_batch_frames =
        o.integer("replay_batch_frames", c.training.replay_batch_frames);
    o.finish();
  }
  {
    ObjectReader o = root.object("eval");
    c.eval.threshold_t_m = o.number("threshold_t_m", c.eval.threshold_t_m);
    c.eval.threshold_t_frac_diameter =
        o.number("threshold_t_frac_diameter", c.eval.threshold_t_frac_diameter);
    c.eval.threshold_r_deg = o.number("threshold_r_deg", c.eval.threshold_r_deg);
    c.eval.ransac_iterations =
        o.integer("ransac_iterations", c.eval.ransac_iterations);
    c.eval.ransac_inlier_threshold =
        o.number("ransac_inlier_threshold", c.eval.ransac_inlier_threshold);
    c.eval.tfr_clamp = o.boolean("tfr_clamp", c.eval.tfr_clamp);
    c.eval.tfr_include_last =
        o.boolean("tfr_include_last", c.eval.tfr_include_last);
    o.finish();
  }
  {
    ObjectReader o = root.object("head");
    const std::string pred = o.text(
        "prediction", c.prediction == PredictionMode::Blend ? "blend"
                                                            : "top1_offset");
    if (pred == "blend") {
      c.prediction = PredictionMode::Blend;
    } else if (pred == "top1_offset") {
      c.prediction = PredictionMode::Top1Offset;
    } else {
      config_fail("config.head.prediction", "expected 'blend' or 'top1_offset'");
    }
    o.finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Status::ConfigError, std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["scenes"] = {{"count", c.scenes.count},
                 {"box_side", c.scenes.box_side},
                 {"box_gap", c.scenes.box_gap},
                 {"landmarks_per_scene", c.scenes.landmarks_per_scene}};
  j["trajectory"] = {{"frames_per_scene", c.trajectory.frames_per_scene},
                     {"clustering", c.trajectory.clustering},
                     {"train_fraction", c.trajectory.train_fraction}};
  j["render"] = {{"points_per_frame", c.render.points_per_frame},
                 {"feature_dim", c.render.feature_dim},
                 {"noise_sigma", c.render.noise_sigma},
                 {"view_range", c.render.view_range},
                 {"cone_half_angle_deg", c.render.cone_half_angle_deg},
                 {"encoder_seed", c.render.encoder_seed}};
  j["model"] = {{"hidden_dim", c.model.hidden_dim},
                {"num_centers", c.model.num_centers},
                {"learning_rate", c.model.learning_rate},
                {"lr_decay_floor", c.model.lr_decay_floor},
                {"weight_decay", c.model.weight_decay},
                {"pose_loss_clamp", c.model.pose_loss_clamp},
                {"grad_clip_norm", c.model.grad_clip_norm}};
  j["scale_bounds"] = {{"q_min", c.scale_bounds.q_min},
                       {"q_max", c.scale_bounds.q_max}};
  j["sars"] = {{"buffer_fraction", c.sars.buffer_fraction},
               {"radius", c.sars.radius},
               {"lambda", c.sars.lambda},
               {"cross_scene_radius", c.sars.cross_scene_radius},
               {"normalization",
                c.sars.normalization == PoseNormalization::PerScene
                    ? "per_scene"
                    : "global"}};
  j["distill"] = {{"alpha", c.distill.alpha},
                  {"beta_metric", c.distill.beta_metric},
                  {"gamma", c.distill.gamma},
                  {"tau", c.distill.tau},
                  {"active_size", c.distill.active_size}};
  j["training"] = {{"iterations_per_scene", c.training.iterations_per_scene},
                   {"new_batch_frames", c.training.new_batch_frames},
                   {"replay_batch_frames", c.training.replay_batch_frames}};
  j["eval"] = {{"threshold_t_m", c.eval.threshold_t_m},
               {"threshold_t_frac_diameter", c.eval.threshold_t_frac_diameter},
               {"threshold_r_deg", c.eval.threshold_r_deg},
               {"ransac_iterations", c.eval.ransac_iterations},
               {"ransac_inlier_threshold", c.eval.ransac_inlier_threshold},
               {"tfr_clamp", c.eval.tfr_clamp},
               {"tfr_include_last", c.eval.tfr_include_last}};
  j["head"] = {{"prediction",
                c.prediction == PredictionMode::Blend ? "blend" : "top1_offset"}};
  return j;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(config_to_json(config).dump());
}

std::string config_hash_hex(const ExperimentConfig& config) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

}  // namespace checal
