#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "checal/error.hpp"
#include "checal/model.hpp"
#include "checal/sars.hpp"
#include "checal/scr_head.hpp"
#include "checal/sim.hpp"
#include "checal/spdd.hpp"

namespace checal {

enum class Method { Ours, SarsOnly, ReservoirReplay, Finetune, Joint };

const char* method_name(Method m);
Method method_from_string(const std::string& name);  // ConfigError on unknown
inline constexpr Method kAllMethods[5] = {Method::Ours, Method::SarsOnly,
                                          Method::ReservoirReplay,
                                          Method::Finetune, Method::Joint};

enum class PoseNormalization { PerScene, Global };

struct ExperimentConfig {
  struct Scenes {
    int count = 3;
    double box_side = 1.0;
    double box_gap = 0.5;
    int landmarks_per_scene = 300;
  } scenes;

  struct TrajectoryCfg {
    int frames_per_scene = 500;
    double clustering = 0.85;
    double train_fraction = 0.8;
  } trajectory;

  RenderConfig render;  // points_per_frame, feature_dim, noise_sigma, ...

  struct Model {
    int hidden_dim = 48;
    int num_centers = 64;
    double learning_rate = 0.005;
    double lr_decay_floor = 1.0;  // cosine-anneal lr to floor*lr per stage
    double weight_decay = 1e-4;
    double pose_loss_clamp = 10.0;
    double grad_clip_norm = 10.0;
  } model;

  ScaleBounds scale_bounds;

  struct Sars {
    double buffer_fraction = 0.1;  // per-scene capacity budget
    double radius = 0.5;
    double lambda = 1.0;
    bool cross_scene_radius = true;
    PoseNormalization normalization = PoseNormalization::PerScene;
  } sars;

  DistillWeights distill;

  struct Training {
    int iterations_per_scene = 1000;
    int new_batch_frames = 2;
    int replay_batch_frames = 2;
  } training;

  struct Eval {
    double threshold_t_m = 0.0;            // used when > 0
    double threshold_t_frac_diameter = 0.05;  // else fraction of scene diameter
    double threshold_r_deg = 5.0;
    int ransac_iterations = 256;
    double ransac_inlier_threshold = 0.05;
    bool tfr_clamp = true;
    bool tfr_include_last = false;
  } eval;

  PredictionMode prediction = PredictionMode::Blend;

  void validate() const;  // ConfigError with a field-path diagnostic
};

// Parse + validate a config document. Unknown keys are rejected so typos
// fail loudly before any work starts.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical echo of the config (sorted keys, all defaults materialized).
nlohmann::json config_to_json(const ExperimentConfig& config);

// FNV-1a over the canonical serialization; stable across runs.
std::uint64_t config_hash(const ExperimentConfig& config);
std::string config_hash_hex(const ExperimentConfig& config);

}  // namespace checal
