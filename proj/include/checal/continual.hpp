#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "checal/config.hpp"
#include "checal/model.hpp"
#include "checal/sars.hpp"
#include "checal/sim.hpp"

namespace checal {

struct SceneMetrics {
  double median_t_cm = 0.0;
  double median_r_deg = 0.0;
  double accuracy = 0.0;               // percent
  double best_accuracy_so_far = 0.0;   // max over evaluations up to this stage
};

struct ContinualReport {
  std::string method;
  std::uint64_t seed = 0;
  std::string config_hash;
  int scene_count = 0;
  // matrix[stage][scene]: scene evaluated at stages >= its learning stage
  // (joint evaluates every scene in its single stage).
  std::vector<std::vector<SceneMetrics>> matrix;
  double final_average_accuracy = 0.0;
  double tfr = 0.0;
  bool tfr_defined = false;
  nlohmann::json config_echo;
  double wall_clock_sec = 0.0;  // stdout only; never serialized (determinism)
};

// Immutable deep snapshot of the student used as the distillation teacher.
class TeacherSnapshot {
 public:
  explicit TeacherSnapshot(const MlpParams& student) : params_(student) {}
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

TeacherSnapshot freeze_teacher(const MlpParams& student);

// Resolves a buffered sample id back to its source frame. Ids are assigned
// in offer order, so the table is append-only and indexed by payload_ref.
struct FrameRef {
  int stream_index = 0;  // index into the run's stream list
  int frame_index = 0;   // index into that stream's train split
};

struct StageSetup {
  Method method = Method::Finetune;
  int iterations = 1000;
  int new_batch_frames = 2;
  int replay_batch_frames = 2;
  double base_learning_rate = 0.005;
  double lr_decay_floor = 1.0;  // cosine-anneal lr to floor*base per stage
  double pose_loss_clamp = 10.0;
  double grad_clip_norm = 10.0;
  DistillWeights distill;
  ScaleBounds bounds;
  PredictionMode mode = PredictionMode::Blend;
  Aabb pose_normalization;  // box that maps buffered poses to [0,1]^3
};

struct TrainStats {
  double final_loss = 0.0;
  int iterations_run = 0;
  std::size_t offered = 0;   // samples offered to the buffer after training
  std::size_t accepted = 0;  // samples the buffer kept
};

// One stage: per iteration draw a batch of new-scene frames for the pose
// loss; when a replay buffer with content is supplied, add the replay term
// (distillation against `teacher` when present, ground-truth rehearsal
// otherwise). After training, offers the scene's train samples to the buffer
// (spacing insert, or reservoir for the reservoir baseline). The caller owns
// the cumulative capacity schedule. `payload` and `reservoir_seen` carry the
// run-global id table and reservoir stream position.
TrainStats train_scene(MlpParams& student, AdamState& adam,
                       const TeacherSnapshot* teacher, const SceneStream& stream,
                       int stream_index, ReplayBuffer* buffer,
                       const std::vector<SceneStream>& all_streams,
                       const ClusterCenters& centers, const StageSetup& setup,
                       std::vector<FrameRef>& payload,
                       std::uint64_t& reservoir_seen, Rng& train_rng,
                       Rng& buffer_rng);

// Predict per-point world coordinates, then solve the camera pose by robust
// 3D-3D alignment of camera-frame points to predictions.
std::optional<Pose> localize_frame(const MlpParams& params, const Frame& frame,
                                   const ClusterCenters& centers,
                                   const ScaleBounds& bounds,
                                   const RansacConfig& ransac, Rng& rng,
                                   PredictionMode mode = PredictionMode::Blend);

struct EvalThresholds {
  double t_m = 0.05;
  double r_deg = 5.0;
};

// Median translation (cm) / rotation (deg) and accuracy = percent of frames
// with t < t_m AND r < r_deg (strict). Infinite errors mark localization
// failures; an even count averages the two middle values (inf dominates).
SceneMetrics summarize_errors(const std::vector<PoseError>& errors,
                              const EvalThresholds& thresholds);

// Per-frame pose errors over a test split; localization failures count as
// +inf errors (threshold misses), never as exceptions.
SceneMetrics evaluate_scene(const MlpParams& params,
                            const std::vector<Frame>& test,
                            const ClusterCenters& centers,
                            const ScaleBounds& bounds,
                            const RansacConfig& ransac,
                            const EvalThresholds& thresholds, Rng& rng,
                            PredictionMode mode = PredictionMode::Blend);

// Mean over tracked scenes of (best historical accuracy - final accuracy).
// The last-learned scene is excluded unless include_last; per-scene drops
// clamp at 0 unless clamp_at_zero is false. Matrix must be complete
// lower-triangular with a full final row.
double compute_tfr(const std::vector<std::vector<SceneMetrics>>& matrix,
                   bool clamp_at_zero = true, bool include_last = false);

// Full continual protocol for one (method, seed): generate scenes/streams,
// train sequentially (stage 1 from scratch, distilling methods freeze a
// teacher per later stage), evaluate all learned scenes after each stage.
ContinualReport run_continual(const ExperimentConfig& config, Method method,
                              std::uint64_t seed);

nlohmann::json report_to_json(const ContinualReport& report);
ContinualReport report_from_json(const nlohmann::json& doc);
void write_report_files(const ContinualReport& report, const std::string& out_dir);
ContinualReport load_report_file(const std::string& path);
std::string report_basename(const ContinualReport& report);  // method_seed_hash
std::string render_matrix_csv(const ContinualReport& report);

}  // namespace checal
