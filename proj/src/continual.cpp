#include "checal/continual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace checal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

Eigen::MatrixXd stack_features(const std::vector<const Frame*>& frames) {
  long rows = 0;
  for (const Frame* f : frames) rows += f->features.rows();
  require(rows > 0, Status::InvalidInput, "batch has no points");
  Eigen::MatrixXd x(rows, frames.front()->features.cols());
  long at = 0;
  for (const Frame* f : frames) {
    x.middleRows(at, f->features.rows()) = f->features;
    at += f->features.rows();
  }
  return x;
}

MatX3 stack_gt(const std::vector<const Frame*>& frames) {
  long rows = 0;
  for (const Frame* f : frames) rows += f->gt_coords.rows();
  MatX3 g(rows, 3);
  long at = 0;
  for (const Frame* f : frames) {
    g.middleRows(at, f->gt_coords.rows()) = f->gt_coords;
    at += f->gt_coords.rows();
  }
  return g;
}

// dL/d(raw 5K outputs) for a clipped-L1 coordinate loss over a forward pass.
Eigen::MatrixXd pose_output_grads(const ForwardResult& fwd, const MatX3& gt,
                                  const ClusterCenters& centers,
                                  const ScaleBounds& bounds, double clamp,
                                  PredictionMode mode, double* loss_out) {
  const long b = static_cast<long>(fwd.outputs.size());
  MatX3 pred(b, 3);
  for (long i = 0; i < b; ++i) {
    pred.row(i) = predict_coordinate(fwd.outputs[i], centers, bounds, mode);
  }
  if (loss_out != nullptr) *loss_out = pose_loss(pred, gt, clamp);
  const MatX3 coord_grads = pose_loss_backward(pred, gt, clamp);
  const int k = centers.count();
  Eigen::MatrixXd out(b, 5 * k);
  for (long i = 0; i < b; ++i) {
    const Vec3 u = coord_grads.row(i);
    const HeadGrads hg = head_backward(fwd.outputs[i], centers, bounds, u, mode);
    out.row(i) = pack_head_grads(hg);
  }
  return out;
}

ReplaySample make_sample(std::uint64_t id, const SceneStream& stream,
                         int frame_index, const Aabb& normalization) {
  const Pose& p = stream.train[static_cast<std::size_t>(frame_index)].gt_pose;
  ReplaySample s;
  s.sample_id = id;
  s.payload_ref = id;
  s.scene_id = stream.scene_id;
  s.pose.position = normalization.normalize_point(p.position);
  s.pose.orientation = p.orientation.canonicalized();
  return s;
}

double median_of(std::vector<double> v) {
  require(!v.empty(), Status::InvalidInput, "median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  const double a = v[n / 2 - 1];
  const double b = v[n / 2];
  if (std::isinf(a) || std::isinf(b)) return kInf;
  return 0.5 * (a + b);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json median_to_json(double v) {
  if (std::isinf(v)) return nlohmann::json("inf");
  return nlohmann::json(v);
}

double median_from_json(const nlohmann::json& v, const char* field) {
  if (v.is_string()) {
    require(v.get<std::string>() == "inf", Status::IoError,
            std::string("report: bad median string in ") + field);
    return kInf;
  }
  require(v.is_number(), Status::IoError,
          std::string("report: bad median in ") + field);
  return v.get<double>();
}

}  // namespace

TeacherSnapshot freeze_teacher(const MlpParams& student) {
  student.validate();
  return TeacherSnapshot(student);
}

TrainStats train_scene(MlpParams& student, AdamState& adam,
                       const TeacherSnapshot* teacher, const SceneStream& stream,
                       int stream_index, ReplayBuffer* buffer,
                       const std::vector<SceneStream>& all_streams,
                       const ClusterCenters& centers, const StageSetup& setup,
                       std::vector<FrameRef>& payload,
                       std::uint64_t& reservoir_seen, Rng& train_rng,
                       Rng& buffer_rng) {
  require(!stream.train.empty(), Status::InvalidInput,
          "train_scene: empty train split");
  require(setup.iterations >= 1 && setup.new_batch_frames >= 1 &&
              setup.replay_batch_frames >= 1,
          Status::InvalidInput, "train_scene: batch/iteration counts must be >= 1");
  const bool reservoir = setup.method == Method::ReservoirReplay;
  const bool keeps_buffer = setup.method == Method::Ours ||
                            setup.method == Method::SarsOnly || reservoir;
  require(buffer != nullptr || !keeps_buffer, Status::InvalidInput,
          "train_scene: replay method requires a buffer");
  const bool distill = setup.method == Method::Ours && teacher != nullptr;
  require(teacher == nullptr || setup.method == Method::Ours,
          Status::InvalidInput,
          "train_scene: teacher is only meaningful for the distilling method");

  const std::size_t n_train = stream.train.size();
  TrainStats stats;
  for (int it = 0; it < setup.iterations; ++it) {
    Rng iter_rng = train_rng.child("iter", static_cast<std::uint64_t>(it));

    // Cosine-anneal the learning rate within the stage. The stage-end model
    // becomes the next stage's teacher, so its residual optimization noise
    // is inherited by distillation targets; annealing shrinks that floor.
    if (setup.lr_decay_floor < 1.0) {
      const double t = setup.iterations > 1
                           ? static_cast<double>(it) /
                                 static_cast<double>(setup.iterations - 1)
                           : 0.0;
      adam.config.learning_rate =
          setup.base_learning_rate *
          (setup.lr_decay_floor + (1.0 - setup.lr_decay_floor) * 0.5 *
                                      (1.0 + std::cos(kPi * t)));
    }

    // New-scene batch.
    const std::size_t want =
        std::min<std::size_t>(static_cast<std::size_t>(setup.new_batch_frames),
                              n_train);
    const auto pick = iter_rng.sample_without_replacement(n_train, want);
    std::vector<const Frame*> new_frames;
    new_frames.reserve(pick.size());
    for (const std::size_t idx : pick) new_frames.push_back(&stream.train[idx]);
    const Eigen::MatrixXd x_new = stack_features(new_frames);
    const MatX3 gt_new = stack_gt(new_frames);
    const ForwardResult fwd_new = forward(student, x_new);
    double new_loss = 0.0;
    const Eigen::MatrixXd grads_out_new =
        pose_output_grads(fwd_new, gt_new, centers, setup.bounds,
                          setup.pose_loss_clamp, setup.mode, &new_loss);
    Gradients grads = backward(student, fwd_new.cache, grads_out_new);
    double total_loss = new_loss;

    // Replay term: only when a populated buffer exists for a replay method.
    if (keeps_buffer && !buffer->empty()) {
      const auto replay = buffer->sample_batch(
          static_cast<std::size_t>(setup.replay_batch_frames), iter_rng);
      std::vector<const Frame*> replay_frames;
      replay_frames.reserve(replay.size());
      for (const ReplaySample& s : replay) {
        require(s.payload_ref < payload.size(), Status::ContractViolation,
                "train_scene: replay sample id outside the payload table");
        const FrameRef ref = payload[static_cast<std::size_t>(s.payload_ref)];
        replay_frames.push_back(
            &all_streams[static_cast<std::size_t>(ref.stream_index)]
                 .train[static_cast<std::size_t>(ref.frame_index)]);
      }
      const Eigen::MatrixXd x_rep = stack_features(replay_frames);
      const ForwardResult fwd_rep = forward(student, x_rep);
      if (distill) {
        const ForwardResult fwd_teacher = forward(teacher->params(), x_rep);
        const SpddBackwardResult sp =
            spdd_backward(fwd_teacher.outputs, fwd_rep.outputs, centers,
                          setup.bounds, setup.distill, setup.mode);
        Eigen::MatrixXd grads_out_rep(
            static_cast<long>(sp.student_grads.size()), 5 * centers.count());
        for (std::size_t i = 0; i < sp.student_grads.size(); ++i) {
          grads_out_rep.row(static_cast<long>(i)) =
              pack_head_grads(sp.student_grads[i]);
        }
        grads.accumulate(backward(student, fwd_rep.cache, grads_out_rep));
        total_loss += sp.losses.total;
      } else {
        // Ground-truth rehearsal (sars_only / reservoir_replay).
        const MatX3 gt_rep = stack_gt(replay_frames);
        double rep_loss = 0.0;
        const Eigen::MatrixXd grads_out_rep =
            pose_output_grads(fwd_rep, gt_rep, centers, setup.bounds,
                              setup.pose_loss_clamp, setup.mode, &rep_loss);
        grads.accumulate(backward(student, fwd_rep.cache, grads_out_rep));
        total_loss += rep_loss;
      }
    }

    if (!std::isfinite(total_loss) || !std::isfinite(global_norm(grads))) {
      fail(Status::TrainingDivergence,
           "train_scene: non-finite loss/gradients at iteration " +
               std::to_string(it));
    }
    clip_by_global_norm(grads, setup.grad_clip_norm);
    adam_step(student, grads, adam);
    stats.final_loss = total_loss;
    stats.iterations_run = it + 1;
  }

  // Buffer update: offer the scene's train samples in trajectory order.
  if (keeps_buffer) {
    for (std::size_t i = 0; i < n_train; ++i) {
      const std::uint64_t id = static_cast<std::uint64_t>(payload.size());
      payload.push_back({stream_index, static_cast<int>(i)});
      const ReplaySample s = make_sample(id, stream, static_cast<int>(i),
                                         setup.pose_normalization);
      InsertOutcome outcome;
      if (reservoir) {
        outcome = buffer->reservoir_insert(s, reservoir_seen, buffer_rng);
        ++reservoir_seen;
      } else {
        outcome = buffer->try_insert(s);
      }
      ++stats.offered;
      if (outcome.accepted()) ++stats.accepted;
    }
  }
  return stats;
}

std::optional<Pose> localize_frame(const MlpParams& params, const Frame& frame,
                                   const ClusterCenters& centers,
                                   const ScaleBounds& bounds,
                                   const RansacConfig& ransac, Rng& rng,
                                   PredictionMode mode) {
  require(frame.point_count() >= 3, Status::InvalidInput,
          "localize_frame: need at least 3 points");
  const ForwardResult fwd = forward(params, frame.features);
  MatX3 pred(frame.point_count(), 3);
  for (int i = 0; i < frame.point_count(); ++i) {
    pred.row(i) =
        predict_coordinate(fwd.outputs[static_cast<std::size_t>(i)], centers,
                           bounds, mode);
  }
  if (!pred.allFinite()) return std::nullopt;
  try {
    const RansacResult result =
        ransac_kabsch(frame.cam_points, pred, ransac, rng);
    return result.transform.to_pose();
  } catch (const Error& e) {
    if (e.status() == Status::NoConsensus ||
        e.status() == Status::DegenerateConfiguration ||
        e.status() == Status::InsufficientSamples) {
      return std::nullopt;
    }
    throw;
  }
}

SceneMetrics summarize_errors(const std::vector<PoseError>& errors,
                              const EvalThresholds& thresholds) {
  require(!errors.empty(), Status::InvalidInput,
          "summarize_errors: no frame errors");
  require(thresholds.t_m > 0.0 && thresholds.r_deg > 0.0, Status::InvalidInput,
          "summarize_errors: thresholds must be positive");
  std::vector<double> t_errs, r_errs;
  t_errs.reserve(errors.size());
  r_errs.reserve(errors.size());
  std::size_t hits = 0;
  for (const PoseError& e : errors) {
    t_errs.push_back(e.translation_m);
    r_errs.push_back(e.rotation_deg);
    if (e.translation_m < thresholds.t_m && e.rotation_deg < thresholds.r_deg) {
      ++hits;
    }
  }
  SceneMetrics m;
  m.median_t_cm = median_of(t_errs) * 100.0;
  m.median_r_deg = median_of(r_errs);
  m.accuracy =
      100.0 * static_cast<double>(hits) / static_cast<double>(errors.size());
  m.best_accuracy_so_far = m.accuracy;  // caller folds in history
  return m;
}

SceneMetrics evaluate_scene(const MlpParams& params,
                            const std::vector<Frame>& test,
                            const ClusterCenters& centers,
                            const ScaleBounds& bounds,
                            const RansacConfig& ransac,
                            const EvalThresholds& thresholds, Rng& rng,
                            PredictionMode mode) {
  require(!test.empty(), Status::InvalidInput, "evaluate_scene: empty test split");
  std::vector<PoseError> errors;
  errors.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    Rng frame_rng = rng.child("frame", static_cast<std::uint64_t>(i));
    const auto pose = localize_frame(params, test[i], centers, bounds, ransac,
                                     frame_rng, mode);
    PoseError err{kInf, kInf};
    if (pose.has_value()) err = pose_error(*pose, test[i].gt_pose);
    errors.push_back(err);
  }
  return summarize_errors(errors, thresholds);
}

double compute_tfr(const std::vector<std::vector<SceneMetrics>>& matrix,
                   bool clamp_at_zero, bool include_last) {
  const std::size_t stages = matrix.size();
  require(stages >= 1, Status::InvalidInput, "compute_tfr: empty matrix");
  for (std::size_t i = 0; i < stages; ++i) {
    require(matrix[i].size() == i + 1, Status::InvalidInput,
            "compute_tfr: matrix must be lower-triangular (scene evaluated "
            "from its learning stage onward)");
  }
  const std::size_t tracked = include_last ? stages : stages - 1;
  if (tracked == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t scene = 0; scene < tracked; ++scene) {
    const double final_acc = matrix[stages - 1][scene].accuracy;
    // Best historical accuracy over stages before the final one.
    double best = -kInf;
    for (std::size_t stage = scene; stage + 1 < stages; ++stage) {
      best = std::max(best, matrix[stage][scene].accuracy);
    }
    double drop = std::isinf(best) ? 0.0 : best - final_acc;
    if (clamp_at_zero) drop = std::max(drop, 0.0);
    sum += drop;
  }
  return sum / static_cast<double>(tracked);
}

ContinualReport run_continual(const ExperimentConfig& config, Method method,
                              std::uint64_t seed) {
  config.validate();
  Rng root(seed);
  const int n_scenes = config.scenes.count;

  // World layout: disjoint boxes along +x, separated by box_gap.
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<std::size_t>(n_scenes));
  for (int i = 0; i < n_scenes; ++i) {
    const double x0 =
        static_cast<double>(i) * (config.scenes.box_side + config.scenes.box_gap);
    Aabb box;
    box.lo = Vec3(x0, 0.0, 0.0);
    box.hi = Vec3(x0 + config.scenes.box_side, config.scenes.box_side,
                  config.scenes.box_side);
    Rng scene_rng = root.child("scene", static_cast<std::uint64_t>(i));
    scenes.push_back(generate_scene(i, box, config.scenes.landmarks_per_scene,
                                    scene_rng));
  }

  std::vector<SceneStream> streams;
  streams.reserve(scenes.size());
  for (int i = 0; i < n_scenes; ++i) {
    Rng traj_rng = root.child("traj", static_cast<std::uint64_t>(i));
    const Trajectory traj = generate_trajectory(
        scenes[static_cast<std::size_t>(i)], config.trajectory.frames_per_scene,
        config.trajectory.clustering, traj_rng);
    Rng stream_rng = root.child("stream", static_cast<std::uint64_t>(i));
    streams.push_back(make_stream(scenes[static_cast<std::size_t>(i)], traj,
                                  config.render,
                                  config.trajectory.train_fraction, stream_rng));
  }

  const ClusterCenters centers =
      build_cluster_centers(scenes, config.model.num_centers);

  Rng init_rng = root.child("init");
  MlpParams student =
      init_params(config.render.feature_dim, config.model.hidden_dim,
                  config.model.num_centers, init_rng);
  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.model.learning_rate;
  adam_cfg.weight_decay = config.model.weight_decay;
  AdamState adam = AdamState::init(student, adam_cfg);

  // Pose normalization box(es) for the replay buffer.
  Aabb global_box = Aabb::empty();
  for (const SceneStream& s : streams) {
    global_box.expand(s.train_pose_bounds.lo);
    global_box.expand(s.train_pose_bounds.hi);
  }

  StageSetup setup;
  setup.method = method;
  setup.iterations = config.training.iterations_per_scene;
  setup.new_batch_frames = config.training.new_batch_frames;
  setup.replay_batch_frames = config.training.replay_batch_frames;
  setup.base_learning_rate = config.model.learning_rate;
  setup.lr_decay_floor = config.model.lr_decay_floor;
  setup.pose_loss_clamp = config.model.pose_loss_clamp;
  setup.grad_clip_norm = config.model.grad_clip_norm;
  setup.distill = config.distill;
  setup.bounds = config.scale_bounds;
  setup.mode = config.prediction;

  RansacConfig ransac;
  ransac.iterations = config.eval.ransac_iterations;
  ransac.inlier_threshold = config.eval.ransac_inlier_threshold;

  const auto scene_thresholds = [&](int scene_idx) {
    EvalThresholds t;
    t.t_m = config.eval.threshold_t_m > 0.0
                ? config.eval.threshold_t_m
                : config.eval.threshold_t_frac_diameter *
                      scenes[static_cast<std::size_t>(scene_idx)].bounds.diameter();
    t.r_deg = config.eval.threshold_r_deg;
    return t;
  };

  ContinualReport report;
  report.method = method_name(method);
  report.seed = seed;
  report.config_hash = config_hash_hex(config);
  report.scene_count = n_scenes;
  report.config_echo = config_to_json(config);

  const bool keeps_buffer = method == Method::Ours ||
                            method == Method::SarsOnly ||
                            method == Method::ReservoirReplay;
  std::optional<ReplayBuffer> buffer;
  std::vector<FrameRef> payload;
  std::uint64_t reservoir_seen = 0;

  if (method == Method::Joint) {
    // Single pooled stage: one synthetic stream holding every train frame,
    // evaluated against each scene's own test split.
    SceneStream pooled;
    pooled.scene_id = -1;
    for (const SceneStream& s : streams) {
      pooled.train.insert(pooled.train.end(), s.train.begin(), s.train.end());
    }
    pooled.train_pose_bounds = global_box;
    StageSetup joint_setup = setup;
    joint_setup.iterations = config.training.iterations_per_scene * n_scenes;
    Rng train_rng = root.child("train", 0);
    Rng buffer_rng = root.child("buffer", 0);
    std::vector<SceneStream> pooled_list;  // payload table never used
    train_scene(student, adam, nullptr, pooled, 0, nullptr, pooled_list,
                centers, joint_setup, payload, reservoir_seen, train_rng,
                buffer_rng);
    Rng eval_rng = root.child("eval", 0);
    std::vector<SceneMetrics> row;
    for (int j = 0; j < n_scenes; ++j) {
      Rng scene_rng = eval_rng.child("scene", static_cast<std::uint64_t>(j));
      row.push_back(evaluate_scene(student, streams[static_cast<std::size_t>(j)].test,
                                   centers, setup.bounds, ransac,
                                   scene_thresholds(j), scene_rng, setup.mode));
    }
    report.matrix.push_back(std::move(row));
  } else {
    for (int stage = 0; stage < n_scenes; ++stage) {
      std::optional<TeacherSnapshot> teacher;
      if (method == Method::Ours && stage >= 1) {
        teacher.emplace(freeze_teacher(student));
      }
      if (keeps_buffer) {
        // Cumulative capacity schedule: capacity after stage i is the sum of
        // ceil(fraction * n_k) over k <= i. Capacity only matters at insert
        // time (after this stage trains), so growing up front is equivalent.
        const std::size_t budget = static_cast<std::size_t>(std::ceil(
            config.sars.buffer_fraction *
            static_cast<double>(streams[static_cast<std::size_t>(stage)]
                                    .train.size())));
        if (!buffer.has_value()) {
          SarsConfig bc;
          bc.capacity = std::max<std::size_t>(budget, 1);
          bc.radius = config.sars.radius;
          bc.lambda = config.sars.lambda;
          bc.cross_scene = config.sars.cross_scene_radius;
          buffer.emplace(bc);
        } else {
          buffer->grow_capacity(budget);
        }
      }
      StageSetup stage_setup = setup;
      stage_setup.pose_normalization =
          config.sars.normalization == PoseNormalization::Global
              ? global_box
              : streams[static_cast<std::size_t>(stage)].train_pose_bounds;
      Rng train_rng = root.child("train", static_cast<std::uint64_t>(stage));
      Rng buffer_rng = root.child("buffer", static_cast<std::uint64_t>(stage));
      train_scene(student, adam, teacher ? &*teacher : nullptr,
                  streams[static_cast<std::size_t>(stage)], stage,
                  keeps_buffer ? &*buffer : nullptr, streams, centers,
                  stage_setup, payload, reservoir_seen, train_rng, buffer_rng);

      Rng eval_rng = root.child("eval", static_cast<std::uint64_t>(stage));
      std::vector<SceneMetrics> row;
      for (int j = 0; j <= stage; ++j) {
        Rng scene_rng = eval_rng.child("scene", static_cast<std::uint64_t>(j));
        SceneMetrics m = evaluate_scene(
            student, streams[static_cast<std::size_t>(j)].test, centers,
            setup.bounds, ransac, scene_thresholds(j), scene_rng, setup.mode);
        const double prev_best =
            stage > 0 && j < stage
                ? report.matrix[static_cast<std::size_t>(stage - 1)]
                      [static_cast<std::size_t>(j)].best_accuracy_so_far
                : 0.0;
        m.best_accuracy_so_far = std::max(prev_best, m.accuracy);
        row.push_back(m);
      }
      report.matrix.push_back(std::move(row));
    }
  }

  double acc_sum = 0.0;
  for (const SceneMetrics& m : report.matrix.back()) acc_sum += m.accuracy;
  report.final_average_accuracy =
      acc_sum / static_cast<double>(report.matrix.back().size());

  report.tfr_defined = method != Method::Joint && n_scenes >= 2;
  report.tfr = report.tfr_defined
                   ? compute_tfr(report.matrix, config.eval.tfr_clamp,
                                 config.eval.tfr_include_last)
                   : 0.0;
  return report;
}

nlohmann::json report_to_json(const ContinualReport& report) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["method"] = report.method;
  doc["seed"] = report.seed;
  doc["config_hash"] = report.config_hash;
  doc["scene_count"] = report.scene_count;
  doc["final_average_accuracy"] = report.final_average_accuracy;
  doc["tfr"] = report.tfr;
  doc["tfr_defined"] = report.tfr_defined;
  nlohmann::json matrix = nlohmann::json::array();
  for (const auto& row : report.matrix) {
    nlohmann::json jrow = nlohmann::json::array();
    for (const SceneMetrics& m : row) {
      jrow.push_back({{"median_t_cm", median_to_json(m.median_t_cm)},
                      {"median_r_deg", median_to_json(m.median_r_deg)},
                      {"accuracy", m.accuracy},
                      {"best_accuracy_so_far", m.best_accuracy_so_far}});
    }
    matrix.push_back(std::move(jrow));
  }
  doc["matrix"] = std::move(matrix);
  doc["config"] = report.config_echo;
  // wall_clock_sec intentionally omitted: reports must be byte-identical
  // across reruns of the same config + seed.
  return doc;
}

ContinualReport report_from_json(const nlohmann::json& doc) {
  require(doc.is_object(), Status::IoError, "report: not a JSON object");
  require(doc.value("schema_version", 0) == 1, Status::IoError,
          "report: unsupported schema_version");
  ContinualReport r;
  try {
    r.method = doc.at("method").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.scene_count = doc.at("scene_count").get<int>();
    r.final_average_accuracy = doc.at("final_average_accuracy").get<double>();
    r.tfr = doc.at("tfr").get<double>();
    r.tfr_defined = doc.at("tfr_defined").get<bool>();
    for (const auto& jrow : doc.at("matrix")) {
      std::vector<SceneMetrics> row;
      for (const auto& jm : jrow) {
        SceneMetrics m;
        m.median_t_cm = median_from_json(jm.at("median_t_cm"), "median_t_cm");
        m.median_r_deg = median_from_json(jm.at("median_r_deg"), "median_r_deg");
        m.accuracy = jm.at("accuracy").get<double>();
        m.best_accuracy_so_far = jm.at("best_accuracy_so_far").get<double>();
        row.push_back(m);
      }
      r.matrix.push_back(std::move(row));
    }
    if (doc.contains("config")) r.config_echo = doc.at("config");
  } catch (const nlohmann::json::exception& e) {
    fail(Status::IoError, std::string("report: malformed document: ") + e.what());
  }
  require(static_cast<int>(r.matrix.empty() ? 0 : r.matrix.back().size()) ==
              r.scene_count,
          Status::IoError, "report: matrix width disagrees with scene_count");
  return r;
}

std::string report_basename(const ContinualReport& report) {
  return report.method + "_seed" + std::to_string(report.seed) + "_" +
         report.config_hash;
}

std::string render_matrix_csv(const ContinualReport& report) {
  std::ostringstream os;
  os << "stage";
  for (int j = 0; j < report.scene_count; ++j) os << ",scene_" << j;
  os << "\n";
  for (std::size_t i = 0; i < report.matrix.size(); ++i) {
    os << (i + 1);
    for (int j = 0; j < report.scene_count; ++j) {
      os << ",";
      if (j < static_cast<int>(report.matrix[i].size())) {
        os << format_double(report.matrix[i][static_cast<std::size_t>(j)].accuracy);
      }
    }
    os << "\n";
  }
  return os.str();
}

void write_report_files(const ContinualReport& report, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  require(!ec, Status::IoError, "cannot create output directory: " + out_dir);
  const std::string base = (std::filesystem::path(out_dir) /
                            report_basename(report)).string();
  {
    std::ofstream os(base + ".report.json");
    require(os.good(), Status::IoError, "cannot write " + base + ".report.json");
    os << report_to_json(report).dump(2) << "\n";
    os.flush();
    require(os.good(), Status::IoError, "write failed: " + base + ".report.json");
  }
  {
    std::ofstream os(base + ".matrix.csv");
    require(os.good(), Status::IoError, "cannot write " + base + ".matrix.csv");
    os << render_matrix_csv(report);
    os.flush();
    require(os.good(), Status::IoError, "write failed: " + base + ".matrix.csv");
  }
}

ContinualReport load_report_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open report: " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(Status::IoError, std::string("report: JSON parse error: ") + e.what());
  }
  return report_from_json(doc);
}

}  // namespace checal
