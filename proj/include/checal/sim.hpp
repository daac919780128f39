#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "checal/geometry.hpp"
#include "checal/rng.hpp"
#include "checal/scr_head.hpp"

namespace checal {

// A scene is a cloud of landmarks in a world-frame box; distinct scenes
// occupy disjoint boxes (unified world frame).
struct SyntheticScene {
  int scene_id = 0;
  MatX3 landmarks;                      // L x 3, inside bounds
  Aabb bounds;                          // scene box
  std::vector<std::uint64_t> codebook;  // per-landmark descriptor seed

  int landmark_count() const { return static_cast<int>(landmarks.rows()); }
};

SyntheticScene generate_scene(int scene_id, const Aabb& box, int landmark_count,
                              Rng& rng);

// One synthetic observation: per-point features with ground-truth camera
// pose, camera-frame points, and world-frame scene coordinates.
struct Frame {
  Pose gt_pose;
  Eigen::MatrixXd features;  // P x feature_dim
  MatX3 cam_points;          // P x 3
  MatX3 gt_coords;           // P x 3 (exactly transform(gt_pose) * cam_points)

  int point_count() const { return static_cast<int>(features.rows()); }
};

// Orbit around the landmark centroid. `clustering` in [0,1] is the fraction
// of frames confined to one angular sub-region (the trailing block of the
// path); the region is reported so tests can count containment.
struct Trajectory {
  std::vector<Pose> poses;
  Vec3 cluster_anchor = Vec3::Zero();
  double cluster_radius = 0.0;  // 0 when clustering == 0
};

Trajectory generate_trajectory(const SyntheticScene& scene, int frame_count,
                               double clustering, Rng& rng);

struct RenderConfig {
  int points_per_frame = 30;
  int feature_dim = 16;
  double noise_sigma = 0.01;
  double view_range = 6.0;
  double cone_half_angle_deg = 45.0;
  std::uint64_t encoder_seed = 7;  // fixed random feature encoder, global

  void validate() const;
};

// Samples visible landmarks (view cone + range, no occlusion) and encodes
// them: sin(W * world_pos + b) + codebook jitter + Gaussian noise.
Frame render_frame(const SyntheticScene& scene, const Pose& pose,
                   const RenderConfig& config, Rng& rng);

// Volume-proportional allocation across scenes, then uniform-grid centroid
// partitioning of each scene's landmarks; farthest-point fill when a grid
// yields fewer nonempty cells than the scene's share. When `existing` is
// given its centers are kept as a prefix and only k_total - existing->count()
// new centers are built (per-scene-append variant).
ClusterCenters build_cluster_centers(std::span<const SyntheticScene> scenes,
                                     int k_total,
                                     const ClusterCenters* existing = nullptr);

struct SceneStream {
  int scene_id = 0;
  std::vector<Frame> train;  // trajectory order
  std::vector<Frame> test;   // strided across the trajectory
  Aabb train_pose_bounds;    // pose-normalization box (train positions)
};

SceneStream make_stream(const SyntheticScene& scene, const Trajectory& trajectory,
                        const RenderConfig& config, double train_fraction,
                        Rng& rng);

void dump_stream(const SceneStream& stream, std::ostream& os);
void dump_stream_file(const SceneStream& stream, const std::string& path);
SceneStream load_stream(std::istream& is);
SceneStream load_stream_file(const std::string& path);
std::uint64_t stream_content_hash(const SceneStream& stream);

}  // namespace checal
