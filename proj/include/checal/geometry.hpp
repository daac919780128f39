#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "checal/error.hpp"
#include "checal/rng.hpp"

namespace checal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3>;

// Unit quaternion, stored w-first. Canonical form keeps w >= 0 so that the
// two antipodal encodings of one rotation serialize identically.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static Quat identity() { return {1.0, 0.0, 0.0, 0.0}; }

  double norm() const;
  double dot(const Quat& other) const;
  Quat normalized() const;     // throws InvalidInput on near-zero or non-finite
  Quat canonicalized() const;  // normalized, then sign-flipped to w >= 0
  Quat conjugate() const { return {w, -x, -y, -z}; }
  bool is_unit(double tol = 1e-6) const;

  Vec3 rotate(const Vec3& v) const;
  Mat3 to_matrix() const;
  static Quat from_matrix(const Mat3& r);  // throws InvalidInput if not a rotation
  static Quat from_axis_angle(const Vec3& axis, double angle_rad);
};

// Geodesic distance between rotations in radians, in [0, pi]. Invariant
// under the quaternion double cover: Ang(q, -q) == 0.
double angular_distance(const Quat& a, const Quat& b);

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::identity();
};

// Hybrid pose-space metric: Euclidean translation distance plus
// lambda-weighted angular distance (radians).
double hybrid_pose_distance(const Pose& a, const Pose& b, double lambda);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  RigidTransform compose(const RigidTransform& inner) const;  // this ∘ inner
  Pose to_pose() const;
  static RigidTransform from_pose(const Pose& pose);
};

struct PoseError {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

PoseError pose_error(const Pose& estimate, const Pose& ground_truth);

// Axis-aligned box used for pose-space normalization and scene bounds.
struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  static Aabb empty();
  bool is_empty() const;
  void expand(const Vec3& p);
  void expand(const Aabb& other);
  bool contains(const Vec3& p, double tol = 0.0) const;
  Vec3 extent() const { return hi - lo; }
  double diameter() const { return extent().norm(); }
  double volume() const;
  Vec3 center() const { return 0.5 * (lo + hi); }
  // Map into [0,1]^3; axes with near-zero extent collapse to 0.
  Vec3 normalize_point(const Vec3& p) const;
  Vec3 denormalize_point(const Vec3& u) const;
};

// Least-squares rigid alignment (Kabsch): returns T with T(src[i]) ~= dst[i].
// Requires >= 3 points and a non-degenerate (non-collinear) source spread.
RigidTransform kabsch(const MatX3& src, const MatX3& dst);

struct RansacConfig {
  int iterations = 256;
  double inlier_threshold = 0.05;  // meters, on |T(src) - dst|
  int min_inliers = 3;
};

struct RansacResult {
  RigidTransform transform;
  std::vector<int> inliers;  // ascending indices into src/dst
  int iterations_used = 0;
};

// Robust 3D-3D alignment. Minimal 3-point hypotheses, consensus scoring,
// final refit on the best inlier set. Throws NoConsensus when the best
// model supports fewer than min_inliers points.
RansacResult ransac_kabsch(const MatX3& src, const MatX3& dst,
                           const RansacConfig& config, Rng& rng);

}  // namespace checal
