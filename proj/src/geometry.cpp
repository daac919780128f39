#include "checal/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace checal {

const char* status_name(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::InvalidInput: return "invalid_input";
    case Status::DimensionMismatch: return "dimension_mismatch";
    case Status::DegenerateConfiguration: return "degenerate_configuration";
    case Status::NoConsensus: return "no_consensus";
    case Status::EmptyBuffer: return "empty_buffer";
    case Status::InsufficientSamples: return "insufficient_samples";
    case Status::VisibilityError: return "visibility_error";
    case Status::TrainingDivergence: return "training_divergence";
    case Status::ContractViolation: return "contract_violation";
    case Status::IoError: return "io_error";
    case Status::ConfigError: return "config_error";
  }
  return "unknown";
}

double Quat::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

double Quat::dot(const Quat& o) const {
  return w * o.w + x * o.x + y * o.y + z * o.z;
}

bool Quat::is_unit(double tol) const {
  return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) &&
         std::isfinite(z) && std::abs(norm() - 1.0) <= tol;
}

Quat Quat::normalized() const {
  require(std::isfinite(w) && std::isfinite(x) && std::isfinite(y) &&
              std::isfinite(z),
          Status::InvalidInput, "quaternion has non-finite components");
  const double n = norm();
  require(n > 1e-12, Status::InvalidInput,
          "cannot normalize near-zero quaternion");
  return {w / n, x / n, y / n, z / n};
}

Quat Quat::canonicalized() const {
  Quat q = normalized();
  if (q.w < 0.0 || (q.w == 0.0 && (q.x < 0.0 || (q.x == 0.0 && (q.y < 0.0 || (q.y == 0.0 && q.z < 0.0)))))) {
    q = {-q.w, -q.x, -q.y, -q.z};
  }
  return q;
}

Vec3 Quat::rotate(const Vec3& v) const {
  // v' = v + 2*u x (u x v + w v), u = (x,y,z)
  const Vec3 u(x, y, z);
  const Vec3 t = 2.0 * u.cross(v);
  return v + w * t + u.cross(t);
}

Mat3 Quat::to_matrix() const {
  Mat3 m;
  const double xx = x * x, yy = y * y, zz = z * z;
  const double xy = x * y, xz = x * z, yz = y * z;
  const double wx = w * x, wy = w * y, wz = w * z;
  m << 1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy),
      2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx),
      2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy);
  return m;
}

Quat Quat::from_matrix(const Mat3& r) {
  require(r.allFinite(), Status::InvalidInput, "rotation matrix is non-finite");
  require((r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6 &&
              std::abs(r.determinant() - 1.0) < 1e-6,
          Status::InvalidInput, "matrix is not a rotation");
  // Shepperd's method: pick the numerically dominant diagonal branch.
  Quat q;
  const double trace = r.trace();
  if (trace > 0.0) {
    double s = std::sqrt(trace + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r(2, 1) - r(1, 2)) / s;
    q.y = (r(0, 2) - r(2, 0)) / s;
    q.z = (r(1, 0) - r(0, 1)) / s;
  } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q.w = (r(2, 1) - r(1, 2)) / s;
    q.x = 0.25 * s;
    q.y = (r(0, 1) + r(1, 0)) / s;
    q.z = (r(0, 2) + r(2, 0)) / s;
  } else if (r(1, 1) > r(2, 2)) {
    double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
    q.w = (r(0, 2) - r(2, 0)) / s;
    q.x = (r(0, 1) + r(1, 0)) / s;
    q.y = 0.25 * s;
    q.z = (r(1, 2) + r(2, 1)) / s;
  } else {
    double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
    q.w = (r(1, 0) - r(0, 1)) / s;
    q.x = (r(0, 2) + r(2, 0)) / s;
    q.y = (r(1, 2) + r(2, 1)) / s;
    q.z = 0.25 * s;
  }
  return q.canonicalized();
}

Quat Quat::from_axis_angle(const Vec3& axis, double angle_rad) {
  const double n = axis.norm();
  require(n > 1e-12, Status::InvalidInput, "axis must be non-zero");
  const double half = 0.5 * angle_rad;
  const double s = std::sin(half) / n;
  Quat q{std::cos(half), axis.x() * s, axis.y() * s, axis.z() * s};
  return q.canonicalized();
}

double angular_distance(const Quat& a, const Quat& b) {
  const Quat qa = a.normalized();
  Quat qb = b.normalized();
  if (qa.dot(qb) < 0.0) qb = Quat{-qb.w, -qb.x, -qb.y, -qb.z};
  // 4*atan2(|qa-qb|, |qa+qb|) is well conditioned at both ends of [0, pi];
  // the naive 2*acos(|dot|) cannot resolve angles below ~1.5e-8 rad (the
  // acos step at dot = 1).
  auto sq = [](double v) { return v * v; };
  const double diff = std::sqrt(sq(qa.w - qb.w) + sq(qa.x - qb.x) +
                                sq(qa.y - qb.y) + sq(qa.z - qb.z));
  const double sum = std::sqrt(sq(qa.w + qb.w) + sq(qa.x + qb.x) +
                               sq(qa.y + qb.y) + sq(qa.z + qb.z));
  return 4.0 * std::atan2(diff, sum);
}

double hybrid_pose_distance(const Pose& a, const Pose& b, double lambda) {
  require(lambda >= 0.0, Status::InvalidInput, "lambda must be non-negative");
  require(a.position.allFinite() && b.position.allFinite(),
          Status::InvalidInput, "pose positions must be finite");
  return (a.position - b.position).norm() +
         lambda * angular_distance(a.orientation, b.orientation);
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation = rotation * inner.rotation;
  out.translation = rotation * inner.translation + translation;
  return out;
}

Pose RigidTransform::to_pose() const {
  return Pose{translation, Quat::from_matrix(rotation)};
}

RigidTransform RigidTransform::from_pose(const Pose& pose) {
  RigidTransform t;
  t.rotation = pose.orientation.normalized().to_matrix();
  t.translation = pose.position;
  return t;
}

PoseError pose_error(const Pose& estimate, const Pose& ground_truth) {
  PoseError e;
  e.translation_m = (estimate.position - ground_truth.position).norm();
  constexpr double rad2deg = 57.295779513082320877;
  e.rotation_deg =
      angular_distance(estimate.orientation, ground_truth.orientation) * rad2deg;
  return e;
}

Aabb Aabb::empty() {
  Aabb b;
  b.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  b.hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  return b;
}

bool Aabb::is_empty() const { return (hi.array() < lo.array()).any(); }

void Aabb::expand(const Vec3& p) {
  lo = lo.cwiseMin(p);
  hi = hi.cwiseMax(p);
}

void Aabb::expand(const Aabb& other) {
  if (other.is_empty()) return;
  lo = lo.cwiseMin(other.lo);
  hi = hi.cwiseMax(other.hi);
}

bool Aabb::contains(const Vec3& p, double tol) const {
  return (p.array() >= lo.array() - tol).all() &&
         (p.array() <= hi.array() + tol).all();
}

double Aabb::volume() const {
  if (is_empty()) return 0.0;
  const Vec3 e = extent();
  return e.x() * e.y() * e.z();
}

Vec3 Aabb::normalize_point(const Vec3& p) const {
  require(!is_empty(), Status::InvalidInput, "cannot normalize by empty box");
  Vec3 u;
  for (int i = 0; i < 3; ++i) {
    const double e = hi[i] - lo[i];
    u[i] = e > 1e-12 ? (p[i] - lo[i]) / e : 0.0;
  }
  return u;
}

Vec3 Aabb::denormalize_point(const Vec3& u) const {
  require(!is_empty(), Status::InvalidInput, "cannot denormalize by empty box");
  return lo + u.cwiseProduct(extent());
}

RigidTransform kabsch(const MatX3& src, const MatX3& dst) {
  require(src.rows() == dst.rows(), Status::DimensionMismatch,
          "kabsch: point sets differ in size");
  require(src.rows() >= 3, Status::DegenerateConfiguration,
          "kabsch: need at least 3 correspondences");
  require(src.allFinite() && dst.allFinite(), Status::InvalidInput,
          "kabsch: non-finite coordinates");

  const Eigen::RowVector3d src_mean = src.colwise().mean();
  const Eigen::RowVector3d dst_mean = dst.colwise().mean();
  const MatX3 p = src.rowwise() - src_mean;
  const MatX3 q = dst.rowwise() - dst_mean;

  const Mat3 cov = p.transpose() * q;
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();

  // Collinear/coincident source points leave the rotation underdetermined:
  // the two smallest singular values of the cross-covariance vanish.
  const Eigen::Vector3d sv = svd.singularValues();
  const double scale = std::max(sv(0), 1e-300);
  require(sv(1) / scale > 1e-9, Status::DegenerateConfiguration,
          "kabsch: degenerate (collinear or coincident) point configuration");

  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;

  RigidTransform t;
  t.rotation = v * d * u.transpose();
  t.translation = dst_mean.transpose() - t.rotation * src_mean.transpose();
  return t;
}

RansacResult ransac_kabsch(const MatX3& src, const MatX3& dst,
                           const RansacConfig& config, Rng& rng) {
  require(src.rows() == dst.rows(), Status::DimensionMismatch,
          "ransac: point sets differ in size");
  require(config.iterations >= 1, Status::InvalidInput,
          "ransac: iterations must be positive");
  require(config.inlier_threshold > 0.0, Status::InvalidInput,
          "ransac: inlier threshold must be positive");
  require(config.min_inliers >= 3, Status::InvalidInput,
          "ransac: min_inliers must be at least 3");
  const int n = static_cast<int>(src.rows());
  require(n >= 3, Status::NoConsensus, "ransac: fewer than 3 correspondences");

  std::vector<int> best_inliers;
  int iterations_used = 0;
  for (int it = 0; it < config.iterations; ++it) {
    ++iterations_used;
    const auto pick = rng.sample_without_replacement(static_cast<std::size_t>(n), 3);
    MatX3 s(3, 3), d(3, 3);
    for (int r = 0; r < 3; ++r) {
      s.row(r) = src.row(static_cast<int>(pick[r]));
      d.row(r) = dst.row(static_cast<int>(pick[r]));
    }
    RigidTransform hyp;
    try {
      hyp = kabsch(s, d);
    } catch (const Error& e) {
      if (e.status() == Status::DegenerateConfiguration) continue;
      throw;
    }
    std::vector<int> inliers;
    inliers.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const Vec3 r = hyp.apply(src.row(i).transpose()) - dst.row(i).transpose();
      if (r.norm() < config.inlier_threshold) inliers.push_back(i);
    }
    // Strict improvement keeps the earliest-iteration winner on ties.
    if (inliers.size() > best_inliers.size()) best_inliers = std::move(inliers);
  }

  require(static_cast<int>(best_inliers.size()) >= config.min_inliers,
          Status::NoConsensus, "ransac: no model reached the inlier quorum");

  MatX3 s(best_inliers.size(), 3), d(best_inliers.size(), 3);
  for (std::size_t r = 0; r < best_inliers.size(); ++r) {
    s.row(static_cast<int>(r)) = src.row(best_inliers[r]);
    d.row(static_cast<int>(r)) = dst.row(best_inliers[r]);
  }
  RansacResult out;
  out.transform = kabsch(s, d);
  out.inliers = std::move(best_inliers);
  out.iterations_used = iterations_used;
  return out;
}

}  // namespace checal
