#include "checal/sim.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace checal {

SyntheticScene generate_scene(int scene_id, const Aabb& box, int landmark_count,
                              Rng& rng) {
  require(!box.is_empty() && (box.extent().array() > 1e-9).all(),
          Status::InvalidInput, "generate_scene: box must be non-degenerate");
  require(landmark_count >= 50, Status::InvalidInput,
          "generate_scene: need at least 50 landmarks");
  SyntheticScene scene;
  scene.scene_id = scene_id;
  scene.bounds = box;
  scene.landmarks.resize(landmark_count, 3);
  for (int i = 0; i < landmark_count; ++i)
    for (int c = 0; c < 3; ++c)
      scene.landmarks(i, c) = rng.uniform(box.lo[c], box.hi[c]);
  scene.codebook.resize(static_cast<std::size_t>(landmark_count));
  for (auto& code : scene.codebook) code = rng.next_u64();
  return scene;
}

namespace {

Quat look_at_orientation(const Vec3& position, const Vec3& target) {
  Vec3 forward = target - position;
  require(forward.norm() > 1e-9, Status::InvalidInput,
          "look_at: camera coincides with target");
  forward.normalize();
  Vec3 up = Vec3::UnitZ();
  if (std::abs(forward.dot(up)) > 0.98) up = Vec3::UnitX();
  const Vec3 x_cam = up.cross(forward).normalized();
  const Vec3 y_cam = forward.cross(x_cam);
  Mat3 r;
  r.col(0) = x_cam;
  r.col(1) = y_cam;
  r.col(2) = forward;  // camera looks along its +z axis
  return Quat::from_matrix(r);
}

Vec3 orbit_direction(double theta, double sin_phi) {
  const double cos_phi = std::sqrt(std::max(0.0, 1.0 - sin_phi * sin_phi));
  return Vec3(cos_phi * std::cos(theta), cos_phi * std::sin(theta), sin_phi);
}

// Symmetric triangle wave in [-1, 1] with unit period.
double triangle_wave(double t) {
  const double u = t - std::floor(t);
  return u < 0.5 ? 4.0 * u - 1.0 : 3.0 - 4.0 * u;
}

}  // namespace

Trajectory generate_trajectory(const SyntheticScene& scene, int frame_count,
                               double clustering, Rng& rng) {
  require(frame_count >= 2, Status::InvalidInput,
          "generate_trajectory: need at least 2 frames");
  require(std::isfinite(clustering) && clustering >= 0.0 && clustering <= 1.0,
          Status::InvalidInput, "generate_trajectory: clustering in [0,1]");

  const Vec3 centroid = scene.landmarks.colwise().mean().transpose();
  const double radius = 1.2 * 0.5 * scene.bounds.diameter();
  const int n_cluster = static_cast<int>(std::lround(clustering * frame_count));
  const int n_sweep = frame_count - n_cluster;

  Trajectory traj;
  traj.poses.reserve(static_cast<std::size_t>(frame_count));

  // Cluster anchor: one sub-region of the orbit shell.
  const double theta_c = rng.uniform(0.0, 6.2831853071795864769);
  const double u_c = rng.uniform(-0.5, 0.5);
  traj.cluster_anchor = centroid + radius * orbit_direction(theta_c, u_c);
  traj.cluster_radius = n_cluster > 0 ? 0.3 * radius : 0.0;

  constexpr double two_pi = 6.2831853071795864769;
  const double revolutions = 3.0;
  // Elevation wave deliberately incommensurate with the azimuth quadrant
  // pattern (12.5 sign-cycles vs 12 quadrant crossings) so octant occupancy
  // stays balanced; integer or half-integer-per-revolution rates alias.
  const double wave_cycles = 12.5;

  auto emit = [&](double theta, double sin_phi, double rho) {
    const double u = std::clamp(sin_phi, -0.9, 0.9);
    const Vec3 pos = centroid + rho * orbit_direction(theta, u);
    Vec3 target = centroid;
    for (int c = 0; c < 3; ++c) target[c] += 0.01 * rng.normal();
    traj.poses.push_back(Pose{pos, look_at_orientation(pos, target)});
  };

  // Sweep: full orbit coverage with a fast elevation oscillation.
  for (int i = 0; i < n_sweep; ++i) {
    const double t = n_sweep > 1 ? static_cast<double>(i) /
                                       static_cast<double>(n_sweep)
                                 : 0.0;
    const double theta =
        two_pi * revolutions * t + 0.01 * rng.normal();
    const double sin_phi = 0.7 * triangle_wave(wave_cycles * t + 0.125) +
                           0.01 * rng.normal();
    const double rho = radius * (1.0 + 0.05 * std::sin(two_pi * 5.3 * t) +
                                 0.01 * rng.normal());
    emit(theta, sin_phi, rho);
  }

  // Cluster block: linger inside a narrow angular wedge around the anchor.
  for (int i = 0; i < n_cluster; ++i) {
    const double t = n_cluster > 1 ? static_cast<double>(i) /
                                         static_cast<double>(n_cluster)
                                   : 0.0;
    const double theta = theta_c + 0.10 * std::sin(two_pi * 3.3 * t) +
                         0.01 * rng.normal();
    const double sin_phi = u_c + 0.08 * std::sin(two_pi * 2.1 * t + 0.7) +
                           0.008 * rng.normal();
    const double rho = radius * (1.0 + 0.03 * std::sin(two_pi * 1.7 * t) +
                                 0.005 * rng.normal());
    emit(theta, sin_phi, rho);
  }
  return traj;
}

void RenderConfig::validate() const {
  require(points_per_frame >= 12, Status::InvalidInput,
          "render: points_per_frame must be >= 12");
  require(feature_dim >= 1, Status::InvalidInput,
          "render: feature_dim must be >= 1");
  require(std::isfinite(noise_sigma) && noise_sigma >= 0.0, Status::InvalidInput,
          "render: noise_sigma must be non-negative");
  require(std::isfinite(view_range) && view_range > 0.0, Status::InvalidInput,
          "render: view_range must be positive");
  require(cone_half_angle_deg > 0.0 && cone_half_angle_deg < 90.0,
          Status::InvalidInput, "render: cone half-angle must be in (0, 90)");
}

namespace {

// Fixed random Fourier encoder: smooth, position-informative features.
struct FeatureEncoder {
  Eigen::MatrixXd w;  // feature_dim x 3
  Eigen::VectorXd b;  // feature_dim

  FeatureEncoder(int feature_dim, std::uint64_t encoder_seed) {
    Rng rng(fnv1a64("feature_encoder", encoder_seed));
    w.resize(feature_dim, 3);
    b.resize(feature_dim);
    for (int i = 0; i < feature_dim; ++i) {
      // Frequency scale ~6 rad/m gives wavelengths near the box side, so
      // features decorrelate across the scene: a model only localizes
      // regions with training (or replay) support, which is what makes
      // buffer coverage matter. Informativeness is gated by the one-time
      // regressor oracle (held-out RMSE < 10% of scene diameter).
      for (int c = 0; c < 3; ++c) w(i, c) = 6.0 * rng.normal();
      b(i) = rng.uniform(0.0, 6.2831853071795864769);
    }
  }

  Eigen::VectorXd encode(const Vec3& world_point, std::uint64_t code) const {
    Eigen::VectorXd f = ((w * world_point + b).array().sin()).matrix();
    Rng jitter(code);
    for (Eigen::Index i = 0; i < f.size(); ++i) f(i) += 0.05 * jitter.normal();
    return f;
  }
};

}  // namespace

Frame render_frame(const SyntheticScene& scene, const Pose& pose,
                   const RenderConfig& config, Rng& rng) {
  config.validate();
  require(pose.orientation.is_unit(1e-6), Status::InvalidInput,
          "render_frame: pose orientation must be unit-norm");
  const RigidTransform cam_to_world = RigidTransform::from_pose(pose);
  const RigidTransform world_to_cam = cam_to_world.inverse();
  const double cos_half =
      std::cos(config.cone_half_angle_deg * 0.017453292519943295);

  std::vector<int> visible;
  visible.reserve(static_cast<std::size_t>(scene.landmark_count()));
  std::vector<Vec3> cam_pts;
  cam_pts.reserve(visible.capacity());
  for (int i = 0; i < scene.landmark_count(); ++i) {
    const Vec3 o = world_to_cam.apply(scene.landmarks.row(i).transpose());
    const double dist = o.norm();
    if (o.z() <= 0.0 || dist > config.view_range || o.z() < cos_half * dist)
      continue;
    visible.push_back(i);
    cam_pts.push_back(o);
  }
  require(static_cast<int>(visible.size()) >= 12, Status::VisibilityError,
          "render_frame: fewer than 12 visible landmarks");

  const int p = std::min(config.points_per_frame,
                         static_cast<int>(visible.size()));
  const auto pick = rng.sample_without_replacement(visible.size(),
                                                   static_cast<std::size_t>(p));

  const FeatureEncoder encoder(config.feature_dim, config.encoder_seed);
  Frame frame;
  frame.gt_pose = pose;
  frame.features.resize(p, config.feature_dim);
  frame.cam_points.resize(p, 3);
  frame.gt_coords.resize(p, 3);
  for (int r = 0; r < p; ++r) {
    const int li = visible[pick[static_cast<std::size_t>(r)]];
    const Vec3 o = cam_pts[pick[static_cast<std::size_t>(r)]];
    frame.cam_points.row(r) = o.transpose();
    // Construction identity: gt_coords is exactly the pose transform of
    // cam_points (bitwise), not the original landmark.
    frame.gt_coords.row(r) = cam_to_world.apply(o).transpose();
    Eigen::VectorXd f = encoder.encode(scene.landmarks.row(li).transpose(),
                                       scene.codebook[static_cast<std::size_t>(li)]);
    if (config.noise_sigma > 0.0)
      for (Eigen::Index j = 0; j < f.size(); ++j)
        f(j) += config.noise_sigma * rng.normal();
    frame.features.row(r) = f.transpose();
  }
  return frame;
}

namespace {

// Largest-remainder allocation proportional to scene volume, >= 1 each.
std::vector<int> allocate_centers(std::span<const SyntheticScene> scenes,
                                  int budget) {
  const int s = static_cast<int>(scenes.size());
  std::vector<int> alloc(static_cast<std::size_t>(s), 1);
  int remaining = budget - s;
  double total_volume = 0.0;
  for (const auto& scene : scenes) total_volume += scene.bounds.volume();
  require(total_volume > 0.0, Status::InvalidInput,
          "cluster centers: scenes have zero total volume");
  std::vector<double> fractional(static_cast<std::size_t>(s), 0.0);
  int assigned = 0;
  for (int i = 0; i < s; ++i) {
    const double share =
        static_cast<double>(remaining) * scenes[i].bounds.volume() / total_volume;
    const int whole = static_cast<int>(std::floor(share));
    alloc[static_cast<std::size_t>(i)] += whole;
    fractional[static_cast<std::size_t>(i)] = share - whole;
    assigned += whole;
  }
  std::vector<int> order(static_cast<std::size_t>(s));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return fractional[static_cast<std::size_t>(a)] >
           fractional[static_cast<std::size_t>(b)];
  });
  for (int r = 0; r < remaining - assigned; ++r)
    alloc[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] += 1;
  return alloc;
}

// Uniform-grid centroid partition of one scene's landmarks; cells ranked by
// occupancy (ties by linear index), farthest-point fill if short.
MatX3 scene_centers(const SyntheticScene& scene, int k) {
  require(k >= 1, Status::InvalidInput, "scene_centers: k must be >= 1");
  require(k <= scene.landmark_count(), Status::InvalidInput,
          "scene_centers: k exceeds landmark count");
  const int g = static_cast<int>(
      std::ceil(std::cbrt(static_cast<double>(k)) - 1e-12));
  const int cells = g * g * g;
  std::vector<Vec3> sums(static_cast<std::size_t>(cells), Vec3::Zero());
  std::vector<int> counts(static_cast<std::size_t>(cells), 0);
  const Vec3 lo = scene.bounds.lo;
  const Vec3 ext = scene.bounds.extent();
  for (int i = 0; i < scene.landmark_count(); ++i) {
    int idx[3];
    for (int c = 0; c < 3; ++c) {
      const double u = (scene.landmarks(i, c) - lo[c]) / std::max(ext[c], 1e-12);
      idx[c] = std::min(g - 1, std::max(0, static_cast<int>(u * g)));
    }
    const int cell = (idx[2] * g + idx[1]) * g + idx[0];
    sums[static_cast<std::size_t>(cell)] += scene.landmarks.row(i).transpose();
    counts[static_cast<std::size_t>(cell)] += 1;
  }
  std::vector<int> cell_order;
  for (int cell = 0; cell < cells; ++cell)
    if (counts[static_cast<std::size_t>(cell)] > 0) cell_order.push_back(cell);
  std::stable_sort(cell_order.begin(), cell_order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });

  std::vector<Vec3> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  for (std::size_t r = 0; r < cell_order.size() && static_cast<int>(chosen.size()) < k;
       ++r) {
    const int cell = cell_order[r];
    chosen.push_back(sums[static_cast<std::size_t>(cell)] /
                     static_cast<double>(counts[static_cast<std::size_t>(cell)]));
  }
  // Grid produced fewer nonempty cells than k: add landmarks maximizing the
  // minimum distance to already-chosen centers (deterministic).
  while (static_cast<int>(chosen.size()) < k) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < scene.landmark_count(); ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (const auto& c : chosen)
        d = std::min(d, (scene.landmarks.row(i).transpose() - c).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    require(best_d > 0.0, Status::DegenerateConfiguration,
            "scene_centers: landmarks collapse onto chosen centers");
    chosen.push_back(scene.landmarks.row(best).transpose());
  }
  MatX3 out(k, 3);
  for (int i = 0; i < k; ++i) out.row(i) = chosen[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

ClusterCenters build_cluster_centers(std::span<const SyntheticScene> scenes,
                                     int k_total, const ClusterCenters* existing) {
  require(!scenes.empty(), Status::InvalidInput,
          "cluster centers: no scenes given");
  const int base = existing ? existing->count() : 0;
  const int budget = k_total - base;
  require(budget >= static_cast<int>(scenes.size()), Status::InvalidInput,
          "cluster centers: k_total leaves fewer than one center per scene");
  const std::vector<int> alloc = allocate_centers(scenes, budget);
  MatX3 centers(k_total, 3);
  int row = 0;
  if (existing) {
    centers.topRows(base) = existing->points();
    row = base;
  }
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const MatX3 sc = scene_centers(scenes[i], alloc[i]);
    centers.middleRows(row, alloc[i]) = sc;
    row += alloc[i];
  }
  require(row == k_total, Status::ContractViolation,
          "cluster centers: allocation mismatch");
  return ClusterCenters(centers);
}

SceneStream make_stream(const SyntheticScene& scene, const Trajectory& trajectory,
                        const RenderConfig& config, double train_fraction,
                        Rng& rng) {
  config.validate();
  const int n = static_cast<int>(trajectory.poses.size());
  require(n >= 2, Status::InvalidInput, "make_stream: need at least 2 poses");
  require(train_fraction > 0.0 && train_fraction < 1.0, Status::InvalidInput,
          "make_stream: train_fraction must be in (0, 1)");
  int n_train = static_cast<int>(std::llround(train_fraction * n));
  n_train = std::max(1, std::min(n - 1, n_train));
  const int n_test = n - n_train;

  std::vector<bool> is_test(static_cast<std::size_t>(n), false);
  for (int j = 0; j < n_test; ++j) {
    const int idx = static_cast<int>(
        (static_cast<double>(j) + 0.5) * static_cast<double>(n) / n_test);
    is_test[static_cast<std::size_t>(std::min(idx, n - 1))] = true;
  }

  SceneStream stream;
  stream.scene_id = scene.scene_id;
  stream.train_pose_bounds = Aabb::empty();
  for (int i = 0; i < n; ++i) {
    Rng frame_rng = rng.child("frame", static_cast<std::uint64_t>(i));
    Frame f = render_frame(scene, trajectory.poses[static_cast<std::size_t>(i)],
                           config, frame_rng);
    if (is_test[static_cast<std::size_t>(i)]) {
      stream.test.push_back(std::move(f));
    } else {
      stream.train_pose_bounds.expand(f.gt_pose.position);
      stream.train.push_back(std::move(f));
    }
  }
  return stream;
}

namespace {

void write_num(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

void write_pose(std::ostream& os, const Pose& pose) {
  const double f[7] = {pose.position.x(),   pose.position.y(),
                       pose.position.z(),   pose.orientation.w,
                       pose.orientation.x,  pose.orientation.y,
                       pose.orientation.z};
  for (int i = 0; i < 7; ++i) {
    if (i) os << " ";
    write_num(os, f[i]);
  }
}

void write_frame(std::ostream& os, const Frame& f) {
  os << "frame " << f.point_count() << " " << f.features.cols() << "\n";
  os << "pose ";
  write_pose(os, f.gt_pose);
  os << "\n";
  for (int r = 0; r < f.point_count(); ++r) {
    os << "pt";
    for (int c = 0; c < 3; ++c) {
      os << " ";
      write_num(os, f.cam_points(r, c));
    }
    for (int c = 0; c < 3; ++c) {
      os << " ";
      write_num(os, f.gt_coords(r, c));
    }
    for (Eigen::Index c = 0; c < f.features.cols(); ++c) {
      os << " ";
      write_num(os, f.features(r, c));
    }
    os << "\n";
  }
}

Frame read_frame(std::istream& is) {
  std::string tok;
  int p = 0, d = 0;
  is >> tok >> p >> d;
  require(static_cast<bool>(is) && tok == "frame" && p >= 1 && d >= 1,
          Status::IoError, "stream dump: bad frame header");
  Frame f;
  is >> tok;
  require(static_cast<bool>(is) && tok == "pose", Status::IoError,
          "stream dump: missing pose");
  double v[7];
  for (double& x : v) is >> x;
  require(static_cast<bool>(is), Status::IoError, "stream dump: bad pose");
  f.gt_pose.position = Vec3(v[0], v[1], v[2]);
  f.gt_pose.orientation = Quat{v[3], v[4], v[5], v[6]};
  f.cam_points.resize(p, 3);
  f.gt_coords.resize(p, 3);
  f.features.resize(p, d);
  for (int r = 0; r < p; ++r) {
    is >> tok;
    require(static_cast<bool>(is) && tok == "pt", Status::IoError,
            "stream dump: bad point row");
    for (int c = 0; c < 3; ++c) is >> f.cam_points(r, c);
    for (int c = 0; c < 3; ++c) is >> f.gt_coords(r, c);
    for (int c = 0; c < d; ++c) is >> f.features(r, c);
    require(static_cast<bool>(is), Status::IoError,
            "stream dump: truncated point row");
  }
  return f;
}

}  // namespace

void dump_stream(const SceneStream& stream, std::ostream& os) {
  os << "checal_stream 1\n";
  os << "scene " << stream.scene_id << " train " << stream.train.size()
     << " test " << stream.test.size() << "\n";
  os << "train_bounds ";
  for (int c = 0; c < 3; ++c) {
    write_num(os, stream.train_pose_bounds.lo[c]);
    os << " ";
  }
  for (int c = 0; c < 3; ++c) {
    write_num(os, stream.train_pose_bounds.hi[c]);
    os << (c == 2 ? "\n" : " ");
  }
  for (const auto& f : stream.train) write_frame(os, f);
  for (const auto& f : stream.test) write_frame(os, f);
}

void dump_stream_file(const SceneStream& stream, const std::string& path) {
  std::ofstream os(path);
  require(os.good(), Status::IoError, "cannot open for writing: " + path);
  dump_stream(stream, os);
  os.flush();
  require(os.good(), Status::IoError, "write failed: " + path);
}

SceneStream load_stream(std::istream& is) {
  std::string magic, tok;
  int version = 0;
  is >> magic >> version;
  require(static_cast<bool>(is) && magic == "checal_stream" && version == 1,
          Status::IoError, "stream dump: bad header");
  SceneStream stream;
  std::size_t n_train = 0, n_test = 0;
  is >> tok >> stream.scene_id;
  require(static_cast<bool>(is) && tok == "scene", Status::IoError,
          "stream dump: bad scene line");
  is >> tok >> n_train;
  require(static_cast<bool>(is) && tok == "train", Status::IoError,
          "stream dump: bad train count");
  is >> tok >> n_test;
  require(static_cast<bool>(is) && tok == "test", Status::IoError,
          "stream dump: bad test count");
  is >> tok;
  require(static_cast<bool>(is) && tok == "train_bounds", Status::IoError,
          "stream dump: bad bounds line");
  for (int c = 0; c < 3; ++c) is >> stream.train_pose_bounds.lo[c];
  for (int c = 0; c < 3; ++c) is >> stream.train_pose_bounds.hi[c];
  require(static_cast<bool>(is), Status::IoError, "stream dump: bad bounds");
  for (std::size_t i = 0; i < n_train; ++i) stream.train.push_back(read_frame(is));
  for (std::size_t i = 0; i < n_test; ++i) stream.test.push_back(read_frame(is));
  return stream;
}

SceneStream load_stream_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open for reading: " + path);
  return load_stream(is);
}

std::uint64_t stream_content_hash(const SceneStream& stream) {
  std::ostringstream os;
  dump_stream(stream, os);
  const std::string s = os.str();
  return fnv1a64(s);
}

}  // namespace checal
