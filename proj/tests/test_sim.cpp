#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include "checal/error.hpp"
#include "checal/geometry.hpp"
#include "checal/rng.hpp"
#include "checal/sim.hpp"

using namespace checal;

namespace {

template <typename F>
Status thrown_status(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.status();
  }
  return Status::Ok;
}

Aabb unit_box_at(double x0) {
  Aabb box;
  box.lo = Vec3(x0, 0.0, 0.0);
  box.hi = Vec3(x0 + 1.0, 1.0, 1.0);
  return box;
}

SyntheticScene quick_scene(std::uint64_t seed, double x0 = 0.0,
                           int landmarks = 120) {
  Rng rng(seed);
  return generate_scene(0, unit_box_at(x0), landmarks, rng);
}

}  // namespace

TEST_CASE("generate_scene: determinism, containment, validation") {
  Rng a(5), b(5);
  const SyntheticScene sa = generate_scene(3, unit_box_at(0.0), 80, a);
  const SyntheticScene sb = generate_scene(3, unit_box_at(0.0), 80, b);
  CHECK(sa.landmarks == sb.landmarks);
  CHECK(sa.codebook == sb.codebook);
  CHECK(sa.scene_id == 3);
  CHECK(sa.landmark_count() == 80);
  CHECK(sa.codebook.size() == 80);

  // fuzz: landmarks always inside their box
  Rng fuzz(99);
  for (int t = 0; t < 1000; ++t) {
    Aabb box;
    const double cx = fuzz.uniform(-5.0, 5.0);
    const double w = fuzz.uniform(0.2, 3.0);
    box.lo = Vec3(cx, -w, 0.5);
    box.hi = Vec3(cx + w, w, 0.5 + 2.0 * w);
    const SyntheticScene s = generate_scene(t, box, 50, fuzz);
    for (int i = 0; i < s.landmark_count(); ++i)
      CHECK(box.contains(s.landmarks.row(i).transpose(), 0.0));
  }

  // disjoint boxes give non-overlapping landmark clouds
  Rng c(7);
  const SyntheticScene left = generate_scene(0, unit_box_at(0.0), 60, c);
  const SyntheticScene right = generate_scene(1, unit_box_at(2.5), 60, c);
  for (int i = 0; i < left.landmark_count(); ++i)
    CHECK_FALSE(right.bounds.contains(left.landmarks.row(i).transpose(), 0.0));

  Rng d(8);
  Aabb flat = unit_box_at(0.0);
  flat.hi.z() = flat.lo.z();
  CHECK(thrown_status([&] { generate_scene(0, flat, 60, d); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] {
          Aabb ok = unit_box_at(0.0);
          generate_scene(0, ok, 10, d);
        }) == Status::InvalidInput);
}

TEST_CASE("generate_trajectory: validation and basic shape") {
  const SyntheticScene scene = quick_scene(11);
  Rng rng(12);
  const Trajectory traj = generate_trajectory(scene, 100, 0.0, rng);
  CHECK(traj.poses.size() == 100);
  CHECK(traj.cluster_radius == 0.0);
  for (const auto& pose : traj.poses) {
    CHECK(pose.orientation.is_unit(1e-9));
    CHECK(pose.position.allFinite());
  }

  // determinism
  Rng r1(13), r2(13);
  const Trajectory t1 = generate_trajectory(scene, 50, 0.5, r1);
  const Trajectory t2 = generate_trajectory(scene, 50, 0.5, r2);
  for (std::size_t i = 0; i < t1.poses.size(); ++i) {
    CHECK(t1.poses[i].position == t2.poses[i].position);
    CHECK(t1.poses[i].orientation.w == t2.poses[i].orientation.w);
  }

  Rng bad(14);
  CHECK(thrown_status([&] { generate_trajectory(scene, 1, 0.0, bad); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] { generate_trajectory(scene, 10, -0.1, bad); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] { generate_trajectory(scene, 10, 1.0001, bad); }) ==
        Status::InvalidInput);
}

TEST_CASE("clustering 0.9 confines at least 85 percent of positions") {
  const SyntheticScene scene = quick_scene(21);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const Trajectory traj = generate_trajectory(scene, 2000, 0.9, rng);
    REQUIRE(traj.cluster_radius > 0.0);
    int inside = 0;
    for (const auto& pose : traj.poses)
      if ((pose.position - traj.cluster_anchor).norm() <= traj.cluster_radius)
        ++inside;
    INFO("seed " << seed << " inside " << inside);
    CHECK(inside >= 1700);  // 85% of 2000
  }
}

TEST_CASE("clustering 0 spreads positions evenly over octants") {
  const SyntheticScene scene = quick_scene(22);
  // chi-square over the 8 octants about the mean position; critical value
  // for df=7 at alpha=0.01 is 18.4753.
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    const Trajectory traj = generate_trajectory(scene, 2000, 0.0, rng);
    Vec3 mean = Vec3::Zero();
    for (const auto& pose : traj.poses) mean += pose.position;
    mean /= static_cast<double>(traj.poses.size());
    std::array<int, 8> counts{};
    for (const auto& pose : traj.poses) {
      const Vec3 d = pose.position - mean;
      const int oct = (d.x() > 0 ? 1 : 0) | (d.y() > 0 ? 2 : 0) |
                      (d.z() > 0 ? 4 : 0);
      counts[static_cast<std::size_t>(oct)] += 1;
    }
    const double expected = 2000.0 / 8.0;
    double chi2 = 0.0;
    for (int c : counts) {
      const double diff = c - expected;
      chi2 += diff * diff / expected;
    }
    INFO("seed " << seed << " chi2 " << chi2);
    CHECK(chi2 < 18.4753);
  }
}

TEST_CASE("consecutive poses stay close in normalized hybrid distance") {
  const SyntheticScene scene = quick_scene(23);
  Rng rng(301);
  const Trajectory traj = generate_trajectory(scene, 2000, 0.0, rng);

  Aabb box = Aabb::empty();
  for (const auto& pose : traj.poses) box.expand(pose.position);

  std::vector<double> gaps;
  for (std::size_t i = 1; i < traj.poses.size(); ++i) {
    const Vec3 a = box.normalize_point(traj.poses[i - 1].position);
    const Vec3 b = box.normalize_point(traj.poses[i].position);
    const double ang = angular_distance(traj.poses[i - 1].orientation,
                                        traj.poses[i].orientation);
    gaps.push_back((a - b).norm() + 1.0 * ang);
  }
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double median = gaps[gaps.size() / 2];
  INFO("median gap " << median);
  CHECK(median < 0.1);
}

TEST_CASE("render_frame: construction identity and determinism") {
  const SyntheticScene scene = quick_scene(31);
  Rng traj_rng(32);
  const Trajectory traj = generate_trajectory(scene, 20, 0.0, traj_rng);
  RenderConfig config;

  for (int i = 0; i < 20; ++i) {
    Rng rng(400 + static_cast<std::uint64_t>(i));
    const Frame f = render_frame(scene, traj.poses[static_cast<std::size_t>(i)],
                                 config, rng);
    REQUIRE(f.point_count() >= 12);
    CHECK(f.point_count() <= config.points_per_frame);
    CHECK(f.features.cols() == config.feature_dim);
    CHECK(f.features.allFinite());

    // gt_coords is bitwise the pose transform of cam_points
    const RigidTransform cam_to_world = RigidTransform::from_pose(f.gt_pose);
    for (int r = 0; r < f.point_count(); ++r) {
      const Vec3 w = cam_to_world.apply(f.cam_points.row(r).transpose());
      CHECK(w.x() == f.gt_coords(r, 0));
      CHECK(w.y() == f.gt_coords(r, 1));
      CHECK(w.z() == f.gt_coords(r, 2));
    }
  }

  // same seed, same frame
  Rng a(500), b(500);
  const Frame fa = render_frame(scene, traj.poses[0], config, a);
  const Frame fb = render_frame(scene, traj.poses[0], config, b);
  CHECK(fa.features == fb.features);
  CHECK(fa.cam_points == fb.cam_points);
  CHECK(fa.gt_coords == fb.gt_coords);
}

TEST_CASE("render_frame: zero noise makes features a function of the landmark") {
  const SyntheticScene scene = quick_scene(41, 0.0, 100);
  Rng traj_rng(42);
  const Trajectory traj = generate_trajectory(scene, 5, 0.0, traj_rng);
  RenderConfig config;
  config.noise_sigma = 0.0;
  config.points_per_frame = 100;  // take every visible landmark

  Rng r1(601), r2(9944);  // deliberately different sampling streams
  const Frame f1 = render_frame(scene, traj.poses[0], config, r1);
  const Frame f2 = render_frame(scene, traj.poses[0], config, r2);
  REQUIRE(f1.point_count() == f2.point_count());

  auto sorted_rows = [](const Frame& f) {
    std::vector<int> order(static_cast<std::size_t>(f.point_count()));
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      for (int c = 0; c < 3; ++c) {
        if (f.cam_points(x, c) != f.cam_points(y, c))
          return f.cam_points(x, c) < f.cam_points(y, c);
      }
      return false;
    });
    return order;
  };
  const auto o1 = sorted_rows(f1);
  const auto o2 = sorted_rows(f2);
  for (std::size_t i = 0; i < o1.size(); ++i) {
    CHECK(f1.cam_points.row(o1[i]) == f2.cam_points.row(o2[i]));
    CHECK(f1.features.row(o1[i]) == f2.features.row(o2[i]));
  }
}

TEST_CASE("render_frame: visibility and validation errors") {
  const SyntheticScene scene = quick_scene(51);
  RenderConfig config;

  // camera far outside the range, looking away from the scene
  Pose away;
  away.position = Vec3(100.0, 0.0, 0.0);
  away.orientation = Quat::identity();
  Rng rng(700);
  CHECK(thrown_status([&] { render_frame(scene, away, config, rng); }) ==
        Status::VisibilityError);

  // identity orientation looks along +z; the box sits in front of it
  Pose ok;
  ok.position = Vec3(0.5, 0.5, -1.5);
  ok.orientation = Quat::identity();

  RenderConfig bad = config;
  bad.points_per_frame = 11;
  CHECK(thrown_status([&] { render_frame(scene, ok, bad, rng); }) ==
        Status::InvalidInput);
  bad = config;
  bad.cone_half_angle_deg = 95.0;
  CHECK(thrown_status([&] { render_frame(scene, ok, bad, rng); }) ==
        Status::InvalidInput);
  bad = config;
  bad.noise_sigma = -0.1;
  CHECK(thrown_status([&] { render_frame(scene, ok, bad, rng); }) ==
        Status::InvalidInput);

  Pose skew = ok;
  skew.orientation.w = 2.0;  // not unit norm
  CHECK(thrown_status([&] { render_frame(scene, skew, config, rng); }) ==
        Status::InvalidInput);
}

TEST_CASE("build_cluster_centers: allocation and containment") {
  // one scene, K=1: the landmark centroid
  const SyntheticScene solo = quick_scene(61);
  const std::vector<SyntheticScene> one{solo};
  const ClusterCenters c1 = build_cluster_centers(one, 1);
  const Vec3 centroid = solo.landmarks.colwise().mean().transpose();
  CHECK((c1.row(0) - centroid).norm() < 1e-12);

  // two disjoint scenes, K=2: one center in each box
  Rng rng(62);
  std::vector<SyntheticScene> two;
  two.push_back(generate_scene(0, unit_box_at(0.0), 80, rng));
  two.push_back(generate_scene(1, unit_box_at(2.0), 80, rng));
  const ClusterCenters c2 = build_cluster_centers(two, 2);
  CHECK(two[0].bounds.contains(c2.row(0), 1e-12));
  CHECK(two[1].bounds.contains(c2.row(1), 1e-12));

  // three equal-volume scenes, K=64: largest-remainder split is 22/21/21
  std::vector<SyntheticScene> three;
  for (int i = 0; i < 3; ++i)
    three.push_back(generate_scene(i, unit_box_at(2.0 * i), 200, rng));
  const ClusterCenters c64 = build_cluster_centers(three, 64);
  REQUIRE(c64.count() == 64);
  const int split[3] = {22, 21, 21};
  int row = 0;
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < split[s]; ++i, ++row)
      CHECK(three[static_cast<std::size_t>(s)].bounds.contains(c64.row(row),
                                                               1e-9));
  }

  // volume-proportional: volumes 1 and 7 with K=10 split 2/8
  std::vector<SyntheticScene> uneven;
  uneven.push_back(generate_scene(0, unit_box_at(0.0), 100, rng));
  Aabb big;
  big.lo = Vec3(3.0, 0.0, 0.0);
  big.hi = Vec3(3.0 + 7.0, 1.0, 1.0);  // volume 7
  uneven.push_back(generate_scene(1, big, 200, rng));
  const ClusterCenters c10 = build_cluster_centers(uneven, 10);
  int in_small = 0, in_big = 0;
  for (int i = 0; i < 10; ++i) {
    if (uneven[0].bounds.contains(c10.row(i), 1e-9)) ++in_small;
    if (uneven[1].bounds.contains(c10.row(i), 1e-9)) ++in_big;
  }
  CHECK(in_small == 2);
  CHECK(in_big == 8);

  CHECK(thrown_status([&] { build_cluster_centers(three, 2); }) ==
        Status::InvalidInput);
}

TEST_CASE("build_cluster_centers: existing centers are kept as a prefix") {
  Rng rng(71);
  std::vector<SyntheticScene> first;
  first.push_back(generate_scene(0, unit_box_at(0.0), 120, rng));
  const ClusterCenters base = build_cluster_centers(first, 5);

  std::vector<SyntheticScene> second;
  second.push_back(generate_scene(1, unit_box_at(2.0), 120, rng));
  const ClusterCenters grown = build_cluster_centers(second, 12, &base);
  REQUIRE(grown.count() == 12);
  for (int i = 0; i < 5; ++i) {
    CHECK(grown.row(i) == base.row(i));
  }
  for (int i = 5; i < 12; ++i)
    CHECK(second[0].bounds.contains(grown.row(i), 1e-9));
}

TEST_CASE("make_stream: split layout, bounds, coverage") {
  const SyntheticScene scene = quick_scene(81);
  Rng traj_rng(82);
  const Trajectory traj = generate_trajectory(scene, 1000, 0.0, traj_rng);
  RenderConfig config;

  Rng rng(83);
  const SceneStream stream = make_stream(scene, traj, config, 0.8, rng);
  CHECK(stream.scene_id == scene.scene_id);
  REQUIRE(stream.train.size() == 800);
  REQUIRE(stream.test.size() == 200);

  // reconstruct the strided flags and check frame-to-pose assignment
  std::vector<bool> is_test(1000, false);
  for (int j = 0; j < 200; ++j) {
    const int idx = static_cast<int>((j + 0.5) * 1000.0 / 200.0);
    is_test[static_cast<std::size_t>(std::min(idx, 999))] = true;
  }
  std::size_t ti = 0, si = 0;
  Aabb train_box = Aabb::empty();
  for (int i = 0; i < 1000; ++i) {
    const Pose& expected = traj.poses[static_cast<std::size_t>(i)];
    const Frame& got = is_test[static_cast<std::size_t>(i)]
                           ? stream.test[si]
                           : stream.train[ti];
    CHECK(got.gt_pose.position == expected.position);
    if (is_test[static_cast<std::size_t>(i)]) {
      ++si;
    } else {
      train_box.expand(expected.position);
      ++ti;
    }
  }
  CHECK(stream.train_pose_bounds.lo == train_box.lo);
  CHECK(stream.train_pose_bounds.hi == train_box.hi);

  // test positions span >= 90% of the full trajectory extent per axis
  Aabb all_box = Aabb::empty(), test_box = Aabb::empty();
  for (const auto& pose : traj.poses) all_box.expand(pose.position);
  for (const auto& f : stream.test) test_box.expand(f.gt_pose.position);
  for (int c = 0; c < 3; ++c)
    CHECK(test_box.extent()[c] >= 0.9 * all_box.extent()[c]);

  // determinism
  Rng r1(83);
  const SceneStream again = make_stream(scene, traj, config, 0.8, r1);
  CHECK(stream_content_hash(again) == stream_content_hash(stream));

  Rng bad(84);
  CHECK(thrown_status([&] { make_stream(scene, traj, config, 0.0, bad); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] { make_stream(scene, traj, config, 1.0, bad); }) ==
        Status::InvalidInput);
}

TEST_CASE("stream dump/load round trip preserves content") {
  const SyntheticScene scene = quick_scene(91);
  Rng traj_rng(92);
  const Trajectory traj = generate_trajectory(scene, 40, 0.3, traj_rng);
  RenderConfig config;
  Rng rng(93);
  const SceneStream stream = make_stream(scene, traj, config, 0.75, rng);

  std::stringstream ss;
  dump_stream(stream, ss);
  const SceneStream loaded = load_stream(ss);
  CHECK(loaded.scene_id == stream.scene_id);
  REQUIRE(loaded.train.size() == stream.train.size());
  REQUIRE(loaded.test.size() == stream.test.size());
  CHECK(stream_content_hash(loaded) == stream_content_hash(stream));
  // %.17g survives a double round trip bit-exactly
  CHECK(loaded.train[0].features == stream.train[0].features);
  CHECK(loaded.train[0].gt_coords == stream.train[0].gt_coords);
  CHECK(loaded.train_pose_bounds.lo == stream.train_pose_bounds.lo);

  const std::string path =
      (std::filesystem::temp_directory_path() / "checal_stream_test.txt")
          .string();
  dump_stream_file(stream, path);
  const SceneStream from_file = load_stream_file(path);
  CHECK(stream_content_hash(from_file) == stream_content_hash(stream));
  std::filesystem::remove(path);

  std::stringstream junk("not_a_stream 1\n");
  CHECK(thrown_status([&] { load_stream(junk); }) == Status::IoError);
  std::stringstream truncated("checal_stream 1\nscene 0 train 2 test 0\n");
  CHECK(thrown_status([&] { load_stream(truncated); }) == Status::IoError);
}
