#include "checal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "checal/config.hpp"
#include "checal/continual.hpp"
#include "checal/error.hpp"
#include "checal/model.hpp"
#include "checal/sars.hpp"
#include "checal/sim.hpp"

namespace checal {

namespace {

int exit_code_for(const Error& e) {
  switch (e.status()) {
    case Status::TrainingDivergence:
      return kExitDivergence;
    default:
      return kExitUsage;
  }
}

std::string fmt(const char* spec, double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct RunTask {
  Method method;
  std::uint64_t seed;
};

struct RunOutcome {
  std::optional<ContinualReport> report;
  std::exception_ptr error;
  double wall_sec = 0.0;
};

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& os) {
  ExperimentConfig config;
  try {
    config = load_config_file(options.config_path);
  } catch (const Error& e) {
    os << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<Method> methods;
  if (options.method == "all") {
    methods.assign(std::begin(kAllMethods), std::end(kAllMethods));
  } else {
    try {
      methods.push_back(method_from_string(options.method));
    } catch (const Error& e) {
      os << "usage error: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  if (options.jobs < 1) {
    os << "usage error: --jobs must be >= 1\n";
    return kExitUsage;
  }

  std::error_code ec;
  std::filesystem::create_directories(options.out_dir, ec);
  if (ec) {
    os << "io error: cannot create output directory " << options.out_dir << "\n";
    return kExitUsage;
  }

  std::vector<RunTask> tasks;
  for (const Method m : methods) tasks.push_back({m, options.seed});
  std::vector<RunOutcome> outcomes(tasks.size());

  const auto work = [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ContinualReport report = run_continual(config, tasks[i].method,
                                             tasks[i].seed);
      write_report_files(report, options.out_dir);
      outcomes[i].report = std::move(report);
    } catch (...) {
      outcomes[i].error = std::current_exception();
    }
    outcomes[i].wall_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  };

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(options.jobs), tasks.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          work(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  int exit_code = kExitOk;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const RunOutcome& oc = outcomes[i];
    if (oc.error) {
      try {
        std::rethrow_exception(oc.error);
      } catch (const Error& e) {
        os << method_name(tasks[i].method) << " seed=" << tasks[i].seed
           << ": error: " << e.what() << "\n";
        const int code = exit_code_for(e);
        // Divergence dominates usage-level issues in the summary code.
        exit_code = std::max(exit_code, code);
      } catch (const std::exception& e) {
        os << method_name(tasks[i].method) << " seed=" << tasks[i].seed
           << ": error: " << e.what() << "\n";
        exit_code = std::max(exit_code, kExitUsage);
      }
      continue;
    }
    const ContinualReport& r = *oc.report;
    os << r.method << " seed=" << r.seed
       << ": final_avg_acc=" << fmt("%.2f", r.final_average_accuracy) << "%"
       << " tfr=" << (r.tfr_defined ? fmt("%.2f", r.tfr) : std::string("n/a"))
       << " wall=" << fmt("%.1f", oc.wall_sec) << "s"
       << " -> " << report_basename(r) << ".report.json\n";
  }
  return exit_code;
}

int cmd_gradcheck(const GradcheckOptions& options, std::ostream& os) {
  if (options.k < 1 || options.k > 16) {
    os << "usage error: --k must be in [1, 16]\n";
    return kExitUsage;
  }
  constexpr double kThreshold = 1e-4;
  GradcheckConfig config;
  config.k = options.k;
  config.corrupt = options.corrupt;
  GradcheckReport report;
  try {
    report = gradcheck(config, options.seed);
  } catch (const Error& e) {
    os << "gradcheck error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  const std::string* offender = nullptr;
  for (const GradcheckRow& row : report.rows) {
    os << row.block << " max_rel_err=" << fmt("%.3e", row.max_rel_err) << "\n";
    if (row.max_rel_err >= kThreshold && offender == nullptr) {
      offender = &row.block;
    }
  }
  if (offender != nullptr) {
    os << "FAIL: block '" << *offender << "' exceeds " << fmt("%.0e", kThreshold)
       << " (worst " << fmt("%.3e", report.worst()) << ")\n";
    return kExitCheckFailure;
  }
  os << "PASS: worst " << fmt("%.3e", report.worst()) << " < "
     << fmt("%.0e", kThreshold) << "\n";
  return kExitOk;
}

int cmd_buffer_demo(const BufferDemoOptions& options, std::ostream& os) {
  ExperimentConfig config;
  try {
    config = load_config_file(options.config_path);
  } catch (const Error& e) {
    os << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    Rng root(options.seed);

    Aabb box;
    box.lo = Vec3::Zero();
    box.hi = Vec3::Constant(config.scenes.box_side);
    Rng scene_rng = root.child("scene", 0);
    const SyntheticScene scene =
        generate_scene(0, box, config.scenes.landmarks_per_scene, scene_rng);
    Rng traj_rng = root.child("traj", 0);
    const Trajectory traj =
        generate_trajectory(scene, config.trajectory.frames_per_scene,
                            config.trajectory.clustering, traj_rng);

    Aabb pose_box = Aabb::empty();
    for (const Pose& p : traj.poses) pose_box.expand(p.position);

    SarsConfig bc;
    bc.capacity = static_cast<std::size_t>(std::max(
        1.0, std::ceil(config.sars.buffer_fraction *
                       static_cast<double>(traj.poses.size()))));
    bc.radius = config.sars.radius;
    bc.lambda = config.sars.lambda;
    bc.cross_scene = config.sars.cross_scene_radius;
    ReplayBuffer sars(bc);
    ReplayBuffer reservoir(bc);
    Rng reservoir_rng = root.child("reservoir");

    for (std::size_t i = 0; i < traj.poses.size(); ++i) {
      ReplaySample s;
      s.sample_id = static_cast<std::uint64_t>(i);
      s.payload_ref = s.sample_id;
      s.scene_id = 0;
      s.pose.position = pose_box.normalize_point(traj.poses[i].position);
      s.pose.orientation = traj.poses[i].orientation.canonicalized();
      sars.try_insert(s);
      reservoir.reservoir_insert(s, static_cast<std::uint64_t>(i), reservoir_rng);
    }

    const DispersionStats ds = sars.dispersion();
    const DispersionStats dr = reservoir.dispersion();
    const double ratio = dr.min_pairwise > 0.0
                             ? ds.min_pairwise / dr.min_pairwise
                             : std::numeric_limits<double>::infinity();
    os << "frames=" << traj.poses.size() << " capacity=" << bc.capacity
       << " radius=" << fmt("%.17g", bc.radius)
       << " clustering=" << fmt("%.17g", config.trajectory.clustering) << "\n";
    os << "sars size=" << sars.size()
       << " min_pairwise=" << fmt("%.6f", ds.min_pairwise)
       << " mean_nn=" << fmt("%.6f", ds.mean_nn) << "\n";
    os << "reservoir size=" << reservoir.size()
       << " min_pairwise=" << fmt("%.6f", dr.min_pairwise)
       << " mean_nn=" << fmt("%.6f", dr.mean_nn) << "\n";
    os << "min_pairwise_ratio=" << fmt("%.3f", ratio) << "\n";

    std::error_code ec;
    std::filesystem::create_directories(options.out_dir, ec);
    require(!ec, Status::IoError,
            "cannot create output directory: " + options.out_dir);
    const std::string csv_path =
        (std::filesystem::path(options.out_dir) /
         ("buffer_seed" + std::to_string(options.seed) + "_" +
          config_hash_hex(config) + ".csv"))
            .string();
    std::ofstream csv(csv_path);
    require(csv.good(), Status::IoError, "cannot write " + csv_path);
    csv << "strategy,sample_id,insertion_index,px,py,pz,qw,qx,qy,qz\n";
    const auto emit = [&csv](const char* tag, const ReplayBuffer& buffer) {
      for (const BufferEntry& e : buffer.entries()) {
        csv << tag << "," << e.sample.sample_id << "," << e.insertion_index;
        const double f[7] = {
            e.sample.pose.position.x(),   e.sample.pose.position.y(),
            e.sample.pose.position.z(),   e.sample.pose.orientation.w,
            e.sample.pose.orientation.x,  e.sample.pose.orientation.y,
            e.sample.pose.orientation.z};
        for (const double v : f) {
          char buf[40];
          std::snprintf(buf, sizeof(buf), "%.17g", v);
          csv << "," << buf;
        }
        csv << "\n";
      }
    };
    emit("sars", sars);
    emit("reservoir", reservoir);
    csv.flush();
    require(csv.good(), Status::IoError, "write failed: " + csv_path);
    os << "csv=" << csv_path << " rows=" << (sars.size() + reservoir.size())
       << "\n";
    return kExitOk;
  } catch (const Error& e) {
    os << "buffer-demo error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}

namespace {

std::string cell(const SceneMetrics& m) {
  return fmt("%.1f", m.median_t_cm) + "/" + fmt("%.1f", m.median_r_deg) + "/" +
         fmt("%.1f", m.accuracy);
}

}  // namespace

int cmd_report(const ReportOptions& options, std::ostream& os) {
  if (options.report_paths.empty()) {
    os << "usage error: report requires at least one report path\n";
    return kExitUsage;
  }
  std::vector<ContinualReport> reports;
  try {
    for (const std::string& path : options.report_paths) {
      reports.push_back(load_report_file(path));
    }
  } catch (const Error& e) {
    os << "report error: " << e.what() << "\n";
    return kExitUsage;
  }
  const int n_scenes = reports.front().scene_count;
  for (const ContinualReport& r : reports) {
    if (r.scene_count != n_scenes) {
      os << "report error: scene sets differ (" << n_scenes << " vs "
         << r.scene_count << " scenes)\n";
      return kExitUsage;
    }
  }

  // Header: one column per report, labelled method/seed.
  std::vector<std::string> labels;
  for (const ContinualReport& r : reports) {
    labels.push_back(r.method + " s" + std::to_string(r.seed));
  }
  std::size_t width = 24;
  for (const std::string& l : labels) width = std::max(width, l.size() + 2);
  const auto pad = [width](const std::string& s) {
    return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
  };

  os << pad("metric (t_cm/r_deg/acc)");
  for (const std::string& l : labels) os << pad(l);
  os << "\n";
  for (int scene = 0; scene < n_scenes; ++scene) {
    os << pad("scene_" + std::to_string(scene));
    for (const ContinualReport& r : reports) {
      os << pad(cell(r.matrix.back()[static_cast<std::size_t>(scene)]));
    }
    os << "\n";
  }
  os << pad("final_avg_acc");
  for (const ContinualReport& r : reports) {
    os << pad(fmt("%.2f", r.final_average_accuracy));
  }
  os << "\n";
  if (n_scenes >= 2) {
    os << pad("tfr");
    for (const ContinualReport& r : reports) {
      os << pad(r.tfr_defined ? fmt("%.2f", r.tfr) : std::string("n/a"));
    }
    os << "\n";
  }

  if (!options.csv_path.empty()) {
    std::ofstream csv(options.csv_path);
    if (!csv.good()) {
      os << "report error: cannot write " << options.csv_path << "\n";
      return kExitUsage;
    }
    csv << "method,seed,scene,median_t_cm,median_r_deg,accuracy,"
           "final_average_accuracy,tfr,tfr_defined\n";
    for (const ContinualReport& r : reports) {
      for (int scene = 0; scene < n_scenes; ++scene) {
        const SceneMetrics& m = r.matrix.back()[static_cast<std::size_t>(scene)];
        csv << r.method << "," << r.seed << "," << scene << ","
            << fmt("%.17g", m.median_t_cm) << "," << fmt("%.17g", m.median_r_deg)
            << "," << fmt("%.17g", m.accuracy) << ","
            << fmt("%.17g", r.final_average_accuracy) << ","
            << fmt("%.17g", r.tfr) << "," << (r.tfr_defined ? 1 : 0) << "\n";
      }
    }
    csv.flush();
    if (!csv.good()) {
      os << "report error: write failed: " << options.csv_path << "\n";
      return kExitUsage;
    }
  }
  return kExitOk;
}

}  // namespace checal
