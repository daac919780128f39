#include "checal.h"

#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>

#include "checal/error.hpp"
#include "checal/experiment.hpp"
#include "checal/geometry.hpp"
#include "checal/rng.hpp"
#include "checal/sars.hpp"

namespace {

thread_local std::string g_last_error;

checal_status to_c_status(checal::Status s) {
  switch (s) {
    case checal::Status::Ok: return CHECAL_OK;
    case checal::Status::InvalidInput: return CHECAL_INVALID_INPUT;
    case checal::Status::DimensionMismatch: return CHECAL_DIMENSION_MISMATCH;
    case checal::Status::DegenerateConfiguration:
      return CHECAL_DEGENERATE_CONFIGURATION;
    case checal::Status::NoConsensus: return CHECAL_NO_CONSENSUS;
    case checal::Status::EmptyBuffer: return CHECAL_EMPTY_BUFFER;
    case checal::Status::InsufficientSamples: return CHECAL_INSUFFICIENT_SAMPLES;
    case checal::Status::VisibilityError: return CHECAL_VISIBILITY_ERROR;
    case checal::Status::TrainingDivergence: return CHECAL_TRAINING_DIVERGENCE;
    case checal::Status::ContractViolation: return CHECAL_CONTRACT_VIOLATION;
    case checal::Status::IoError: return CHECAL_IO_ERROR;
    case checal::Status::ConfigError: return CHECAL_CONFIG_ERROR;
  }
  return CHECAL_UNKNOWN_ERROR;
}

checal_status set_error(checal_status code, const char* message) {
  g_last_error = message != nullptr ? message : "";
  return code;
}

// Runs `body`, translating exceptions into status codes.
template <typename Fn>
checal_status guarded(Fn&& body) {
  try {
    body();
    g_last_error.clear();
    return CHECAL_OK;
  } catch (const checal::Error& e) {
    return set_error(to_c_status(e.status()), e.what());
  } catch (const std::exception& e) {
    return set_error(CHECAL_UNKNOWN_ERROR, e.what());
  } catch (...) {
    return set_error(CHECAL_UNKNOWN_ERROR, "unknown exception");
  }
}

checal_status require_arg(bool ok, const char* message) {
  return ok ? CHECAL_OK : set_error(CHECAL_INVALID_INPUT, message);
}

checal::Pose pose_from_array(const double pose[7]) {
  checal::Pose p;
  p.position = checal::Vec3(pose[0], pose[1], pose[2]);
  p.orientation = checal::Quat{pose[3], pose[4], pose[5], pose[6]};
  return p;
}

checal::Quat quat_from_array(const double q[4]) {
  return checal::Quat{q[0], q[1], q[2], q[3]};
}

checal::MatX3 points_from_array(const double* data, size_t n) {
  checal::MatX3 m(static_cast<long>(n), 3);
  for (size_t i = 0; i < n; ++i) {
    m.row(static_cast<long>(i)) =
        checal::Vec3(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
  }
  return m;
}

void transform_to_arrays(const checal::RigidTransform& t, double rotation[9],
                         double translation[3]) {
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation[3 * r + c] = t.rotation(r, c);
    translation[r] = t.translation(r);
  }
}

char* copy_string(const std::string& s) {
  char* out = new (std::nothrow) char[s.size() + 1];
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

int insert_outcome_code(const checal::InsertOutcome& outcome) {
  switch (outcome.kind) {
    case checal::InsertKind::AcceptedNew: return CHECAL_INSERT_ACCEPTED;
    case checal::InsertKind::AcceptedWithEviction:
      return CHECAL_INSERT_ACCEPTED_EVICTION;
    case checal::InsertKind::RejectedRedundant: return CHECAL_INSERT_REJECTED;
  }
  return CHECAL_INSERT_REJECTED;
}

// Captures a facade command into (exit code, heap text).
template <typename Fn>
checal_status run_command(int* out_exit_code, char** out_text, Fn&& command) {
  if (require_arg(out_exit_code != nullptr && out_text != nullptr,
                  "output pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  *out_text = nullptr;
  std::ostringstream os;
  return guarded([&] {
    *out_exit_code = command(os);
    char* text = copy_string(os.str());
    checal::require(text != nullptr, checal::Status::IoError,
                    "out of memory capturing command output");
    *out_text = text;
  });
}

}  // namespace

struct checal_rng {
  checal::Rng impl;
};

struct checal_buffer {
  checal::ReplayBuffer impl;
};

extern "C" {

const char* checal_version(void) { return "1.0.0"; }

const char* checal_status_name(checal_status status) {
  switch (status) {
    case CHECAL_OK: return "ok";
    case CHECAL_INVALID_INPUT: return "invalid_input";
    case CHECAL_DIMENSION_MISMATCH: return "dimension_mismatch";
    case CHECAL_DEGENERATE_CONFIGURATION: return "degenerate_configuration";
    case CHECAL_NO_CONSENSUS: return "no_consensus";
    case CHECAL_EMPTY_BUFFER: return "empty_buffer";
    case CHECAL_INSUFFICIENT_SAMPLES: return "insufficient_samples";
    case CHECAL_VISIBILITY_ERROR: return "visibility_error";
    case CHECAL_TRAINING_DIVERGENCE: return "training_divergence";
    case CHECAL_CONTRACT_VIOLATION: return "contract_violation";
    case CHECAL_IO_ERROR: return "io_error";
    case CHECAL_CONFIG_ERROR: return "config_error";
    case CHECAL_UNKNOWN_ERROR: return "unknown_error";
  }
  return "unknown_error";
}

const char* checal_last_error(void) { return g_last_error.c_str(); }

void checal_string_free(char* text) { delete[] text; }

checal_status checal_rng_create(uint64_t seed, checal_rng** out_rng) {
  if (require_arg(out_rng != nullptr, "out_rng must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] { *out_rng = new checal_rng{checal::Rng(seed)}; });
}

void checal_rng_destroy(checal_rng* rng) { delete rng; }

checal_status checal_rng_uniform(checal_rng* rng, double* out_value) {
  if (require_arg(rng != nullptr && out_value != nullptr,
                  "rng/out_value must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] { *out_value = rng->impl.uniform(); });
}

checal_status checal_rng_normal(checal_rng* rng, double* out_value) {
  if (require_arg(rng != nullptr && out_value != nullptr,
                  "rng/out_value must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] { *out_value = rng->impl.normal(); });
}

checal_status checal_hybrid_pose_distance(const double pose_a[7],
                                          const double pose_b[7], double lambda,
                                          double* out_distance) {
  if (require_arg(pose_a != nullptr && pose_b != nullptr &&
                      out_distance != nullptr,
                  "pose/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    *out_distance = checal::hybrid_pose_distance(
        pose_from_array(pose_a), pose_from_array(pose_b), lambda);
  });
}

checal_status checal_angular_distance(const double quat_a[4],
                                      const double quat_b[4],
                                      double* out_radians) {
  if (require_arg(quat_a != nullptr && quat_b != nullptr &&
                      out_radians != nullptr,
                  "quat/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    *out_radians = checal::angular_distance(quat_from_array(quat_a),
                                            quat_from_array(quat_b));
  });
}

checal_status checal_kabsch(const double* src, const double* dst, size_t n,
                            double out_rotation[9], double out_translation[3]) {
  if (require_arg(src != nullptr && dst != nullptr && out_rotation != nullptr &&
                      out_translation != nullptr,
                  "src/dst/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    const checal::RigidTransform t =
        checal::kabsch(points_from_array(src, n), points_from_array(dst, n));
    transform_to_arrays(t, out_rotation, out_translation);
  });
}

checal_status checal_ransac_kabsch(const double* src, const double* dst,
                                   size_t n, int iterations,
                                   double inlier_threshold, int min_inliers,
                                   uint64_t seed, double out_rotation[9],
                                   double out_translation[3],
                                   int* out_inlier_count) {
  if (require_arg(src != nullptr && dst != nullptr && out_rotation != nullptr &&
                      out_translation != nullptr && out_inlier_count != nullptr,
                  "src/dst/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    checal::RansacConfig config;
    if (iterations > 0) config.iterations = iterations;
    if (inlier_threshold > 0.0) config.inlier_threshold = inlier_threshold;
    if (min_inliers > 0) config.min_inliers = min_inliers;
    checal::Rng rng(seed);
    const checal::RansacResult result = checal::ransac_kabsch(
        points_from_array(src, n), points_from_array(dst, n), config, rng);
    transform_to_arrays(result.transform, out_rotation, out_translation);
    *out_inlier_count = static_cast<int>(result.inliers.size());
  });
}

checal_status checal_buffer_create(size_t capacity, double radius,
                                   double lambda, int cross_scene,
                                   checal_buffer** out_buffer) {
  if (require_arg(out_buffer != nullptr, "out_buffer must not be null") !=
      CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    checal::SarsConfig config;
    config.capacity = capacity;
    config.radius = radius;
    config.lambda = lambda;
    config.cross_scene = cross_scene != 0;
    *out_buffer = new checal_buffer{checal::ReplayBuffer(config)};
  });
}

void checal_buffer_destroy(checal_buffer* buffer) { delete buffer; }

checal_status checal_buffer_size(const checal_buffer* buffer, size_t* out_size) {
  if (require_arg(buffer != nullptr && out_size != nullptr,
                  "buffer/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  *out_size = buffer->impl.size();
  return CHECAL_OK;
}

checal_status checal_buffer_capacity(const checal_buffer* buffer,
                                     size_t* out_capacity) {
  if (require_arg(buffer != nullptr && out_capacity != nullptr,
                  "buffer/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  *out_capacity = buffer->impl.capacity();
  return CHECAL_OK;
}

checal_status checal_buffer_grow_capacity(checal_buffer* buffer, size_t extra) {
  if (require_arg(buffer != nullptr, "buffer must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] { buffer->impl.grow_capacity(extra); });
}

checal_status checal_buffer_try_insert(checal_buffer* buffer,
                                       uint64_t sample_id, int scene_id,
                                       const double pose[7], int* out_outcome,
                                       uint64_t* out_evicted_id) {
  if (require_arg(buffer != nullptr && pose != nullptr && out_outcome != nullptr,
                  "buffer/pose/out_outcome must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    checal::ReplaySample s;
    s.sample_id = sample_id;
    s.payload_ref = sample_id;
    s.scene_id = scene_id;
    s.pose = pose_from_array(pose);
    const checal::InsertOutcome outcome = buffer->impl.try_insert(s);
    *out_outcome = insert_outcome_code(outcome);
    if (out_evicted_id != nullptr) *out_evicted_id = outcome.evicted_id;
  });
}

checal_status checal_buffer_reservoir_insert(
    checal_buffer* buffer, uint64_t sample_id, int scene_id,
    const double pose[7], uint64_t stream_index, checal_rng* rng,
    int* out_outcome, uint64_t* out_evicted_id) {
  if (require_arg(buffer != nullptr && pose != nullptr && rng != nullptr &&
                      out_outcome != nullptr,
                  "buffer/pose/rng/out_outcome must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    checal::ReplaySample s;
    s.sample_id = sample_id;
    s.payload_ref = sample_id;
    s.scene_id = scene_id;
    s.pose = pose_from_array(pose);
    const checal::InsertOutcome outcome =
        buffer->impl.reservoir_insert(s, stream_index, rng->impl);
    *out_outcome = insert_outcome_code(outcome);
    if (out_evicted_id != nullptr) *out_evicted_id = outcome.evicted_id;
  });
}

checal_status checal_buffer_min_distance(const checal_buffer* buffer,
                                         const double pose[7],
                                         double* out_distance) {
  if (require_arg(buffer != nullptr && pose != nullptr &&
                      out_distance != nullptr,
                  "buffer/pose/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    checal::ReplaySample s;
    s.pose = pose_from_array(pose);
    *out_distance = buffer->impl.min_distance_to(s);
  });
}

checal_status checal_buffer_dispersion(const checal_buffer* buffer,
                                       double* out_min_pairwise,
                                       double* out_mean_nn) {
  if (require_arg(buffer != nullptr && out_min_pairwise != nullptr &&
                      out_mean_nn != nullptr,
                  "buffer/out pointers must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    const checal::DispersionStats stats = buffer->impl.dispersion();
    *out_min_pairwise = stats.min_pairwise;
    *out_mean_nn = stats.mean_nn;
  });
}

checal_status checal_buffer_dump_file(const checal_buffer* buffer,
                                      const char* path) {
  if (require_arg(buffer != nullptr && path != nullptr,
                  "buffer/path must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] { buffer->impl.dump_file(path); });
}

checal_status checal_buffer_load_file(const char* path,
                                      checal_buffer** out_buffer) {
  if (require_arg(path != nullptr && out_buffer != nullptr,
                  "path/out_buffer must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return guarded([&] {
    *out_buffer = new checal_buffer{checal::ReplayBuffer::load_file(path)};
  });
}

checal_status checal_cmd_run(const char* config_path, const char* method,
                             uint64_t seed, int jobs, const char* out_dir,
                             int* out_exit_code, char** out_text) {
  if (require_arg(config_path != nullptr && method != nullptr &&
                      out_dir != nullptr,
                  "config_path/method/out_dir must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return run_command(out_exit_code, out_text, [&](std::ostringstream& os) {
    checal::RunOptions options;
    options.config_path = config_path;
    options.method = method;
    options.seed = seed;
    options.jobs = jobs;
    options.out_dir = out_dir;
    return checal::cmd_run(options, os);
  });
}

checal_status checal_cmd_gradcheck(int k, uint64_t seed, int corrupt,
                                   int* out_exit_code, char** out_text) {
  return run_command(out_exit_code, out_text, [&](std::ostringstream& os) {
    checal::GradcheckOptions options;
    options.k = k;
    options.seed = seed;
    options.corrupt = corrupt != 0;
    return checal::cmd_gradcheck(options, os);
  });
}

checal_status checal_cmd_buffer_demo(const char* config_path, uint64_t seed,
                                     const char* out_dir, int* out_exit_code,
                                     char** out_text) {
  if (require_arg(config_path != nullptr && out_dir != nullptr,
                  "config_path/out_dir must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return run_command(out_exit_code, out_text, [&](std::ostringstream& os) {
    checal::BufferDemoOptions options;
    options.config_path = config_path;
    options.seed = seed;
    options.out_dir = out_dir;
    return checal::cmd_buffer_demo(options, os);
  });
}

checal_status checal_cmd_report(const char* const* report_paths, size_t n_paths,
                                const char* csv_path_or_null,
                                int* out_exit_code, char** out_text) {
  if (require_arg(report_paths != nullptr || n_paths == 0,
                  "report_paths must not be null") != CHECAL_OK) {
    return CHECAL_INVALID_INPUT;
  }
  return run_command(out_exit_code, out_text, [&](std::ostringstream& os) {
    checal::ReportOptions options;
    for (size_t i = 0; i < n_paths; ++i) {
      checal::require(report_paths[i] != nullptr, checal::Status::InvalidInput,
                      "report path must not be null");
      options.report_paths.emplace_back(report_paths[i]);
    }
    if (csv_path_or_null != nullptr) options.csv_path = csv_path_or_null;
    return checal::cmd_report(options, os);
  });
}

}  // extern "C"
