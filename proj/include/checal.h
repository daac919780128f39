/* checal — continual hand-eye calibration toolkit, C interface.
 *
 * Conventions:
 *   - Poses are 7 doubles: position x y z, then a unit quaternion w x y z.
 *   - Point sets are row-major n x 3 double arrays.
 *   - Every fallible call returns a checal_status; on failure,
 *     checal_last_error() holds a thread-local diagnostic for that call.
 *   - Objects created by *_create / *_load are released with the matching
 *     *_destroy; strings returned through char** with checal_string_free.
 */
#ifndef CHECAL_H
#define CHECAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum checal_status {
  CHECAL_OK = 0,
  CHECAL_INVALID_INPUT = 1,
  CHECAL_DIMENSION_MISMATCH = 2,
  CHECAL_DEGENERATE_CONFIGURATION = 3,
  CHECAL_NO_CONSENSUS = 4,
  CHECAL_EMPTY_BUFFER = 5,
  CHECAL_INSUFFICIENT_SAMPLES = 6,
  CHECAL_VISIBILITY_ERROR = 7,
  CHECAL_TRAINING_DIVERGENCE = 8,
  CHECAL_CONTRACT_VIOLATION = 9,
  CHECAL_IO_ERROR = 10,
  CHECAL_CONFIG_ERROR = 11,
  CHECAL_UNKNOWN_ERROR = 12
} checal_status;

const char* checal_version(void);
const char* checal_status_name(checal_status status);
/* Message from this thread's most recent failing call ("" if none). */
const char* checal_last_error(void);

void checal_string_free(char* text);

/* ---- deterministic RNG ---------------------------------------------- */

typedef struct checal_rng checal_rng;

checal_status checal_rng_create(uint64_t seed, checal_rng** out_rng);
void checal_rng_destroy(checal_rng* rng);
checal_status checal_rng_uniform(checal_rng* rng, double* out_value);
checal_status checal_rng_normal(checal_rng* rng, double* out_value);

/* ---- geometry -------------------------------------------------------- */

/* Hybrid distance: |pa - pb|_2 + lambda * geodesic angle between quats. */
checal_status checal_hybrid_pose_distance(const double pose_a[7],
                                          const double pose_b[7], double lambda,
                                          double* out_distance);
checal_status checal_angular_distance(const double quat_a[4],
                                      const double quat_b[4],
                                      double* out_radians);
/* Least-squares rigid transform src -> dst (n >= 3, non-degenerate). */
checal_status checal_kabsch(const double* src, const double* dst, size_t n,
                            double out_rotation[9], double out_translation[3]);
/* Robust variant; min_inliers <= 0 selects the default (3). */
checal_status checal_ransac_kabsch(const double* src, const double* dst,
                                   size_t n, int iterations,
                                   double inlier_threshold, int min_inliers,
                                   uint64_t seed, double out_rotation[9],
                                   double out_translation[3],
                                   int* out_inlier_count);

/* ---- spatial-aware replay buffer ------------------------------------- */

typedef struct checal_buffer checal_buffer;

/* Outcome of an insertion attempt. */
typedef enum checal_insert_outcome {
  CHECAL_INSERT_REJECTED = 0,
  CHECAL_INSERT_ACCEPTED = 1,
  CHECAL_INSERT_ACCEPTED_EVICTION = 2
} checal_insert_outcome;

checal_status checal_buffer_create(size_t capacity, double radius,
                                   double lambda, int cross_scene,
                                   checal_buffer** out_buffer);
void checal_buffer_destroy(checal_buffer* buffer);
checal_status checal_buffer_size(const checal_buffer* buffer, size_t* out_size);
checal_status checal_buffer_capacity(const checal_buffer* buffer,
                                     size_t* out_capacity);
checal_status checal_buffer_grow_capacity(checal_buffer* buffer, size_t extra);
/* Spacing-preserving insert (density-based eviction at capacity). */
checal_status checal_buffer_try_insert(checal_buffer* buffer,
                                       uint64_t sample_id, int scene_id,
                                       const double pose[7], int* out_outcome,
                                       uint64_t* out_evicted_id);
/* Reservoir-sampling baseline; stream_index counts samples seen so far. */
checal_status checal_buffer_reservoir_insert(checal_buffer* buffer,
                                             uint64_t sample_id, int scene_id,
                                             const double pose[7],
                                             uint64_t stream_index,
                                             checal_rng* rng, int* out_outcome,
                                             uint64_t* out_evicted_id);
checal_status checal_buffer_min_distance(const checal_buffer* buffer,
                                         const double pose[7],
                                         double* out_distance);
checal_status checal_buffer_dispersion(const checal_buffer* buffer,
                                       double* out_min_pairwise,
                                       double* out_mean_nn);
checal_status checal_buffer_dump_file(const checal_buffer* buffer,
                                      const char* path);
checal_status checal_buffer_load_file(const char* path,
                                      checal_buffer** out_buffer);

/* ---- command facade --------------------------------------------------
 * Mirrors the CLI. Each call captures the command's text output into
 * *out_text (free with checal_string_free) and stores the process exit
 * code (0 ok, 1 check failure, 2 usage/config, 3 training divergence) in
 * *out_exit_code. The checal_status return is CHECAL_OK unless the call
 * itself was malformed (null arguments). */

checal_status checal_cmd_run(const char* config_path, const char* method,
                             uint64_t seed, int jobs, const char* out_dir,
                             int* out_exit_code, char** out_text);
checal_status checal_cmd_gradcheck(int k, uint64_t seed, int corrupt,
                                   int* out_exit_code, char** out_text);
checal_status checal_cmd_buffer_demo(const char* config_path, uint64_t seed,
                                     const char* out_dir, int* out_exit_code,
                                     char** out_text);
checal_status checal_cmd_report(const char* const* report_paths, size_t n_paths,
                                const char* csv_path_or_null,
                                int* out_exit_code, char** out_text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CHECAL_H */
