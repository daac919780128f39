#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "checal/geometry.hpp"
#include "checal/rng.hpp"

namespace checal {

// One buffered frame: pose in normalized pose space plus a reference to the
// frame's features and supervision targets. sample_id doubles as the payload
// reference in this codebase (the experiment layer resolves ids to frames),
// which keeps the dump format down to the id / scene / pose / index record.
struct ReplaySample {
  std::uint64_t sample_id = 0;
  int scene_id = 0;
  Pose pose;
  std::uint64_t payload_ref = 0;
};

enum class InsertKind {
  AcceptedNew,
  RejectedRedundant,
  AcceptedWithEviction,
};

struct InsertOutcome {
  InsertKind kind = InsertKind::RejectedRedundant;
  std::uint64_t evicted_id = 0;  // valid only for AcceptedWithEviction

  bool accepted() const { return kind != InsertKind::RejectedRedundant; }
};

struct SarsConfig {
  std::size_t capacity = 1;
  double radius = 0.5;
  double lambda = 1.0;
  // When false, samples from different scenes never interact: their pairwise
  // distance is treated as +inf, so the spacing radius and eviction density
  // apply within each scene only.
  bool cross_scene = true;

  void validate() const;
};

struct BufferEntry {
  ReplaySample sample;
  std::uint64_t insertion_index = 0;
};

struct DispersionStats {
  double min_pairwise = 0.0;
  double mean_nn = 0.0;
};

// Online Poisson-disk buffer over pose space with density-based eviction.
// Single-writer; const access is safe to share across threads.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(const SarsConfig& config);

  const SarsConfig& config() const { return config_; }
  std::size_t capacity() const { return config_.capacity; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<BufferEntry>& entries() const { return entries_; }

  // Cumulative capacity schedule: grows by the per-scene budget after each
  // scene's stream finishes. Never shrinks.
  void grow_capacity(std::size_t extra);

  // Eq. 4: minimum hybrid distance from s to the buffer contents.
  double min_distance_to(const ReplaySample& s) const;

  // Algorithm 1. Rejection is a normal outcome, not an error.
  InsertOutcome try_insert(const ReplaySample& s);

  // Eq. 5: id of the sample with the smallest nearest-neighbor distance.
  // Ties: smaller second-nearest-neighbor distance, then earliest insertion.
  std::uint64_t select_dense_sample() const;

  // Uniform without replacement; returns everything when the request
  // exceeds the buffer size.
  std::vector<ReplaySample> sample_batch(std::size_t batch_size, Rng& rng) const;

  DispersionStats dispersion() const;

  // Classic reservoir sampling baseline; no spacing invariant.
  // stream_index is the 0-based count of samples seen before this one.
  InsertOutcome reservoir_insert(const ReplaySample& s, std::uint64_t stream_index,
                                 Rng& rng);

  void dump(std::ostream& os) const;
  void dump_file(const std::string& path) const;
  static ReplayBuffer load(std::istream& is);
  static ReplayBuffer load_file(const std::string& path);

 private:
  double pair_distance(const ReplaySample& a, const ReplaySample& b) const;
  void validate_incoming(const ReplaySample& s) const;
  void remove_by_id(std::uint64_t id);

  SarsConfig config_;
  std::vector<BufferEntry> entries_;
  std::uint64_t next_insertion_ = 0;
};

}  // namespace checal
