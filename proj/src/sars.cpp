#include "checal/sars.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace checal {

void SarsConfig::validate() const {
  require(capacity >= 1, Status::InvalidInput, "sars: capacity must be >= 1");
  require(std::isfinite(radius) && radius >= 0.0, Status::InvalidInput,
          "sars: radius must be finite and non-negative");
  require(std::isfinite(lambda) && lambda >= 0.0, Status::InvalidInput,
          "sars: lambda must be finite and non-negative");
}

ReplayBuffer::ReplayBuffer(const SarsConfig& config) : config_(config) {
  config_.validate();
}

void ReplayBuffer::grow_capacity(std::size_t extra) {
  config_.capacity += extra;
}

double ReplayBuffer::pair_distance(const ReplaySample& a,
                                   const ReplaySample& b) const {
  if (!config_.cross_scene && a.scene_id != b.scene_id) {
    return std::numeric_limits<double>::infinity();
  }
  return hybrid_pose_distance(a.pose, b.pose, config_.lambda);
}

void ReplayBuffer::validate_incoming(const ReplaySample& s) const {
  require(s.pose.position.allFinite(), Status::InvalidInput,
          "replay sample position must be finite");
  require(s.pose.orientation.is_unit(1e-6), Status::InvalidInput,
          "replay sample orientation must be unit-norm");
  for (const auto& e : entries_) {
    require(e.sample.sample_id != s.sample_id, Status::InvalidInput,
            "replay sample ids must be unique within the buffer");
  }
}

double ReplayBuffer::min_distance_to(const ReplaySample& s) const {
  require(!entries_.empty(), Status::EmptyBuffer,
          "min_distance_to: buffer is empty");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) best = std::min(best, pair_distance(s, e.sample));
  return best;
}

InsertOutcome ReplayBuffer::try_insert(const ReplaySample& s) {
  validate_incoming(s);
  if (!entries_.empty()) {
    const double d_min = min_distance_to(s);
    if (d_min < config_.radius) return {InsertKind::RejectedRedundant, 0};
  }
  if (entries_.size() < config_.capacity) {
    entries_.push_back({s, next_insertion_++});
    return {InsertKind::AcceptedNew, 0};
  }
  // At capacity with adequate spacing: replace the densest sample. For a
  // single-slot buffer the argmin over one sample is that sample.
  const std::uint64_t victim =
      entries_.size() == 1 ? entries_.front().sample.sample_id
                           : select_dense_sample();
  remove_by_id(victim);
  entries_.push_back({s, next_insertion_++});
  return {InsertKind::AcceptedWithEviction, victim};
}

std::uint64_t ReplayBuffer::select_dense_sample() const {
  require(entries_.size() >= 2, Status::InsufficientSamples,
          "select_dense_sample: need at least 2 samples");
  const std::size_t n = entries_.size();
  std::size_t best = 0;
  double best_d1 = std::numeric_limits<double>::infinity();
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double d1 = std::numeric_limits<double>::infinity();
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = pair_distance(entries_[i].sample, entries_[j].sample);
      if (d < d1) {
        d2 = d1;
        d1 = d;
      } else if (d < d2) {
        d2 = d;
      }
    }
    const bool better =
        d1 < best_d1 ||
        (d1 == best_d1 &&
         (d2 < best_d2 ||
          (d2 == best_d2 &&
           entries_[i].insertion_index < entries_[best].insertion_index)));
    if (better) {
      best = i;
      best_d1 = d1;
      best_d2 = d2;
    }
  }
  return entries_[best].sample.sample_id;
}

std::vector<ReplaySample> ReplayBuffer::sample_batch(std::size_t batch_size,
                                                     Rng& rng) const {
  require(!entries_.empty(), Status::EmptyBuffer, "sample_batch: buffer is empty");
  const std::size_t n = entries_.size();
  const std::size_t k = std::min(batch_size, n);
  const auto idx = rng.sample_without_replacement(n, k);
  std::vector<ReplaySample> out;
  out.reserve(k);
  for (const std::size_t i : idx) out.push_back(entries_[i].sample);
  return out;
}

DispersionStats ReplayBuffer::dispersion() const {
  require(entries_.size() >= 2, Status::InsufficientSamples,
          "dispersion: need at least 2 samples");
  const std::size_t n = entries_.size();
  DispersionStats stats;
  stats.min_pairwise = std::numeric_limits<double>::infinity();
  double nn_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double nn = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = pair_distance(entries_[i].sample, entries_[j].sample);
      nn = std::min(nn, d);
    }
    stats.min_pairwise = std::min(stats.min_pairwise, nn);
    nn_sum += nn;
  }
  stats.mean_nn = nn_sum / static_cast<double>(n);
  return stats;
}

InsertOutcome ReplayBuffer::reservoir_insert(const ReplaySample& s,
                                             std::uint64_t stream_index,
                                             Rng& rng) {
  validate_incoming(s);
  if (entries_.size() < config_.capacity) {
    entries_.push_back({s, next_insertion_++});
    return {InsertKind::AcceptedNew, 0};
  }
  // Algorithm R: keep with probability capacity/(stream_index+1); the drawn
  // slot is itself the uniform replacement target.
  const std::uint64_t draw = rng.uniform_index(stream_index + 1);
  if (draw >= config_.capacity) return {InsertKind::RejectedRedundant, 0};
  const std::uint64_t evicted =
      entries_[static_cast<std::size_t>(draw)].sample.sample_id;
  entries_[static_cast<std::size_t>(draw)] = {s, next_insertion_++};
  return {InsertKind::AcceptedWithEviction, evicted};
}

void ReplayBuffer::remove_by_id(std::uint64_t id) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].sample.sample_id == id) {
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
      return;
    }
  }
  fail(Status::ContractViolation, "remove_by_id: id not present");
}

namespace {

void write_double(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  os << buf;
}

}  // namespace

void ReplayBuffer::dump(std::ostream& os) const {
  os << "checal_buffer 1\n";
  os << "config capacity " << config_.capacity << " radius ";
  write_double(os, config_.radius);
  os << " lambda ";
  write_double(os, config_.lambda);
  os << " cross_scene " << (config_.cross_scene ? 1 : 0);
  os << " next_insertion " << next_insertion_ << "\n";
  for (const auto& e : entries_) {
    os << "sample " << e.sample.sample_id << " " << e.sample.scene_id;
    const double fields[7] = {
        e.sample.pose.position.x(), e.sample.pose.position.y(),
        e.sample.pose.position.z(), e.sample.pose.orientation.w,
        e.sample.pose.orientation.x, e.sample.pose.orientation.y,
        e.sample.pose.orientation.z};
    for (const double f : fields) {
      os << " ";
      write_double(os, f);
    }
    os << " " << e.insertion_index << "\n";
  }
}

void ReplayBuffer::dump_file(const std::string& path) const {
  std::ofstream os(path);
  require(os.good(), Status::IoError, "cannot open for writing: " + path);
  dump(os);
  os.flush();
  require(os.good(), Status::IoError, "write failed: " + path);
}

ReplayBuffer ReplayBuffer::load(std::istream& is) {
  std::string magic;
  int version = 0;
  is >> magic >> version;
  require(is.good() && magic == "checal_buffer" && version == 1,
          Status::IoError, "buffer dump: bad header");

  std::string key;
  SarsConfig cfg;
  std::uint64_t next_insertion = 0;
  is >> key;
  require(key == "config", Status::IoError, "buffer dump: missing config line");
  is >> key >> cfg.capacity;
  require(is.good() && key == "capacity", Status::IoError,
          "buffer dump: bad capacity field");
  is >> key >> cfg.radius;
  require(is.good() && key == "radius", Status::IoError,
          "buffer dump: bad radius field");
  is >> key >> cfg.lambda;
  require(is.good() && key == "lambda", Status::IoError,
          "buffer dump: bad lambda field");
  int cross_scene = 1;
  is >> key >> cross_scene;
  require(is.good() && key == "cross_scene", Status::IoError,
          "buffer dump: bad cross_scene field");
  cfg.cross_scene = cross_scene != 0;
  is >> key >> next_insertion;
  require(is.good() && key == "next_insertion", Status::IoError,
          "buffer dump: bad next_insertion field");

  ReplayBuffer buffer(cfg);
  while (is >> key) {
    require(key == "sample", Status::IoError, "buffer dump: bad record tag");
    BufferEntry e;
    double f[7] = {};
    is >> e.sample.sample_id >> e.sample.scene_id >> f[0] >> f[1] >> f[2] >>
        f[3] >> f[4] >> f[5] >> f[6] >> e.insertion_index;
    require(static_cast<bool>(is), Status::IoError,
            "buffer dump: truncated sample record");
    e.sample.pose.position = Vec3(f[0], f[1], f[2]);
    e.sample.pose.orientation = Quat{f[3], f[4], f[5], f[6]};
    e.sample.payload_ref = e.sample.sample_id;
    require(buffer.entries_.size() < cfg.capacity, Status::IoError,
            "buffer dump: more samples than capacity");
    buffer.entries_.push_back(e);
  }
  buffer.next_insertion_ = next_insertion;
  return buffer;
}

ReplayBuffer ReplayBuffer::load_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open for reading: " + path);
  return load(is);
}

}  // namespace checal
