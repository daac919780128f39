#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "checal/error.hpp"
#include "checal/geometry.hpp"

namespace checal {

// Fixed 3D anchor points; constructed once per experiment, immutable after.
class ClusterCenters {
 public:
  explicit ClusterCenters(MatX3 centers);

  int count() const { return static_cast<int>(centers_.rows()); }
  const MatX3& points() const { return centers_; }
  Vec3 row(int i) const;

  void save_file(const std::string& path) const;  // K rows of 3 numbers
  static ClusterCenters load_file(const std::string& path);

 private:
  MatX3 centers_;
};

// Raw head emission for one feature location: logits z, per-center offsets
// d-dot, raw (pre-clamp) scales w-hat.
struct HeadOutput {
  Eigen::VectorXd logits;
  MatX3 offsets;
  Eigen::VectorXd raw_scales;

  int center_count() const { return static_cast<int>(logits.size()); }
  void validate(int expected_k) const;
};

struct ScaleBounds {
  double q_min = 0.1;
  double q_max = 100.0;

  void validate() const;
  // Softplus sharpness chosen so clamp_scale(0) == 1 at the default bounds:
  // beta = ln2 / (1 - 1/q_max).
  double beta_softplus() const { return 0.6931471805599453 / (1.0 - 1.0 / q_max); }
  double min_scale() const { return 1.0 / q_max; }
  double max_scale() const { return 1.0 / q_min; }
};

// Stable softmax of logits/tau (max-subtracted). tau=1 recovers Eq. 6.
Eigen::VectorXd softmax_with_temperature(const Eigen::VectorXd& logits, double tau);

// Eq. 7: w = min(1/q_min, softplus_beta(raw) + 1/q_max), in (1/q_max, 1/q_min].
double clamp_scale(double raw, const ScaleBounds& bounds);
// d(clamp_scale)/d(raw); 0 where the outer min clamps (subgradient choice).
double clamp_scale_derivative(double raw, const ScaleBounds& bounds);

// Rows of offsets[a] / clamp_scale(raw_scales[a]) for each active index a.
MatX3 effective_offsets(const HeadOutput& out, const ScaleBounds& bounds,
                        const std::vector<int>& active);

enum class PredictionMode {
  Blend,       // Eq. 6 read as sum_i p_i (c_i + d_i/w_i)
  Top1Offset,  // literal single-offset reading: argmax center's refinement only
};

// Eq. 6 forward pass for one feature location.
Vec3 predict_coordinate(const HeadOutput& out, const ClusterCenters& centers,
                        const ScaleBounds& bounds,
                        PredictionMode mode = PredictionMode::Blend);

struct HeadGrads {
  Eigen::VectorXd logits;
  MatX3 offsets;
  Eigen::VectorXd raw_scales;

  static HeadGrads zero(int k);
  void accumulate(const HeadGrads& other, double scale = 1.0);
};

// Analytic gradients of predict_coordinate contracted with an upstream
// 3-vector gradient. Where the outer min in the scale clamp is active the
// scale gradient is 0 (subgradient choice); Top1Offset treats the argmax
// index as locally constant.
HeadGrads head_backward(const HeadOutput& out, const ClusterCenters& centers,
                        const ScaleBounds& bounds, const Vec3& upstream,
                        PredictionMode mode = PredictionMode::Blend);

}  // namespace checal
