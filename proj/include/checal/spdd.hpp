#pragma once

#include <Eigen/Core>
#include <span>
#include <vector>

#include "checal/scr_head.hpp"

namespace checal {

struct DistillWeights {
  double alpha = 1.0;        // L_prior weight
  double beta_metric = 1.0;  // L_metric weight (distinct from softplus beta)
  double gamma = 1.0;        // L_out weight
  double tau = 2.0;          // distillation temperature
  int active_size = 50;      // M_a

  void validate() const;
};

// Top-M_a center indices ranked by descending teacher probability;
// ties broken by lower index. Order in `indices` is the ranking order.
struct ActiveSet {
  std::vector<int> indices;

  std::size_t size() const { return indices.size(); }
};

ActiveSet select_active_set(const Eigen::VectorXd& teacher_probs, int m);

// Eq. 8: softmax of logits/tau restricted to the active indices.
// Result is ordered like active.indices and sums to 1.
Eigen::VectorXd renormalized_distribution(const Eigen::VectorXd& logits,
                                          const ActiveSet& active, double tau);

// Eq. 9: tau^2 * KL(p_teacher || p_student) over the active set.
double prior_loss(const Eigen::VectorXd& teacher_logits,
                  const Eigen::VectorXd& student_logits, const ActiveSet& active,
                  double tau);

// Eq. 10: mean over active centers of the coordinate-summed absolute
// difference between student and teacher effective offsets.
double metric_loss(const HeadOutput& teacher, const HeadOutput& student,
                   const ScaleBounds& bounds, const ActiveSet& active);

// Eq. 11: L1 distance between final coordinate predictions.
double output_loss(const Vec3& student_coord, const Vec3& teacher_coord);

struct DistillLosses {
  double prior = 0.0;
  double metric = 0.0;
  double output = 0.0;
  double total = 0.0;
};

// Algorithm 2 over a replay batch: one HeadOutput per feature location.
// Teacher outputs are constants (stop-grad). Each component is averaged
// over the batch; total = alpha*prior + beta_metric*metric + gamma*output.
DistillLosses spdd_loss(std::span<const HeadOutput> teacher,
                        std::span<const HeadOutput> student,
                        const ClusterCenters& centers, const ScaleBounds& bounds,
                        const DistillWeights& weights,
                        PredictionMode mode = PredictionMode::Blend);

struct SpddBackwardResult {
  DistillLosses losses;
  std::vector<HeadGrads> student_grads;  // one per batch element
};

// Analytic gradients of spdd_loss w.r.t. the student head outputs.
// L1 subgradient at 0 is 0.
SpddBackwardResult spdd_backward(std::span<const HeadOutput> teacher,
                                 std::span<const HeadOutput> student,
                                 const ClusterCenters& centers,
                                 const ScaleBounds& bounds,
                                 const DistillWeights& weights,
                                 PredictionMode mode = PredictionMode::Blend);

}  // namespace checal
