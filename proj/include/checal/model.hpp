#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "checal/rng.hpp"
#include "checal/scr_head.hpp"
#include "checal/spdd.hpp"

namespace checal {

// Two-layer perceptron: feature_dim -> hidden (tanh) -> 5K raw outputs laid
// out per row as [logits K | offsets K*3 row-major | raw_scales K].
struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x feature_dim
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // 5K x hidden
  Eigen::VectorXd b2;  // 5K
  // Incremented by every optimizer step; lets backward() reject caches that
  // were produced by a different parameter state.
  std::uint64_t revision = 0;

  int feature_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int output_dim() const { return static_cast<int>(w2.rows()); }
  int center_count() const { return output_dim() / 5; }
  void validate() const;
};

// Symmetric U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, and a
// zeroed raw-scale output block so the clamped scale starts exactly at 1.
MlpParams init_params(int feature_dim, int hidden_dim, int k, Rng& rng);

struct ForwardCache {
  Eigen::MatrixXd input;  // B x feature_dim
  Eigen::MatrixXd act1;   // B x hidden (tanh outputs)
  std::uint64_t params_revision = 0;
};

struct ForwardResult {
  std::vector<HeadOutput> outputs;  // one per batch row
  ForwardCache cache;
};

ForwardResult forward(const MlpParams& params, const Eigen::MatrixXd& features);

// Row <-> HeadOutput conversions for the 5K output layout.
HeadOutput split_head_row(const Eigen::RowVectorXd& row, int k);
Eigen::RowVectorXd pack_head_grads(const HeadGrads& grads);

// Robust clipped L1 in scene-coordinate space: mean over rows of
// min(|pred - gt|_1, clamp).
double pose_loss(const MatX3& pred, const MatX3& gt, double clamp);
// d(pose_loss)/d(pred); rows at or beyond the clamp get zero gradient.
MatX3 pose_loss_backward(const MatX3& pred, const MatX3& gt, double clamp);

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;

  static Gradients zero_like(const MlpParams& params);
  void accumulate(const Gradients& other, double scale = 1.0);
};

// Backprop through the MLP given d(loss)/d(raw outputs), one row per batch
// element. The cache must come from a forward() against the same revision.
Gradients backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grads);

double global_norm(const Gradients& grads);
void clip_by_global_norm(Gradients& grads, double max_norm);

struct AdamConfig {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;  // decoupled
};

struct AdamState {
  AdamConfig config;
  long step = 0;
  Eigen::MatrixXd m_w1, v_w1, m_w2, v_w2;
  Eigen::VectorXd m_b1, v_b1, m_b2, v_b2;

  static AdamState init(const MlpParams& params, const AdamConfig& config);
};

// AdamW step with bias correction; bumps params.revision. Non-finite
// gradients or parameters raise TrainingDivergence.
void adam_step(MlpParams& params, const Gradients& grads, AdamState& state);

// Bit-exact text checkpoint (hexfloat payload).
void save_params_file(const MlpParams& params, const std::string& path);
MlpParams load_params_file(const std::string& path);

struct GradcheckRow {
  std::string block;  // pose | prior | metric | output | total
  double max_rel_err = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckRow> rows;
  double worst() const;
  bool pass(double threshold) const { return worst() < threshold; }
};

struct GradcheckConfig {
  int k = 8;
  int hidden = 16;
  int feature_dim = 6;
  int new_batch = 4;     // rows supervised by pose_loss
  int replay_batch = 3;  // rows supervised by spdd_loss
  double fd_epsilon = 1e-5;
  bool corrupt = false;   // negative control: perturb one analytic gradient
  bool zero_mode = false; // all-zero params, teacher == student, gt == pred
};

// Compares analytic backward against central finite differences of the full
// pipeline (forward -> head -> pose_loss + spdd_loss), one row per block.
GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed);

}  // namespace checal
