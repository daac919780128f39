#include "checal/spdd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace checal {

void DistillWeights::validate() const {
  require(std::isfinite(alpha) && alpha >= 0.0, Status::InvalidInput,
          "distill weights: alpha must be non-negative");
  require(std::isfinite(beta_metric) && beta_metric >= 0.0, Status::InvalidInput,
          "distill weights: beta_metric must be non-negative");
  require(std::isfinite(gamma) && gamma >= 0.0, Status::InvalidInput,
          "distill weights: gamma must be non-negative");
  require(std::isfinite(tau) && tau > 0.0, Status::InvalidInput,
          "distill weights: tau must be positive");
  require(active_size >= 1, Status::InvalidInput,
          "distill weights: active_size must be >= 1");
}

ActiveSet select_active_set(const Eigen::VectorXd& teacher_probs, int m) {
  require(m >= 1, Status::InvalidInput, "active set: m must be >= 1");
  const int k = static_cast<int>(teacher_probs.size());
  require(k >= 1, Status::InvalidInput, "active set: empty probabilities");
  require(teacher_probs.allFinite(), Status::InvalidInput,
          "active set: non-finite probabilities");
  require(std::abs(teacher_probs.sum() - 1.0) <= 1e-9, Status::InvalidInput,
          "active set: probabilities must sum to 1");

  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return teacher_probs(a) > teacher_probs(b);  // stable: ties keep lower index
  });
  const int take = std::min(m, k);
  ActiveSet out;
  out.indices.assign(order.begin(), order.begin() + take);
  return out;
}

namespace {

void validate_active(const ActiveSet& active, int k) {
  require(!active.indices.empty(), Status::InvalidInput, "active set is empty");
  for (const int a : active.indices) {
    require(a >= 0 && a < k, Status::InvalidInput,
            "active set: index out of range");
  }
}

}  // namespace

Eigen::VectorXd renormalized_distribution(const Eigen::VectorXd& logits,
                                          const ActiveSet& active, double tau) {
  require(std::isfinite(tau) && tau > 0.0, Status::InvalidInput,
          "renormalized_distribution: tau must be positive");
  validate_active(active, static_cast<int>(logits.size()));
  require(logits.allFinite(), Status::InvalidInput,
          "renormalized_distribution: non-finite logits");
  Eigen::VectorXd sub(static_cast<Eigen::Index>(active.size()));
  for (std::size_t r = 0; r < active.size(); ++r)
    sub(static_cast<Eigen::Index>(r)) = logits(active.indices[r]);
  return softmax_with_temperature(sub, tau);
}

double prior_loss(const Eigen::VectorXd& teacher_logits,
                  const Eigen::VectorXd& student_logits, const ActiveSet& active,
                  double tau) {
  require(teacher_logits.size() == student_logits.size(),
          Status::DimensionMismatch, "prior_loss: logit sizes differ");
  const Eigen::VectorXd pt = renormalized_distribution(teacher_logits, active, tau);
  const Eigen::VectorXd ps = renormalized_distribution(student_logits, active, tau);
  double kl = 0.0;
  for (Eigen::Index i = 0; i < pt.size(); ++i)
    kl += pt(i) * (std::log(pt(i)) - std::log(ps(i)));
  return tau * tau * std::max(kl, 0.0);
}

double metric_loss(const HeadOutput& teacher, const HeadOutput& student,
                   const ScaleBounds& bounds, const ActiveSet& active) {
  require(teacher.center_count() == student.center_count(),
          Status::DimensionMismatch, "metric_loss: K differs");
  const MatX3 dt = effective_offsets(teacher, bounds, active.indices);
  const MatX3 ds = effective_offsets(student, bounds, active.indices);
  return (ds - dt).cwiseAbs().rowwise().sum().mean();
}

double output_loss(const Vec3& student_coord, const Vec3& teacher_coord) {
  require(student_coord.allFinite() && teacher_coord.allFinite(),
          Status::InvalidInput, "output_loss: non-finite coordinates");
  return (student_coord - teacher_coord).cwiseAbs().sum();
}

namespace {

struct ElementTerms {
  double prior = 0.0;
  double metric = 0.0;
  double output = 0.0;
};

ElementTerms element_losses(const HeadOutput& t, const HeadOutput& s,
                            const ClusterCenters& centers,
                            const ScaleBounds& bounds,
                            const DistillWeights& weights,
                            const ActiveSet& active, PredictionMode mode) {
  ElementTerms e;
  e.prior = prior_loss(t.logits, s.logits, active, weights.tau);
  e.metric = metric_loss(t, s, bounds, active);
  e.output = output_loss(predict_coordinate(s, centers, bounds, mode),
                         predict_coordinate(t, centers, bounds, mode));
  return e;
}

}  // namespace

DistillLosses spdd_loss(std::span<const HeadOutput> teacher,
                        std::span<const HeadOutput> student,
                        const ClusterCenters& centers, const ScaleBounds& bounds,
                        const DistillWeights& weights, PredictionMode mode) {
  weights.validate();
  require(!teacher.empty(), Status::InvalidInput, "spdd_loss: empty batch");
  require(teacher.size() == student.size(), Status::DimensionMismatch,
          "spdd_loss: teacher/student batch sizes differ");
  const int k = centers.count();
  DistillLosses out;
  for (std::size_t e = 0; e < teacher.size(); ++e) {
    teacher[e].validate(k);
    student[e].validate(k);
    const ActiveSet active = select_active_set(
        softmax_with_temperature(teacher[e].logits, weights.tau),
        weights.active_size);
    const ElementTerms terms =
        element_losses(teacher[e], student[e], centers, bounds, weights, active, mode);
    out.prior += terms.prior;
    out.metric += terms.metric;
    out.output += terms.output;
  }
  const double inv_b = 1.0 / static_cast<double>(teacher.size());
  out.prior *= inv_b;
  out.metric *= inv_b;
  out.output *= inv_b;
  out.total = weights.alpha * out.prior + weights.beta_metric * out.metric +
              weights.gamma * out.output;
  return out;
}

namespace {

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

SpddBackwardResult spdd_backward(std::span<const HeadOutput> teacher,
                                 std::span<const HeadOutput> student,
                                 const ClusterCenters& centers,
                                 const ScaleBounds& bounds,
                                 const DistillWeights& weights,
                                 PredictionMode mode) {
  weights.validate();
  require(!teacher.empty(), Status::InvalidInput, "spdd_backward: empty batch");
  require(teacher.size() == student.size(), Status::DimensionMismatch,
          "spdd_backward: teacher/student batch sizes differ");
  const int k = centers.count();
  const double inv_b = 1.0 / static_cast<double>(teacher.size());

  SpddBackwardResult out;
  out.student_grads.reserve(teacher.size());
  for (std::size_t e = 0; e < teacher.size(); ++e) {
    const HeadOutput& t = teacher[e];
    const HeadOutput& s = student[e];
    t.validate(k);
    s.validate(k);
    const ActiveSet active = select_active_set(
        softmax_with_temperature(t.logits, weights.tau), weights.active_size);
    const ElementTerms terms =
        element_losses(t, s, centers, bounds, weights, active, mode);
    out.losses.prior += terms.prior;
    out.losses.metric += terms.metric;
    out.losses.output += terms.output;

    HeadGrads g = HeadGrads::zero(k);

    // Prior term: dL/dz_j = tau * (pS_j - pT_j) on active indices.
    const Eigen::VectorXd pt =
        renormalized_distribution(t.logits, active, weights.tau);
    const Eigen::VectorXd ps =
        renormalized_distribution(s.logits, active, weights.tau);
    const double a_scale = weights.alpha * inv_b;
    for (std::size_t r = 0; r < active.size(); ++r) {
      const int j = active.indices[r];
      g.logits(j) += a_scale * weights.tau *
                     (ps(static_cast<Eigen::Index>(r)) -
                      pt(static_cast<Eigen::Index>(r)));
    }

    // Metric term: per active center j, Delta_S = d_j / w_j.
    //   dL/dd_jc   = sign(Delta_S - Delta_T)_c / (|A| * w_j)
    //   dL/draw_j  = -sum_c sign_c * d_jc * w'_j / (|A| * w_j^2)
    const MatX3 dt_eff = effective_offsets(t, bounds, active.indices);
    const MatX3 ds_eff = effective_offsets(s, bounds, active.indices);
    const double m_scale =
        weights.beta_metric * inv_b / static_cast<double>(active.size());
    for (std::size_t r = 0; r < active.size(); ++r) {
      const int j = active.indices[r];
      const double w = clamp_scale(s.raw_scales(j), bounds);
      const double wp = clamp_scale_derivative(s.raw_scales(j), bounds);
      double raw_acc = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double sg = sign0(ds_eff(static_cast<Eigen::Index>(r), c) -
                                dt_eff(static_cast<Eigen::Index>(r), c));
        g.offsets(j, c) += m_scale * sg / w;
        raw_acc += sg * s.offsets(j, c);
      }
      g.raw_scales(j) += -m_scale * raw_acc * wp / (w * w);
    }

    // Output term: L1 on final predictions; chain through the full head.
    const Vec3 xs = predict_coordinate(s, centers, bounds, mode);
    const Vec3 xt = predict_coordinate(t, centers, bounds, mode);
    const Vec3 u(sign0(xs.x() - xt.x()), sign0(xs.y() - xt.y()),
                 sign0(xs.z() - xt.z()));
    if (u.squaredNorm() > 0.0) {
      const HeadGrads go = head_backward(s, centers, bounds, u, mode);
      g.accumulate(go, weights.gamma * inv_b);
    }

    out.student_grads.push_back(std::move(g));
  }

  out.losses.prior *= inv_b;
  out.losses.metric *= inv_b;
  out.losses.output *= inv_b;
  out.losses.total = weights.alpha * out.losses.prior +
                     weights.beta_metric * out.losses.metric +
                     weights.gamma * out.losses.output;
  return out;
}

}  // namespace checal
