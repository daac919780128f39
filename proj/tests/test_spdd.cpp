#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "checal/error.hpp"
#include "checal/rng.hpp"
#include "checal/scr_head.hpp"
#include "checal/spdd.hpp"

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

Eigen::VectorXd probs3(double a, double b, double c) {
  Eigen::VectorXd p(3);
  p << a, b, c;
  return p;
}

HeadOutput make_output(const Eigen::VectorXd& logits, const MatX3& offsets,
                       const Eigen::VectorXd& raw) {
  HeadOutput out;
  out.logits = logits;
  out.offsets = offsets;
  out.raw_scales = raw;
  return out;
}

HeadOutput random_output(int k, Rng& rng) {
  HeadOutput out;
  out.logits = Eigen::VectorXd::Zero(k);
  out.offsets = MatX3::Zero(k, 3);
  out.raw_scales = Eigen::VectorXd::Zero(k);
  for (int i = 0; i < k; ++i) {
    out.logits(i) = rng.uniform(-2.0, 2.0);
    out.raw_scales(i) = rng.uniform(-1.5, 1.5);
    for (int j = 0; j < 3; ++j) out.offsets(i, j) = rng.uniform(-1.0, 1.0);
  }
  return out;
}

ClusterCenters random_centers(int k, Rng& rng) {
  MatX3 c(k, 3);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < 3; ++j) c(i, j) = rng.uniform(-2.0, 2.0);
  return ClusterCenters(c);
}

// Independent KL oracle over the active set, written against Eqs. 8-9.
double oracle_prior(const Eigen::VectorXd& zt, const Eigen::VectorXd& zs,
                    const std::vector<int>& active, double tau) {
  auto renorm = [&](const Eigen::VectorXd& z) {
    std::vector<double> e;
    double sum = 0.0;
    for (const int a : active) {
      e.push_back(std::exp(z(a) / tau));
      sum += e.back();
    }
    for (auto& v : e) v /= sum;
    return e;
  };
  const auto pt = renorm(zt);
  const auto ps = renorm(zs);
  double kl = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i)
    kl += pt[i] * std::log(pt[i] / ps[i]);
  return tau * tau * kl;
}

}  // namespace

TEST_CASE("distill weights validation") {
  DistillWeights w;
  w.validate();
  w.alpha = -0.5;
  CHECK(thrown_status([&] { w.validate(); }) == Status::InvalidInput);
  w = DistillWeights{};
  w.tau = 0.0;
  CHECK(thrown_status([&] { w.validate(); }) == Status::InvalidInput);
  w = DistillWeights{};
  w.active_size = 0;
  CHECK(thrown_status([&] { w.validate(); }) == Status::InvalidInput);
}

TEST_CASE("select_active_set ranks by probability with index tie-break") {
  const ActiveSet top2 = select_active_set(probs3(0.5, 0.3, 0.2), 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2.indices == std::vector<int>{0, 1});

  // exact tie: the lower index ranks first
  const ActiveSet tie = select_active_set(probs3(0.4, 0.4, 0.2), 1);
  REQUIRE(tie.size() == 1);
  CHECK(tie.indices == std::vector<int>{0});

  const ActiveSet rev = select_active_set(probs3(0.2, 0.3, 0.5), 2);
  CHECK(rev.indices == std::vector<int>{2, 1});

  // m clamps to K
  const ActiveSet all = select_active_set(probs3(0.2, 0.3, 0.5), 50);
  CHECK(all.indices == std::vector<int>{2, 1, 0});

  CHECK(thrown_status([&] { select_active_set(probs3(0.5, 0.3, 0.2), 0); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] { select_active_set(probs3(0.9, 0.3, 0.2), 2); }) ==
        Status::InvalidInput);  // not a distribution
}

TEST_CASE("renormalized_distribution restricts then normalizes") {
  Eigen::VectorXd z(3);
  z << 2.0, 0.0, -5.0;
  ActiveSet active;
  active.indices = {0, 1};

  const Eigen::VectorXd p1 = renormalized_distribution(z, active, 1.0);
  REQUIRE(p1.size() == 2);
  CHECK(p1(0) == doctest::Approx(0.8807970779778824).epsilon(1e-12));
  CHECK(p1(1) == doctest::Approx(0.11920292202211757).epsilon(1e-12));
  CHECK(p1.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::VectorXd p2 = renormalized_distribution(z, active, 2.0);
  CHECK(p2(0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(p2(1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));

  ActiveSet one;
  one.indices = {2};
  const Eigen::VectorXd single = renormalized_distribution(z, one, 1.0);
  REQUIRE(single.size() == 1);
  CHECK(single(0) == doctest::Approx(1.0));

  ActiveSet bad;
  bad.indices = {3};
  CHECK(thrown_status([&] { renormalized_distribution(z, bad, 1.0); }) ==
        Status::InvalidInput);
  CHECK(thrown_status([&] { renormalized_distribution(z, active, 0.0); }) ==
        Status::InvalidInput);
}

TEST_CASE("prior_loss matches the frozen oracle values") {
  Eigen::VectorXd zt(2), zs(2);
  zt << 2.0, 0.0;
  zs << 0.0, 2.0;
  ActiveSet active;
  active.indices = {0, 1};

  // tau^2 KL(softmax(2,0) || softmax(0,2)) = 2 tanh(1)
  CHECK(prior_loss(zt, zs, active, 1.0) ==
        doctest::Approx(1.5231883119115297).epsilon(1e-9));
  // at tau=2 the softened logits are (1,0) vs (0,1): 4 tanh(1/2)
  CHECK(prior_loss(zt, zs, active, 2.0) ==
        doctest::Approx(1.8484686290400390).epsilon(1e-9));

  // identical distributions
  CHECK(prior_loss(zt, zt, active, 1.0) <= 1e-12);
  CHECK(prior_loss(zt, zt, active, 3.0) <= 1e-12);

  // shift invariance of both arguments
  Eigen::VectorXd zts = zt.array() + 40.0;
  Eigen::VectorXd zss = zs.array() - 17.0;
  CHECK(prior_loss(zts, zss, active, 2.0) ==
        doctest::Approx(prior_loss(zt, zs, active, 2.0)).epsilon(1e-9));

  // random instances against an independent oracle
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const int k = 6;
    Eigen::VectorXd a(k), b(k);
    for (int i = 0; i < k; ++i) {
      a(i) = rng.uniform(-3.0, 3.0);
      b(i) = rng.uniform(-3.0, 3.0);
    }
    ActiveSet subset;
    subset.indices = {0, 2, 5};
    const double tau = rng.uniform(0.5, 4.0);
    CHECK(prior_loss(a, b, subset, tau) ==
          doctest::Approx(oracle_prior(a, b, subset.indices, tau))
              .epsilon(1e-10));
  }

  Eigen::VectorXd wrong(3);
  wrong << 1, 2, 3;
  CHECK(thrown_status([&] { prior_loss(zt, wrong, active, 1.0); }) ==
        Status::DimensionMismatch);
}

TEST_CASE("metric_loss averages per-center effective-offset L1 differences") {
  ScaleBounds bounds;
  // one active center, raw 0 -> w=1: difference (1,0,0) -> 1.0
  HeadOutput teacher = make_output(Eigen::VectorXd::Zero(2), MatX3::Zero(2, 3),
                                   Eigen::VectorXd::Zero(2));
  MatX3 s_off = MatX3::Zero(2, 3);
  s_off(0, 0) = 1.0;
  HeadOutput student = make_output(Eigen::VectorXd::Zero(2), s_off,
                                   Eigen::VectorXd::Zero(2));
  ActiveSet one;
  one.indices = {0};
  CHECK(metric_loss(teacher, student, bounds, one) == doctest::Approx(1.0));

  // two active centers with coordinate-summed diffs 1 and 3 -> mean 2
  MatX3 s_off2 = MatX3::Zero(2, 3);
  s_off2.row(0) << 1, 0, 0;
  s_off2.row(1) << 1, 1, 1;
  HeadOutput student2 = make_output(Eigen::VectorXd::Zero(2), s_off2,
                                    Eigen::VectorXd::Zero(2));
  ActiveSet both;
  both.indices = {0, 1};
  CHECK(metric_loss(teacher, student2, bounds, both) == doctest::Approx(2.0));

  // identical heads -> 0
  CHECK(metric_loss(teacher, teacher, bounds, both) == 0.0);

  // the clamped scale participates: raw 1000 -> w=10 shrinks the offset
  HeadOutput scaled = student;
  scaled.raw_scales(0) = 1000.0;
  CHECK(metric_loss(teacher, scaled, bounds, one) == doctest::Approx(0.1));
}

TEST_CASE("output_loss is the coordinate L1 distance") {
  CHECK(output_loss(Vec3(0.3, -0.4, 0.0), Vec3::Zero()) ==
        doctest::Approx(0.7));
  CHECK(output_loss(Vec3(1, 1, 1), Vec3::Zero()) == doctest::Approx(3.0));
  CHECK(output_loss(Vec3(1, 2, 3), Vec3(1, 2, 3)) == 0.0);
}

TEST_CASE("spdd_loss composes per Eq. 12 and is zero at student == teacher") {
  Rng rng(7);
  const int k = 8;
  const ClusterCenters centers = random_centers(k, rng);
  ScaleBounds bounds;
  DistillWeights weights;
  weights.alpha = 0.7;
  weights.beta_metric = 1.3;
  weights.gamma = 2.1;
  weights.tau = 2.0;
  weights.active_size = 4;

  std::vector<HeadOutput> teacher, student;
  for (int i = 0; i < 3; ++i) {
    teacher.push_back(random_output(k, rng));
    student.push_back(random_output(k, rng));
  }

  // student == teacher: every component vanishes
  const DistillLosses zero = spdd_loss(teacher, teacher, centers, bounds, weights);
  CHECK(zero.prior <= 1e-12);
  CHECK(zero.metric <= 1e-12);
  CHECK(zero.output <= 1e-12);
  CHECK(zero.total <= 1e-12);

  // weighted composition identity
  const DistillLosses losses =
      spdd_loss(teacher, student, centers, bounds, weights);
  CHECK(losses.prior >= 0.0);
  CHECK(losses.metric >= 0.0);
  CHECK(losses.output >= 0.0);
  CHECK(std::abs(losses.total -
                 (weights.alpha * losses.prior +
                  weights.beta_metric * losses.metric +
                  weights.gamma * losses.output)) <= 1e-12);

  // alpha scales only the prior contribution
  DistillWeights doubled = weights;
  doubled.alpha *= 2.0;
  const DistillLosses scaled =
      spdd_loss(teacher, student, centers, bounds, doubled);
  CHECK(scaled.prior == doctest::Approx(losses.prior).epsilon(1e-12));
  CHECK(scaled.metric == doctest::Approx(losses.metric).epsilon(1e-12));
  CHECK(scaled.total == doctest::Approx(losses.total +
                                        weights.alpha * losses.prior)
                            .epsilon(1e-12));

  // batch order invariance: components are means over elements
  std::vector<HeadOutput> teacher_rev(teacher.rbegin(), teacher.rend());
  std::vector<HeadOutput> student_rev(student.rbegin(), student.rend());
  const DistillLosses rev =
      spdd_loss(teacher_rev, student_rev, centers, bounds, weights);
  CHECK(rev.prior == doctest::Approx(losses.prior).epsilon(1e-12));
  CHECK(rev.metric == doctest::Approx(losses.metric).epsilon(1e-12));
  CHECK(rev.output == doctest::Approx(losses.output).epsilon(1e-12));

  // batch averaging: duplicating every element leaves the means unchanged
  std::vector<HeadOutput> teacher_dup = teacher;
  std::vector<HeadOutput> student_dup = student;
  teacher_dup.insert(teacher_dup.end(), teacher.begin(), teacher.end());
  student_dup.insert(student_dup.end(), student.begin(), student.end());
  const DistillLosses dup =
      spdd_loss(teacher_dup, student_dup, centers, bounds, weights);
  CHECK(dup.total == doctest::Approx(losses.total).epsilon(1e-12));

  // batch size mismatch / empty batch
  CHECK(thrown_status([&] {
          spdd_loss(std::span<const HeadOutput>(teacher.data(), 2),
                    std::span<const HeadOutput>(student.data(), 3), centers,
                    bounds, weights);
        }) == Status::DimensionMismatch);
  CHECK(thrown_status([&] {
          spdd_loss(std::span<const HeadOutput>(), std::span<const HeadOutput>(),
                    centers, bounds, weights);
        }) == Status::InvalidInput);
}

TEST_CASE("prior and metric gradients vanish outside the active set") {
  Rng rng(11);
  const int k = 8;
  const ClusterCenters centers = random_centers(k, rng);
  ScaleBounds bounds;
  DistillWeights weights;
  weights.active_size = 3;
  weights.gamma = 0.0;  // isolate prior + metric

  std::vector<HeadOutput> teacher{random_output(k, rng)};
  std::vector<HeadOutput> student{random_output(k, rng)};

  const ActiveSet active = select_active_set(
      softmax_with_temperature(teacher[0].logits, weights.tau), 3);
  const SpddBackwardResult result =
      spdd_backward(teacher, student, centers, bounds, weights);
  REQUIRE(result.student_grads.size() == 1);
  const HeadGrads& g = result.student_grads[0];

  for (int i = 0; i < k; ++i) {
    const bool in_active = std::find(active.indices.begin(),
                                     active.indices.end(),
                                     i) != active.indices.end();
    if (!in_active) {
      CHECK(g.logits(i) == 0.0);
      CHECK(g.offsets.row(i).norm() == 0.0);
      CHECK(g.raw_scales(i) == 0.0);
    }
  }
}

TEST_CASE("spdd_backward matches finite differences") {
  Rng rng(13);
  const int k = 6;
  ScaleBounds bounds;
  DistillWeights weights;
  weights.alpha = 0.8;
  weights.beta_metric = 1.1;
  weights.gamma = 0.9;
  weights.tau = 2.0;
  weights.active_size = 3;

  for (const PredictionMode mode :
       {PredictionMode::Blend, PredictionMode::Top1Offset}) {
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
      const ClusterCenters centers = random_centers(k, rng);
      std::vector<HeadOutput> teacher{random_output(k, rng),
                                      random_output(k, rng)};
      std::vector<HeadOutput> student{random_output(k, rng),
                                      random_output(k, rng)};
      if (mode == PredictionMode::Top1Offset) {
        for (auto& s : student) {
          int top = 0;
          s.logits.maxCoeff(&top);
          s.logits(top) += 0.5;  // keep the argmax stable under FD probes
        }
      }

      // skip draws whose L1 arguments sit too close to a kink for central
      // differences to be valid (rare: entries are O(0.1) random values)
      const double eps = 1e-5;
      double margin = std::numeric_limits<double>::infinity();
      for (std::size_t b = 0; b < student.size(); ++b) {
        const ActiveSet active = select_active_set(
            softmax_with_temperature(teacher[b].logits, weights.tau),
            weights.active_size);
        const MatX3 dt =
            effective_offsets(teacher[b], bounds, active.indices);
        const MatX3 ds =
            effective_offsets(student[b], bounds, active.indices);
        margin = std::min(margin, (ds - dt).cwiseAbs().minCoeff());
        const Vec3 xs = predict_coordinate(student[b], centers, bounds, mode);
        const Vec3 xt = predict_coordinate(teacher[b], centers, bounds, mode);
        margin = std::min(margin, (xs - xt).cwiseAbs().minCoeff());
      }
      if (margin < 10.0 * eps) continue;

      const SpddBackwardResult result =
          spdd_backward(teacher, student, centers, bounds, weights, mode);
      CHECK(std::abs(result.losses.total -
                     spdd_loss(teacher, student, centers, bounds, weights, mode)
                         .total) <= 1e-12);

      double worst = 0.0;
      auto probe = [&](double* entry, double analytic) {
        const double saved = *entry;
        *entry = saved + eps;
        const double up =
            spdd_loss(teacher, student, centers, bounds, weights, mode).total;
        *entry = saved - eps;
        const double down =
            spdd_loss(teacher, student, centers, bounds, weights, mode).total;
        *entry = saved;
        const double numeric = (up - down) / (2.0 * eps);
        if (std::abs(analytic) < 1e-9 && std::abs(numeric) < 1e-9) return;
        // mixed relative/absolute: sub-unit gradients are compared in
        // absolute terms, which stays far above the FD noise floor
        worst = std::max(worst,
                         std::abs(analytic - numeric) /
                             std::max({std::abs(analytic), std::abs(numeric),
                                       1.0}));
      };

      for (std::size_t b = 0; b < student.size(); ++b) {
        const HeadGrads& g = result.student_grads[b];
        for (int i = 0; i < k; ++i) {
          probe(&student[b].logits(i), g.logits(i));
          probe(&student[b].raw_scales(i), g.raw_scales(i));
          for (int j = 0; j < 3; ++j)
            probe(&student[b].offsets(i, j), g.offsets(i, j));
        }
      }
      CHECK(worst < 1e-6);
      ++checked;
    }
    CHECK(checked >= 6);  // most draws are kink-free
  }
}

TEST_CASE("subgradient at exact agreement is zero") {
  Rng rng(17);
  const int k = 4;
  const ClusterCenters centers = random_centers(k, rng);
  ScaleBounds bounds;
  DistillWeights weights;
  weights.active_size = 2;

  std::vector<HeadOutput> shared{random_output(k, rng)};
  const SpddBackwardResult result =
      spdd_backward(shared, shared, centers, bounds, weights);
  // prior gradient also vanishes at equality (KL minimum), and the L1 terms
  // use sign(0) = 0
  CHECK(result.student_grads[0].logits.norm() == doctest::Approx(0.0));
  CHECK(result.student_grads[0].offsets.norm() == doctest::Approx(0.0));
  CHECK(result.student_grads[0].raw_scales.norm() == doctest::Approx(0.0));
}
