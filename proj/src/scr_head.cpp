#include "checal/scr_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace checal {

ClusterCenters::ClusterCenters(MatX3 centers) : centers_(std::move(centers)) {
  require(centers_.rows() >= 1, Status::InvalidInput,
          "cluster centers: need K >= 1");
  require(centers_.allFinite(), Status::InvalidInput,
          "cluster centers: non-finite entries");
}

Vec3 ClusterCenters::row(int i) const {
  require(i >= 0 && i < count(), Status::InvalidInput,
          "cluster centers: index out of range");
  return centers_.row(i).transpose();
}

void ClusterCenters::save_file(const std::string& path) const {
  std::ofstream os(path);
  require(os.good(), Status::IoError, "cannot open for writing: " + path);
  char buf[128];
  for (int i = 0; i < count(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", centers_(i, 0),
                  centers_(i, 1), centers_(i, 2));
    os << buf;
  }
  os.flush();
  require(os.good(), Status::IoError, "write failed: " + path);
}

ClusterCenters ClusterCenters::load_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open for reading: " + path);
  std::vector<Vec3> rows;
  double x = 0, y = 0, z = 0;
  while (is >> x >> y >> z) rows.emplace_back(x, y, z);
  require(is.eof(), Status::IoError, "centers file: malformed row");
  require(!rows.empty(), Status::IoError, "centers file: empty");
  MatX3 m(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return ClusterCenters(m);
}

void HeadOutput::validate(int expected_k) const {
  require(static_cast<int>(logits.size()) == expected_k &&
              static_cast<int>(offsets.rows()) == expected_k &&
              static_cast<int>(raw_scales.size()) == expected_k,
          Status::DimensionMismatch, "head output: dimensions disagree with K");
  require(logits.allFinite() && offsets.allFinite() && raw_scales.allFinite(),
          Status::InvalidInput, "head output: non-finite entries");
}

void ScaleBounds::validate() const {
  require(std::isfinite(q_min) && std::isfinite(q_max) && q_min > 0.0,
          Status::InvalidInput, "scale bounds: q_min must be positive");
  require(q_max > q_min && q_max > 1.0, Status::InvalidInput,
          "scale bounds: require q_max > q_min and q_max > 1");
}

Eigen::VectorXd softmax_with_temperature(const Eigen::VectorXd& logits,
                                         double tau) {
  require(std::isfinite(tau) && tau > 0.0, Status::InvalidInput,
          "softmax: tau must be positive");
  require(logits.size() >= 1, Status::InvalidInput, "softmax: empty logits");
  require(logits.allFinite(), Status::InvalidInput, "softmax: non-finite logits");
  const Eigen::VectorXd scaled = logits / tau;
  const double m = scaled.maxCoeff();
  Eigen::VectorXd p = (scaled.array() - m).exp();
  p /= p.sum();
  return p;
}

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

double clamp_scale(double raw, const ScaleBounds& bounds) {
  bounds.validate();
  require(std::isfinite(raw), Status::InvalidInput, "clamp_scale: non-finite raw");
  const double beta = bounds.beta_softplus();
  const double inner = softplus(beta * raw) / beta + bounds.min_scale();
  return std::min(bounds.max_scale(), inner);
}

double clamp_scale_derivative(double raw, const ScaleBounds& bounds) {
  bounds.validate();
  require(std::isfinite(raw), Status::InvalidInput, "clamp_scale: non-finite raw");
  const double beta = bounds.beta_softplus();
  const double inner = softplus(beta * raw) / beta + bounds.min_scale();
  if (inner >= bounds.max_scale()) return 0.0;  // min-clamp active (kink -> 0)
  return sigmoid(beta * raw);
}

MatX3 effective_offsets(const HeadOutput& out, const ScaleBounds& bounds,
                        const std::vector<int>& active) {
  out.validate(out.center_count());
  MatX3 eff(static_cast<Eigen::Index>(active.size()), 3);
  for (std::size_t r = 0; r < active.size(); ++r) {
    const int a = active[r];
    require(a >= 0 && a < out.center_count(), Status::InvalidInput,
            "effective_offsets: active index out of range");
    eff.row(static_cast<Eigen::Index>(r)) =
        out.offsets.row(a) / clamp_scale(out.raw_scales(a), bounds);
  }
  return eff;
}

Vec3 predict_coordinate(const HeadOutput& out, const ClusterCenters& centers,
                        const ScaleBounds& bounds, PredictionMode mode) {
  const int k = centers.count();
  out.validate(k);
  bounds.validate();
  const Eigen::VectorXd p = softmax_with_temperature(out.logits, 1.0);
  if (mode == PredictionMode::Top1Offset) {
    int top = 0;
    out.logits.maxCoeff(&top);
    const Vec3 blend = centers.points().transpose() * p;
    return blend + out.offsets.row(top).transpose() /
                       clamp_scale(out.raw_scales(top), bounds);
  }
  Vec3 x = Vec3::Zero();
  for (int i = 0; i < k; ++i) {
    const double w = clamp_scale(out.raw_scales(i), bounds);
    x += p(i) * (centers.row(i) + out.offsets.row(i).transpose() / w);
  }
  return x;
}

HeadGrads HeadGrads::zero(int k) {
  HeadGrads g;
  g.logits = Eigen::VectorXd::Zero(k);
  g.offsets = MatX3::Zero(k, 3);
  g.raw_scales = Eigen::VectorXd::Zero(k);
  return g;
}

void HeadGrads::accumulate(const HeadGrads& other, double scale) {
  logits += scale * other.logits;
  offsets += scale * other.offsets;
  raw_scales += scale * other.raw_scales;
}

HeadGrads head_backward(const HeadOutput& out, const ClusterCenters& centers,
                        const ScaleBounds& bounds, const Vec3& upstream,
                        PredictionMode mode) {
  const int k = centers.count();
  out.validate(k);
  require(upstream.allFinite(), Status::InvalidInput,
          "head_backward: non-finite upstream gradient");
  const Eigen::VectorXd p = softmax_with_temperature(out.logits, 1.0);

  HeadGrads g = HeadGrads::zero(k);
  if (mode == PredictionMode::Top1Offset) {
    // x_hat = sum_i p_i c_i + d_a / w_a with a = argmax logits (treated as
    // locally constant, like any argmax).
    int top = 0;
    out.logits.maxCoeff(&top);
    const Vec3 blend = centers.points().transpose() * p;
    for (int j = 0; j < k; ++j) {
      g.logits(j) = p(j) * (centers.row(j) - blend).dot(upstream);
    }
    const double w_top = clamp_scale(out.raw_scales(top), bounds);
    const double wp_top = clamp_scale_derivative(out.raw_scales(top), bounds);
    g.offsets.row(top) = upstream.transpose() / w_top;
    g.raw_scales(top) = -upstream.dot(out.offsets.row(top).transpose()) *
                        wp_top / (w_top * w_top);
    return g;
  }
  // x_hat = sum_i p_i * b_i, b_i = c_i + d_i / w_i. With u = upstream:
  //   d/dz_j    = p_j * (b_j - x_hat) . u        (softmax Jacobian)
  //   d/dd_j    = (p_j / w_j) * u
  //   d/draw_j  = -p_j * (u . d_j) * w'_j / w_j^2
  Eigen::VectorXd w(k), wprime(k);
  MatX3 b(k, 3);
  for (int i = 0; i < k; ++i) {
    w(i) = clamp_scale(out.raw_scales(i), bounds);
    wprime(i) = clamp_scale_derivative(out.raw_scales(i), bounds);
    b.row(i) = centers.points().row(i) + out.offsets.row(i) / w(i);
  }
  const Vec3 x_hat = b.transpose() * p;
  for (int j = 0; j < k; ++j) {
    g.logits(j) = p(j) * (b.row(j).transpose() - x_hat).dot(upstream);
    g.offsets.row(j) = (p(j) / w(j)) * upstream.transpose();
    g.raw_scales(j) = -p(j) * upstream.dot(out.offsets.row(j).transpose()) *
                      wprime(j) / (w(j) * w(j));
  }
  return g;
}

}  // namespace checal
