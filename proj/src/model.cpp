#include "checal/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace checal {

void MlpParams::validate() const {
  require(w1.rows() >= 1 && w1.cols() >= 1, Status::InvalidInput,
          "model: empty first layer");
  require(b1.size() == w1.rows(), Status::DimensionMismatch,
          "model: b1 size mismatch");
  require(w2.cols() == w1.rows(), Status::DimensionMismatch,
          "model: w2/w1 dimension mismatch");
  require(b2.size() == w2.rows(), Status::DimensionMismatch,
          "model: b2 size mismatch");
  require(w2.rows() % 5 == 0 && w2.rows() >= 5, Status::DimensionMismatch,
          "model: output dim must be 5K");
  require(w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(),
          Status::InvalidInput, "model: non-finite parameters");
}

MlpParams init_params(int feature_dim, int hidden_dim, int k, Rng& rng) {
  require(feature_dim >= 1 && hidden_dim >= 1 && k >= 1, Status::InvalidInput,
          "init_params: dims must be >= 1");
  MlpParams p;
  const int out = 5 * k;
  p.w1.resize(hidden_dim, feature_dim);
  p.b1 = Eigen::VectorXd::Zero(hidden_dim);
  p.w2.resize(out, hidden_dim);
  p.b2 = Eigen::VectorXd::Zero(out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  for (int i = 0; i < hidden_dim; ++i)
    for (int j = 0; j < feature_dim; ++j) p.w1(i, j) = rng.uniform(-s1, s1);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < hidden_dim; ++j) p.w2(i, j) = rng.uniform(-s2, s2);
  // Zero the raw-scale output block (weights and biases) so every scale
  // starts exactly at clamp_scale(0) regardless of input.
  p.w2.block(4 * k, 0, k, hidden_dim).setZero();
  p.revision = 0;
  return p;
}

ForwardResult forward(const MlpParams& params, const Eigen::MatrixXd& features) {
  params.validate();
  require(features.cols() == params.feature_dim(), Status::DimensionMismatch,
          "forward: feature dimension mismatch");
  require(features.rows() >= 1, Status::InvalidInput, "forward: empty batch");
  require(features.allFinite(), Status::InvalidInput,
          "forward: non-finite features");

  ForwardResult r;
  r.cache.input = features;
  Eigen::MatrixXd pre1 = features * params.w1.transpose();
  pre1.rowwise() += params.b1.transpose();
  r.cache.act1 = pre1.array().tanh();
  Eigen::MatrixXd out = r.cache.act1 * params.w2.transpose();
  out.rowwise() += params.b2.transpose();
  r.cache.params_revision = params.revision;

  const int k = params.center_count();
  r.outputs.reserve(static_cast<std::size_t>(out.rows()));
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    r.outputs.push_back(split_head_row(out.row(i), k));
  return r;
}

HeadOutput split_head_row(const Eigen::RowVectorXd& row, int k) {
  require(row.size() == 5 * k, Status::DimensionMismatch,
          "split_head_row: row length must be 5K");
  HeadOutput h;
  h.logits = row.segment(0, k).transpose();
  h.offsets.resize(k, 3);
  for (int i = 0; i < k; ++i)
    for (int c = 0; c < 3; ++c) h.offsets(i, c) = row(k + 3 * i + c);
  h.raw_scales = row.segment(4 * k, k).transpose();
  return h;
}

Eigen::RowVectorXd pack_head_grads(const HeadGrads& grads) {
  const int k = static_cast<int>(grads.logits.size());
  Eigen::RowVectorXd row(5 * k);
  row.segment(0, k) = grads.logits.transpose();
  for (int i = 0; i < k; ++i)
    for (int c = 0; c < 3; ++c) row(k + 3 * i + c) = grads.offsets(i, c);
  row.segment(4 * k, k) = grads.raw_scales.transpose();
  return row;
}

double pose_loss(const MatX3& pred, const MatX3& gt, double clamp) {
  require(pred.rows() == gt.rows(), Status::DimensionMismatch,
          "pose_loss: batch sizes differ");
  require(pred.rows() >= 1, Status::InvalidInput, "pose_loss: empty batch");
  require(std::isfinite(clamp) && clamp > 0.0, Status::InvalidInput,
          "pose_loss: clamp must be positive");
  require(pred.allFinite() && gt.allFinite(), Status::InvalidInput,
          "pose_loss: non-finite coordinates");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const double l1 = (pred.row(i) - gt.row(i)).cwiseAbs().sum();
    acc += std::min(l1, clamp);
  }
  return acc / static_cast<double>(pred.rows());
}

MatX3 pose_loss_backward(const MatX3& pred, const MatX3& gt, double clamp) {
  require(pred.rows() == gt.rows(), Status::DimensionMismatch,
          "pose_loss_backward: batch sizes differ");
  require(pred.rows() >= 1, Status::InvalidInput,
          "pose_loss_backward: empty batch");
  MatX3 g = MatX3::Zero(pred.rows(), 3);
  const double inv_b = 1.0 / static_cast<double>(pred.rows());
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const Eigen::RowVector3d e = pred.row(i) - gt.row(i);
    if (e.cwiseAbs().sum() < clamp) {
      for (int c = 0; c < 3; ++c)
        g(i, c) = inv_b * (e(c) > 0.0 ? 1.0 : (e(c) < 0.0 ? -1.0 : 0.0));
    }
  }
  return g;
}

Gradients Gradients::zero_like(const MlpParams& params) {
  Gradients g;
  g.w1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(params.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
  g.b2 = Eigen::VectorXd::Zero(params.b2.size());
  return g;
}

void Gradients::accumulate(const Gradients& other, double scale) {
  w1 += scale * other.w1;
  b1 += scale * other.b1;
  w2 += scale * other.w2;
  b2 += scale * other.b2;
}

Gradients backward(const MlpParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grads) {
  params.validate();
  require(cache.params_revision == params.revision, Status::ContractViolation,
          "backward: cache is stale (parameters changed since forward)");
  require(output_grads.rows() == cache.act1.rows(), Status::DimensionMismatch,
          "backward: batch size mismatch with cache");
  require(output_grads.cols() == params.output_dim(), Status::DimensionMismatch,
          "backward: output gradient width mismatch");
  Gradients g;
  g.w2 = output_grads.transpose() * cache.act1;
  g.b2 = output_grads.colwise().sum().transpose();
  const Eigen::MatrixXd dh = (output_grads * params.w2).array() *
                             (1.0 - cache.act1.array().square());
  g.w1 = dh.transpose() * cache.input;
  g.b1 = dh.colwise().sum().transpose();
  return g;
}

double global_norm(const Gradients& grads) {
  return std::sqrt(grads.w1.squaredNorm() + grads.b1.squaredNorm() +
                   grads.w2.squaredNorm() + grads.b2.squaredNorm());
}

void clip_by_global_norm(Gradients& grads, double max_norm) {
  require(max_norm > 0.0, Status::InvalidInput,
          "clip_by_global_norm: max_norm must be positive");
  const double n = global_norm(grads);
  if (n > max_norm) {
    const double s = max_norm / n;
    grads.w1 *= s;
    grads.b1 *= s;
    grads.w2 *= s;
    grads.b2 *= s;
  }
}

AdamState AdamState::init(const MlpParams& params, const AdamConfig& config) {
  AdamState s;
  s.config = config;
  s.step = 0;
  s.m_w1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
  s.v_w1 = s.m_w1;
  s.m_w2 = Eigen::MatrixXd::Zero(params.w2.rows(), params.w2.cols());
  s.v_w2 = s.m_w2;
  s.m_b1 = Eigen::VectorXd::Zero(params.b1.size());
  s.v_b1 = s.m_b1;
  s.m_b2 = Eigen::VectorXd::Zero(params.b2.size());
  s.v_b2 = s.m_b2;
  return s;
}

namespace {

template <typename T>
void adam_update_block(T& param, const T& grad, T& m, T& v, double lr,
                       double beta1, double beta2, double eps, double wd,
                       double bc1, double bc2) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = (beta2 * v.array() + (1.0 - beta2) * grad.array().square()).matrix();
  param.array() -= lr * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + eps) +
                         wd * param.array());
}

}  // namespace

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state) {
  require(grads.w1.allFinite() && grads.b1.allFinite() && grads.w2.allFinite() &&
              grads.b2.allFinite(),
          Status::TrainingDivergence, "adam_step: non-finite gradients");
  require(grads.w1.rows() == params.w1.rows() && grads.w1.cols() == params.w1.cols() &&
              grads.b1.size() == params.b1.size() &&
              grads.w2.rows() == params.w2.rows() &&
              grads.w2.cols() == params.w2.cols() &&
              grads.b2.size() == params.b2.size(),
          Status::DimensionMismatch, "adam_step: gradient shapes disagree");
  state.step += 1;
  const AdamConfig& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  adam_update_block(params.w1, grads.w1, state.m_w1, state.v_w1, c.learning_rate,
                    c.beta1, c.beta2, c.epsilon, c.weight_decay, bc1, bc2);
  adam_update_block(params.b1, grads.b1, state.m_b1, state.v_b1, c.learning_rate,
                    c.beta1, c.beta2, c.epsilon, c.weight_decay, bc1, bc2);
  adam_update_block(params.w2, grads.w2, state.m_w2, state.v_w2, c.learning_rate,
                    c.beta1, c.beta2, c.epsilon, c.weight_decay, bc1, bc2);
  adam_update_block(params.b2, grads.b2, state.m_b2, state.v_b2, c.learning_rate,
                    c.beta1, c.beta2, c.epsilon, c.weight_decay, bc1, bc2);
  params.revision += 1;
  require(params.w1.allFinite() && params.b1.allFinite() &&
              params.w2.allFinite() && params.b2.allFinite(),
          Status::TrainingDivergence, "adam_step: parameters diverged");
}

namespace {

void write_block(std::ostream& os, const char* name, const double* data,
                 Eigen::Index count) {
  os << name << "\n";
  char buf[48];
  for (Eigen::Index i = 0; i < count; ++i) {
    std::snprintf(buf, sizeof(buf), "%a", data[i]);
    os << buf << (i + 1 == count ? "\n" : " ");
  }
}

void read_block(std::istream& is, const char* name, double* data,
                Eigen::Index count) {
  std::string tok;
  is >> tok;
  require(static_cast<bool>(is) && tok == name, Status::IoError,
          std::string("checkpoint: expected block ") + name);
  for (Eigen::Index i = 0; i < count; ++i) {
    is >> tok;
    require(static_cast<bool>(is), Status::IoError,
            "checkpoint: truncated block payload");
    char* end = nullptr;
    data[i] = std::strtod(tok.c_str(), &end);
    require(end != nullptr && *end == '\0', Status::IoError,
            "checkpoint: malformed number: " + tok);
  }
}

}  // namespace

void save_params_file(const MlpParams& params, const std::string& path) {
  params.validate();
  std::ofstream os(path);
  require(os.good(), Status::IoError, "cannot open for writing: " + path);
  os << "checal_model 1\n";
  os << "dims " << params.feature_dim() << " " << params.hidden_dim() << " "
     << params.center_count() << "\n";
  os << "revision " << params.revision << "\n";
  write_block(os, "w1", params.w1.data(), params.w1.size());
  write_block(os, "b1", params.b1.data(), params.b1.size());
  write_block(os, "w2", params.w2.data(), params.w2.size());
  write_block(os, "b2", params.b2.data(), params.b2.size());
  os.flush();
  require(os.good(), Status::IoError, "write failed: " + path);
}

MlpParams load_params_file(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Status::IoError, "cannot open for reading: " + path);
  std::string magic;
  int version = 0;
  is >> magic >> version;
  require(static_cast<bool>(is) && magic == "checal_model" && version == 1,
          Status::IoError, "checkpoint: bad header");
  std::string tok;
  int d = 0, h = 0, k = 0;
  is >> tok >> d >> h >> k;
  require(static_cast<bool>(is) && tok == "dims" && d >= 1 && h >= 1 && k >= 1,
          Status::IoError, "checkpoint: bad dims line");
  std::uint64_t revision = 0;
  is >> tok >> revision;
  require(static_cast<bool>(is) && tok == "revision", Status::IoError,
          "checkpoint: bad revision line");
  MlpParams p;
  p.w1.resize(h, d);
  p.b1.resize(h);
  p.w2.resize(5 * k, h);
  p.b2.resize(5 * k);
  read_block(is, "w1", p.w1.data(), p.w1.size());
  read_block(is, "b1", p.b1.data(), p.b1.size());
  read_block(is, "w2", p.w2.data(), p.w2.size());
  read_block(is, "b2", p.b2.data(), p.b2.size());
  p.revision = revision;
  p.validate();
  return p;
}

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const auto& r : rows) w = std::max(w, r.max_rel_err);
  return w;
}

namespace {

enum class GcBlock { Pose, Prior, Metric, Output, Total };

struct GcInstance {
  MlpParams student;
  MlpParams teacher;
  Eigen::MatrixXd x_new;
  Eigen::MatrixXd x_replay;
  MatX3 gt_new;
  MatX3 centers_raw;
  DistillWeights weights;
  ScaleBounds bounds;
  double clamp = 10.0;
};

DistillWeights block_weights(const DistillWeights& full, GcBlock block) {
  DistillWeights w = full;
  if (block == GcBlock::Prior) {
    w.beta_metric = 0.0;
    w.gamma = 0.0;
  } else if (block == GcBlock::Metric) {
    w.alpha = 0.0;
    w.gamma = 0.0;
  } else if (block == GcBlock::Output) {
    w.alpha = 0.0;
    w.beta_metric = 0.0;
  }
  return w;
}

MatX3 predict_batch(const std::vector<HeadOutput>& outs,
                    const ClusterCenters& centers, const ScaleBounds& bounds) {
  MatX3 pred(static_cast<Eigen::Index>(outs.size()), 3);
  for (std::size_t i = 0; i < outs.size(); ++i)
    pred.row(static_cast<Eigen::Index>(i)) =
        predict_coordinate(outs[i], centers, bounds).transpose();
  return pred;
}

double gc_loss(const GcInstance& inst, const MlpParams& p, GcBlock block) {
  const ClusterCenters centers(inst.centers_raw);
  if (block == GcBlock::Pose || block == GcBlock::Total) {
    const ForwardResult fr = forward(p, inst.x_new);
    const MatX3 pred = predict_batch(fr.outputs, centers, inst.bounds);
    const double lp = pose_loss(pred, inst.gt_new, inst.clamp);
    if (block == GcBlock::Pose) return lp;
    const ForwardResult fs = forward(p, inst.x_replay);
    const ForwardResult ft = forward(inst.teacher, inst.x_replay);
    const DistillLosses dl = spdd_loss(ft.outputs, fs.outputs, centers,
                                       inst.bounds, inst.weights);
    return lp + dl.total;
  }
  const ForwardResult fs = forward(p, inst.x_replay);
  const ForwardResult ft = forward(inst.teacher, inst.x_replay);
  const DistillLosses dl = spdd_loss(ft.outputs, fs.outputs, centers,
                                     inst.bounds, block_weights(inst.weights, block));
  return dl.total;
}

Gradients gc_analytic(const GcInstance& inst, GcBlock block) {
  const ClusterCenters centers(inst.centers_raw);
  Gradients total = Gradients::zero_like(inst.student);
  if (block == GcBlock::Pose || block == GcBlock::Total) {
    const ForwardResult fr = forward(inst.student, inst.x_new);
    const MatX3 pred = predict_batch(fr.outputs, centers, inst.bounds);
    const MatX3 up = pose_loss_backward(pred, inst.gt_new, inst.clamp);
    Eigen::MatrixXd out_grads(inst.x_new.rows(), inst.student.output_dim());
    for (Eigen::Index i = 0; i < inst.x_new.rows(); ++i) {
      const HeadGrads hg =
          head_backward(fr.outputs[static_cast<std::size_t>(i)], centers,
                        inst.bounds, up.row(i).transpose());
      out_grads.row(i) = pack_head_grads(hg);
    }
    total.accumulate(backward(inst.student, fr.cache, out_grads));
    if (block == GcBlock::Pose) return total;
  }
  const ForwardResult fs = forward(inst.student, inst.x_replay);
  const ForwardResult ft = forward(inst.teacher, inst.x_replay);
  const DistillWeights w = block == GcBlock::Total
                               ? inst.weights
                               : block_weights(inst.weights, block);
  const SpddBackwardResult sb =
      spdd_backward(ft.outputs, fs.outputs, centers, inst.bounds, w);
  Eigen::MatrixXd out_grads(inst.x_replay.rows(), inst.student.output_dim());
  for (Eigen::Index i = 0; i < inst.x_replay.rows(); ++i)
    out_grads.row(i) = pack_head_grads(sb.student_grads[static_cast<std::size_t>(i)]);
  total.accumulate(backward(inst.student, fs.cache, out_grads));
  return total;
}

// Distance from every L1/clamp kink in the instance; used to retry draws
// that central differences could straddle.
double gc_kink_margin(const GcInstance& inst) {
  const ClusterCenters centers(inst.centers_raw);
  double margin = std::numeric_limits<double>::infinity();
  const ForwardResult fr = forward(inst.student, inst.x_new);
  const MatX3 pred = predict_batch(fr.outputs, centers, inst.bounds);
  for (Eigen::Index i = 0; i < pred.rows(); ++i) {
    const Eigen::RowVector3d e = pred.row(i) - inst.gt_new.row(i);
    for (int c = 0; c < 3; ++c) margin = std::min(margin, std::abs(e(c)));
    margin = std::min(margin, std::abs(e.cwiseAbs().sum() - inst.clamp));
  }
  const ForwardResult fs = forward(inst.student, inst.x_replay);
  const ForwardResult ft = forward(inst.teacher, inst.x_replay);
  for (std::size_t i = 0; i < fs.outputs.size(); ++i) {
    const ActiveSet active = select_active_set(
        softmax_with_temperature(ft.outputs[i].logits, inst.weights.tau),
        inst.weights.active_size);
    const MatX3 dt = effective_offsets(ft.outputs[i], inst.bounds, active.indices);
    const MatX3 ds = effective_offsets(fs.outputs[i], inst.bounds, active.indices);
    margin = std::min(margin, (ds - dt).cwiseAbs().minCoeff());
    const Vec3 xs = predict_coordinate(fs.outputs[i], centers, inst.bounds);
    const Vec3 xt = predict_coordinate(ft.outputs[i], centers, inst.bounds);
    margin = std::min(margin, (xs - xt).cwiseAbs().minCoeff());
  }
  return margin;
}

GcInstance gc_make_instance(const GradcheckConfig& cfg, std::uint64_t seed) {
  require(cfg.k >= 1 && cfg.k <= 16, Status::InvalidInput,
          "gradcheck: K must be in [1, 16]");
  require(cfg.hidden >= 1 && cfg.feature_dim >= 1 && cfg.new_batch >= 1 &&
              cfg.replay_batch >= 1,
          Status::InvalidInput, "gradcheck: dims must be >= 1");
  const Rng root(seed);
  for (std::uint64_t attempt = 0; attempt < 32; ++attempt) {
    GcInstance inst;
    Rng r = root.child("gradcheck", attempt);
    Rng r_student = r.child("student");
    Rng r_teacher = r.child("teacher");
    inst.student = init_params(cfg.feature_dim, cfg.hidden, cfg.k, r_student);
    inst.teacher = init_params(cfg.feature_dim, cfg.hidden, cfg.k, r_teacher);
    inst.x_new.resize(cfg.new_batch, cfg.feature_dim);
    for (Eigen::Index i = 0; i < inst.x_new.rows(); ++i)
      for (Eigen::Index j = 0; j < inst.x_new.cols(); ++j)
        inst.x_new(i, j) = r.normal();
    inst.x_replay.resize(cfg.replay_batch, cfg.feature_dim);
    for (Eigen::Index i = 0; i < inst.x_replay.rows(); ++i)
      for (Eigen::Index j = 0; j < inst.x_replay.cols(); ++j)
        inst.x_replay(i, j) = r.normal();
    inst.centers_raw.resize(cfg.k, 3);
    for (int i = 0; i < cfg.k; ++i)
      for (int c = 0; c < 3; ++c) inst.centers_raw(i, c) = r.uniform(0.0, 2.0);
    inst.gt_new.resize(cfg.new_batch, 3);
    for (Eigen::Index i = 0; i < inst.gt_new.rows(); ++i)
      for (int c = 0; c < 3; ++c) inst.gt_new(i, c) = r.uniform(-1.0, 2.0);
    inst.weights.active_size = std::max(1, cfg.k / 2);
    if (cfg.zero_mode) {
      inst.student.w1.setZero();
      inst.student.b1.setZero();
      inst.student.w2.setZero();
      inst.student.b2.setZero();
      inst.teacher = inst.student;
      const ForwardResult fr = forward(inst.student, inst.x_new);
      inst.gt_new =
          predict_batch(fr.outputs, ClusterCenters(inst.centers_raw), inst.bounds);
      return inst;
    }
    // Offsets from a fresh init are only ~1e-1; nudge the student away from
    // the teacher so metric/output differences clear the kink margin.
    inst.student.b2.segment(cfg.k, 3 * cfg.k).array() += 0.35;
    for (int i = 0; i < cfg.k; ++i) inst.student.b2(i) = 0.5 * r.normal();
    if (gc_kink_margin(inst) > 25.0 * cfg.fd_epsilon) return inst;
  }
  fail(Status::ContractViolation,
       "gradcheck: could not draw a kink-safe instance");
}

double rel_err(double a, double n) {
  const double scale = std::max({std::abs(a), std::abs(n), 1e-6});
  return std::abs(a - n) / scale;
}

double block_max_rel_err(const GcInstance& inst, GcBlock block, double eps,
                         bool corrupt) {
  Gradients analytic = gc_analytic(inst, block);
  if (corrupt) analytic.w2(0, 0) += 1e-3;

  GcInstance work = inst;
  double worst = 0.0;
  struct BlockRef {
    double* data;
    Eigen::Index count;
    const double* grad;
  };
  const BlockRef blocks[4] = {
      {work.student.w1.data(), work.student.w1.size(), analytic.w1.data()},
      {work.student.b1.data(), work.student.b1.size(), analytic.b1.data()},
      {work.student.w2.data(), work.student.w2.size(), analytic.w2.data()},
      {work.student.b2.data(), work.student.b2.size(), analytic.b2.data()},
  };
  for (const auto& b : blocks) {
    for (Eigen::Index i = 0; i < b.count; ++i) {
      const double saved = b.data[i];
      b.data[i] = saved + eps;
      const double up = gc_loss(inst, work.student, block);
      b.data[i] = saved - eps;
      const double down = gc_loss(inst, work.student, block);
      b.data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = b.grad[i];
      // Central differences have an absolute resolution floor: cancellation
      // noise away from kinks, and O(eps)-order artifacts when the loss sits
      // exactly at the bottom of an L1 valley (the all-zero instance). Below
      // that floor the comparison carries no signal in relative terms, so
      // such entries are skipped. A corrupted gradient (1e-3 = 2x the floor
      // at the default eps) can never have both sides under the floor and is
      // still caught.
      const double atol = 50.0 * eps;
      if (std::abs(a) < atol && std::abs(numeric) < atol) continue;
      worst = std::max(worst, rel_err(a, numeric));
    }
  }
  return worst;
}

}  // namespace

GradcheckReport gradcheck(const GradcheckConfig& config, std::uint64_t seed) {
  const GcInstance inst = gc_make_instance(config, seed);
  GradcheckReport report;
  const struct {
    GcBlock block;
    const char* name;
  } blocks[5] = {{GcBlock::Pose, "pose"},
                 {GcBlock::Prior, "prior"},
                 {GcBlock::Metric, "metric"},
                 {GcBlock::Output, "output"},
                 {GcBlock::Total, "total"}};
  for (const auto& b : blocks) {
    GradcheckRow row;
    row.block = b.name;
    row.max_rel_err =
        block_max_rel_err(inst, b.block, config.fd_epsilon, config.corrupt);
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace checal
