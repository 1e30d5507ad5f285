// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_LOSS_HPP
#define SEQMOS_LOSS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "seqmos/cylvoxel.hpp"
#include "seqmos/error.hpp"
#include "seqmos/tensor.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

/// Class index per element, kIgnoreTarget for excluded elements.
using Targets = std::vector<int>;
inline constexpr int kIgnoreTarget = -1;

inline Targets targetsFromLabels(const MotionLabels& labels) {
  Targets t;
  t.reserve(labels.size());
  for (MotionLabel m : labels)
    t.push_back(m == MotionLabel::Static ? 0 : m == MotionLabel::Moving ? 1 : kIgnoreTarget);
  return t;
}

template <typename T>
struct LossValue {
  double value = 0.0;
  RowMatrix<T> grad;  // same shape as the loss input
};

template <typename T>
RowMatrix<T> softmaxRows(const RowMatrix<T>& logits) {
  RowMatrix<T> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/**
 * @brief Mean over non-ignored elements of w[target] * -log softmax(logits)[target].
 *
 * @param logits M x K
 * @return loss and its gradient w.r.t. logits
 */
template <typename T>
LossValue<T> weightedCrossEntropy(const RowMatrix<T>& logits, const Targets& targets,
                                  const std::vector<double>& class_weights) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    fail(ErrorKind::ShapeMismatch, "cross entropy: logits/targets length");
  if (class_weights.size() != static_cast<std::size_t>(logits.cols()))
    fail(ErrorKind::ShapeMismatch, "cross entropy: one weight per class");
  LossValue<T> out;
  out.grad = RowMatrix<T>::Zero(logits.rows(), logits.cols());
  std::size_t count = 0;
  for (int t : targets)
    if (t != kIgnoreTarget) ++count;
  if (count == 0) fail(ErrorKind::EmptyBatch, "cross entropy: every element is ignored");
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t == kIgnoreTarget) continue;
    if (t < 0 || t >= logits.cols()) fail(ErrorKind::IndexOutOfRange, "cross entropy: target class");
    const double m = static_cast<double>(logits.row(i).maxCoeff());
    double z = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) z += std::exp(static_cast<double>(logits(i, k)) - m);
    const double log_z = m + std::log(z);
    const double w = class_weights[static_cast<std::size_t>(t)];
    sum += w * (log_z - static_cast<double>(logits(i, t)));
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
      const double p = std::exp(static_cast<double>(logits(i, k)) - log_z);
      out.grad(i, k) = static_cast<T>(w * inv * (p - (k == t ? 1.0 : 0.0)));
    }
  }
  out.value = sum * inv;
  return out;
}

/// Gradient of the Lovasz extension of the Jaccard loss w.r.t. sorted errors.
inline std::vector<double> lovaszGrad(const std::vector<int>& fg_sorted) {
  const std::size_t n = fg_sorted.size();
  std::vector<double> g(n);
  const double gts = std::accumulate(fg_sorted.begin(), fg_sorted.end(), 0.0);
  double cum_fg = 0.0;
  double cum_bg = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cum_fg += fg_sorted[i];
    cum_bg += 1 - fg_sorted[i];
    const double jac = 1.0 - (gts - cum_fg) / (gts + cum_bg);
    g[i] = jac - prev;
    prev = jac;
  }
  return g;
}

/**
 * @brief Lovasz-softmax loss over classes present in the targets.
 *
 * For every present class c the errors |fg_c - p_c| are sorted descending and
 * weighted by the Jaccard-extension gradient; the class losses are averaged.
 * Elements with kIgnoreTarget are skipped.
 *
 * @param probs M x K rows summing to one
 * @return loss and gradient w.r.t. probs
 */
template <typename T>
LossValue<T> lovaszSoftmax(const RowMatrix<T>& probs, const Targets& targets) {
  if (static_cast<std::size_t>(probs.rows()) != targets.size())
    fail(ErrorKind::ShapeMismatch, "lovasz: probs/targets length");
  LossValue<T> out;
  out.grad = RowMatrix<T>::Zero(probs.rows(), probs.cols());
  std::vector<Eigen::Index> valid;
  for (Eigen::Index i = 0; i < probs.rows(); ++i)
    if (targets[static_cast<std::size_t>(i)] != kIgnoreTarget) valid.push_back(i);
  if (valid.empty()) fail(ErrorKind::EmptyBatch, "lovasz: every element is ignored");

  std::vector<int> present;
  for (int c = 0; c < probs.cols(); ++c)
    for (Eigen::Index i : valid)
      if (targets[static_cast<std::size_t>(i)] == c) {
        present.push_back(c);
        break;
      }

  const std::size_t n = valid.size();
  std::vector<double> err(n);
  std::vector<int> fg(n);
  std::vector<std::size_t> order(n);
  double total = 0.0;
  for (int c : present) {
    for (std::size_t j = 0; j < n; ++j) {
      fg[j] = targets[static_cast<std::size_t>(valid[j])] == c ? 1 : 0;
      err[j] = std::abs(fg[j] - static_cast<double>(probs(valid[j], c)));
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return err[a] > err[b]; });
    std::vector<int> fg_sorted(n);
    for (std::size_t j = 0; j < n; ++j) fg_sorted[j] = fg[order[j]];
    const std::vector<double> g = lovaszGrad(fg_sorted);
    const double scale = 1.0 / static_cast<double>(present.size());
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t e = order[j];
      total += err[e] * g[j];
      // d err / d p = -1 for foreground, +1 for background
      out.grad(valid[e], c) += static_cast<T>(scale * g[j] * (fg[e] ? -1.0 : 1.0));
    }
  }
  out.value = total / static_cast<double>(present.size());
  return out;
}

/// Chain rule through a row softmax: dL/dz_j = p_j (g_j - sum_c g_c p_c).
template <typename T>
RowMatrix<T> softmaxBackward(const RowMatrix<T>& probs, const RowMatrix<T>& grad_probs) {
  RowMatrix<T> dz(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const T dot = probs.row(i).dot(grad_probs.row(i));
    dz.row(i) = probs.row(i).array() * (grad_probs.row(i).array() - dot);
  }
  return dz;
}

struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<double> class_weights{1.0, 1.0};

  void validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0)) fail(ErrorKind::ConfigError, "loss weights must be >= 0");
    for (double w : class_weights)
      if (!(w > 0.0)) fail(ErrorKind::ConfigError, "class weights must be > 0");
  }
};

/**
 * @brief Inverse class frequency, clamped to [lo, hi].
 *
 * Classes that never occur receive hi.
 */
inline std::vector<double> inverseFrequencyWeights(const std::vector<std::size_t>& counts,
                                                   double lo = 0.1, double hi = 10.0) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  std::vector<double> w;
  for (std::size_t c : counts)
    w.push_back(c == 0 ? hi : std::clamp(total / static_cast<double>(c), lo, hi));
  return w;
}

/// Majority motion label of each voxel's points; Ignore on ties and for voxels
/// without Static or Moving points.
inline Targets voxelTargets(const PointVoxelMapping& m, const MotionLabels& labels) {
  if (labels.size() != m.size()) fail(ErrorKind::ShapeMismatch, "voxel targets: labels/points");
  std::vector<int> stat(static_cast<std::size_t>(m.dims.volume()), 0);
  std::vector<int> mov(stat.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.flat[i] < 0) continue;
    if (labels[i] == MotionLabel::Static) ++stat[static_cast<std::size_t>(m.flat[i])];
    if (labels[i] == MotionLabel::Moving) ++mov[static_cast<std::size_t>(m.flat[i])];
  }
  Targets t(stat.size(), kIgnoreTarget);
  for (std::size_t v = 0; v < t.size(); ++v) {
    if (stat[v] > mov[v]) t[v] = 0;
    else if (mov[v] > stat[v]) t[v] = 1;
  }
  return t;
}

template <typename T>
struct TotalLoss {
  double total = 0.0;
  double voxel = 0.0;
  double point = 0.0;
  double voxel_ce = 0.0;
  double voxel_lovasz = 0.0;
  Tensor4<T> d_voxel_logits;
  RowMatrix<T> d_point_logits;
};

/**
 * @brief alpha * L_point + beta * L_voxel.
 *
 * L_voxel = weighted CE + Lovasz-softmax on voxel logits, L_point = weighted
 * CE on point logits. Both share cfg.class_weights.
 */
template <typename T>
TotalLoss<T> totalLoss(const Tensor4<T>& voxel_logits, const Targets& voxel_targets,
                       const RowMatrix<T>& point_logits, const Targets& point_targets,
                       const LossConfig& cfg) {
  if (static_cast<std::size_t>(voxel_logits.voxels()) != voxel_targets.size())
    fail(ErrorKind::ShapeMismatch, "total loss: voxel targets");
  TotalLoss<T> out;
  const RowMatrix<T> vl = voxel_logits.mat().transpose();
  const LossValue<T> ce_v = weightedCrossEntropy(vl, voxel_targets, cfg.class_weights);
  const RowMatrix<T> probs = softmaxRows(vl);
  const LossValue<T> lz = lovaszSoftmax(probs, voxel_targets);
  const LossValue<T> ce_p = weightedCrossEntropy(point_logits, point_targets, cfg.class_weights);
  out.voxel_ce = ce_v.value;
  out.voxel_lovasz = lz.value;
  out.voxel = ce_v.value + lz.value;
  out.point = ce_p.value;
  out.total = cfg.alpha * out.point + cfg.beta * out.voxel;

  const RowMatrix<T> d_vl = (ce_v.grad + softmaxBackward(probs, lz.grad)) * static_cast<T>(cfg.beta);
  out.d_voxel_logits = Tensor4<T>(voxel_logits.channels(), voxel_logits.dims());
  out.d_voxel_logits.mat() = d_vl.transpose();
  out.d_point_logits = ce_p.grad * static_cast<T>(cfg.alpha);
  return out;
}

}  // namespace seqmos

#endif  // SEQMOS_LOSS_HPP
