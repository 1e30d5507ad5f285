// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_EVAL_HPP
#define SEQMOS_EVAL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/geometry.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

inline constexpr int kMotionClasses = 2;

/// Per-class TP/FP/FN over Static (0) and Moving (1).
struct ConfusionCounts {
  std::array<std::uint64_t, kMotionClasses> tp{};
  std::array<std::uint64_t, kMotionClasses> fp{};
  std::array<std::uint64_t, kMotionClasses> fn{};

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    for (int c = 0; c < kMotionClasses; ++c) {
      tp[c] += o.tp[c];
      fp[c] += o.fp[c];
      fn[c] += o.fn[c];
    }
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Points whose truth is Ignore are skipped. A prediction of Ignore on a
/// labeled point counts as a miss for the true class only.
inline ConfusionCounts confusion(const MotionLabels& pred, const MotionLabels& truth) {
  if (pred.size() != truth.size())
    fail(ErrorKind::LengthMismatch, "confusion: " + std::to_string(pred.size()) + " predictions vs " +
                                        std::to_string(truth.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == MotionLabel::Ignore) continue;
    const int t = truth[i] == MotionLabel::Moving ? 1 : 0;
    if (pred[i] == truth[i]) {
      ++c.tp[t];
      continue;
    }
    ++c.fn[t];
    if (pred[i] != MotionLabel::Ignore) ++c.fp[pred[i] == MotionLabel::Moving ? 1 : 0];
  }
  return c;
}

/// TP / (TP + FP + FN); a class that never occurs in either truth or
/// prediction scores 1.
inline double iou(const ConfusionCounts& c, int cls) {
  if (cls < 0 || cls >= kMotionClasses) fail(ErrorKind::IndexOutOfRange, "iou: class index");
  const std::uint64_t denom = c.tp[cls] + c.fp[cls] + c.fn[cls];
  if (denom == 0) return 1.0;
  return static_cast<double>(c.tp[cls]) / static_cast<double>(denom);
}

inline double movingIou(const ConfusionCounts& c) { return iou(c, 1); }

/// Mean IoU over classes with a nonzero denominator (1 if there are none).
inline double miou(const ConfusionCounts& c) {
  double sum = 0.0;
  int n = 0;
  for (int cls = 0; cls < kMotionClasses; ++cls) {
    if (c.tp[cls] + c.fp[cls] + c.fn[cls] == 0) continue;
    sum += iou(c, cls);
    ++n;
  }
  return n == 0 ? 1.0 : sum / n;
}

/// Percent with one decimal, the way segmentation tables print IoU ("74.9").
inline std::string formatPercent(double fraction) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << 100.0 * fraction;
  return ss.str();
}

struct TrajectoryPair {
  std::vector<PoseSE3> ground_truth;
  std::vector<PoseSE3> predicted;
};

namespace detail {
inline void checkTrajectories(const TrajectoryPair& tp, std::size_t min_len) {
  if (tp.ground_truth.size() != tp.predicted.size())
    fail(ErrorKind::LengthMismatch, "trajectory lengths differ: " + std::to_string(tp.ground_truth.size()) +
                                        " vs " + std::to_string(tp.predicted.size()));
  if (tp.ground_truth.size() < min_len)
    fail(ErrorKind::DegenerateTrajectory, "trajectory needs at least " + std::to_string(min_len) + " poses");
}

inline Eigen::Vector3d localError(const PoseSE3& q, const PoseSE3& p) {
  return (q.inverse() * p).translation();
}
}  // namespace detail

/// RMS of trans(Q_i^-1 P_i), no alignment.
inline double ate(const TrajectoryPair& tp) {
  detail::checkTrajectories(tp, 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < tp.ground_truth.size(); ++i)
    sum += detail::localError(tp.ground_truth[i], tp.predicted[i]).squaredNorm();
  return std::sqrt(sum / static_cast<double>(tp.ground_truth.size()));
}

struct Drift {
  double de = 0.0;          // meters at the final frame
  double dr_percent = 0.0;  // 100 * de / ground-truth path length
  double path_length = 0.0;
};

inline Drift drift(const TrajectoryPair& tp) {
  detail::checkTrajectories(tp, 2);
  Drift d;
  for (std::size_t i = 1; i < tp.ground_truth.size(); ++i)
    d.path_length += (tp.ground_truth[i].translation() - tp.ground_truth[i - 1].translation()).norm();
  if (!(d.path_length > 0.0)) fail(ErrorKind::DegenerateTrajectory, "ground-truth path length is zero");
  d.de = detail::localError(tp.ground_truth.back(), tp.predicted.back()).norm();
  d.dr_percent = 100.0 * d.de / d.path_length;
  return d;
}

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

using PRCurve = std::vector<PRPoint>;

inline double f1Score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

/**
 * @brief Precision and recall of `score >= threshold` for every distinct score,
 * thresholds ascending. Precision is 1 when nothing is predicted positive.
 */
inline PRCurve prCurve(const std::vector<double>& scores, const std::vector<bool>& truth) {
  if (scores.size() != truth.size()) fail(ErrorKind::LengthMismatch, "pr curve: scores vs truth");
  const std::size_t positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  if (positives == 0) fail(ErrorKind::NoPositives, "pr curve needs at least one true pair");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Sweep from the highest score down, emitting one point per distinct value.
  PRCurve desc;
  std::size_t tp = 0;
  std::size_t predicted = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    ++predicted;
    if (truth[order[i]]) ++tp;
    if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
    PRPoint pt;
    pt.threshold = scores[order[i]];
    pt.precision = static_cast<double>(tp) / static_cast<double>(predicted);
    pt.recall = static_cast<double>(tp) / static_cast<double>(positives);
    pt.f1 = f1Score(pt.precision, pt.recall);
    desc.push_back(pt);
  }
  return PRCurve(desc.rbegin(), desc.rend());
}

inline double f1Max(const PRCurve& curve) {
  if (curve.empty()) fail(ErrorKind::NoPositives, "empty pr curve");
  double best = 0.0;
  for (const PRPoint& p : curve) best = std::max(best, p.f1);
  return best;
}

inline void writePrCsv(std::ostream& out, const PRCurve& curve) {
  out << "threshold,precision,recall,f1\n" << std::setprecision(17);
  for (const PRPoint& p : curve) out << p.threshold << ',' << p.precision << ',' << p.recall << ',' << p.f1 << '\n';
}

/// Two whitespace-separated columns (recall precision) for plotting tools.
inline void writePrPlot(std::ostream& out, const PRCurve& curve) {
  out << "# recall precision\n" << std::setprecision(17);
  for (const PRPoint& p : curve) out << p.recall << ' ' << p.precision << '\n';
}

}  // namespace seqmos

#endif  // SEQMOS_EVAL_HPP
