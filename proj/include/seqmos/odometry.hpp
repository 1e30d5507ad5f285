// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_ODOMETRY_HPP
#define SEQMOS_ODOMETRY_HPP

#include <cmath>
#include <deque>
#include <vector>

#include <Eigen/Dense>

#include "seqmos/geometry.hpp"
#include "seqmos/spatial_hash.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

struct IcpParams {
  int iterations = 30;
  double max_correspondence = 1.0;
  std::size_t subsample = 2;
  /// Points below this sensor-frame height (ground) are not matched.
  double min_height = -1.5;
  /// Registered scans kept in the local target map.
  std::size_t map_frames = 5;
  /// Estimate x, y and yaw only. With the ground excluded nothing else pins
  /// down height, pitch and roll, so full 6-DoF matching drifts upward.
  bool planar = true;
  /// Fraction of the previous yaw step carried into the next initial guess.
  double yaw_prior = 0.5;
  double convergence = 1e-6;
};

/// Least-squares rigid transform mapping src onto dst (Kabsch / Umeyama without scale).
inline PoseSE3 kabsch(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.size() < 3) fail(ErrorKind::InvalidArgument, "kabsch needs >= 3 pairs");
  Eigen::Vector3d ms = Eigen::Vector3d::Zero(), md = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms += src[i];
    md += dst[i];
  }
  ms /= static_cast<double>(src.size());
  md /= static_cast<double>(dst.size());
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - ms) * (dst[i] - md).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
  Eigen::Matrix3d r = nearestRotation(svd.matrixV() * d * svd.matrixU().transpose());
  return PoseSE3(r, md - r * ms);
}

/// Least-squares rotation about z plus xy translation mapping src onto dst.
inline PoseSE3 kabschPlanar(const std::vector<Eigen::Vector3d>& src, const std::vector<Eigen::Vector3d>& dst) {
  if (src.size() != dst.size() || src.size() < 2) fail(ErrorKind::InvalidArgument, "planar kabsch needs >= 2 pairs");
  Eigen::Vector2d ms = Eigen::Vector2d::Zero(), md = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms += src[i].head<2>();
    md += dst[i].head<2>();
  }
  ms /= static_cast<double>(src.size());
  md /= static_cast<double>(dst.size());
  double dot = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Eigen::Vector2d a = src[i].head<2>() - ms, b = dst[i].head<2>() - md;
    dot += a.dot(b);
    cross += a.x() * b.y() - a.y() * b.x();
  }
  const double yaw = std::atan2(cross, dot);
  const Eigen::Vector2d t = md - Eigen::Rotation2Dd(yaw) * ms;
  return PoseSE3::fromYaw(yaw, Eigen::Vector3d(t.x(), t.y(), 0.0));
}

namespace detail {
inline std::vector<Eigen::Vector3d> icpPoints(const RawScan& scan, const MotionLabels* mask, std::size_t stride,
                                              double min_height) {
  std::vector<Eigen::Vector3d> out;
  for (std::size_t i = 0; i < scan.size(); i += stride) {
    if (mask && (*mask)[i] == MotionLabel::Moving) continue;
    const Point& p = scan.points[i];
    if (p.z < min_height) continue;
    out.emplace_back(p.x, p.y, p.z);
  }
  return out;
}
}  // namespace detail

/// Point-to-point ICP estimating T such that target ~ T * source.
inline PoseSE3 icp(const std::vector<Eigen::Vector3d>& source, const SpatialHash& target, PoseSE3 init,
                   const IcpParams& p) {
  PoseSE3 t = init;
  std::vector<Eigen::Vector3d> src, dst;
  for (int it = 0; it < p.iterations; ++it) {
    src.clear();
    dst.clear();
    for (const auto& s : source) {
      const Eigen::Vector3d q = t.apply(s);
      const long j = target.nearest(q, p.max_correspondence);
      if (j < 0) continue;
      src.push_back(q);
      dst.push_back(target.point(static_cast<std::size_t>(j)));
    }
    if (src.size() < 3) break;
    const PoseSE3 delta = p.planar ? kabschPlanar(src, dst) : kabsch(src, dst);
    t = delta * t;
    if ((delta.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < p.convergence) break;
  }
  return t;
}

/**
 * @brief Scan-to-local-map matching with a constant-velocity prior. The
 * target is the union of the last `p.map_frames` registered scans, which
 * hides the ring pattern that makes pure frame-to-frame matching stick to
 * zero motion.
 *
 * @param masks per-frame labels; Moving points are dropped when given
 * @return world poses starting at `start`
 */
inline std::vector<PoseSE3> runOdometry(const std::vector<RawScan>& scans, const std::vector<MotionLabels>& masks,
                                        const PoseSE3& start, const IcpParams& p) {
  if (!masks.empty() && masks.size() != scans.size()) fail(ErrorKind::LengthMismatch, "one mask per scan");
  if (p.subsample < 1 || p.iterations < 1 || !(p.max_correspondence > 0.0) || p.map_frames < 1 ||
      !(p.yaw_prior >= 0.0 && p.yaw_prior <= 1.0))
    fail(ErrorKind::ConfigError, "odometry parameters");
  std::vector<PoseSE3> poses;
  if (scans.empty()) return poses;
  poses.push_back(start);
  PoseSE3 velocity;
  auto pts = [&](std::size_t f, std::size_t stride) {
    return detail::icpPoints(scans[f], masks.empty() ? nullptr : &masks[f], stride, p.min_height);
  };
  std::deque<std::vector<Eigen::Vector3d>> window;
  auto admit = [&](std::size_t f) {
    std::vector<Eigen::Vector3d> w = pts(f, 1);
    for (auto& q : w) q = poses[f].apply(q);
    window.push_back(std::move(w));
    if (window.size() > p.map_frames) window.pop_front();
  };
  admit(0);
  for (std::size_t f = 1; f < scans.size(); ++f) {
    std::vector<Eigen::Vector3d> local;
    for (const auto& w : window) local.insert(local.end(), w.begin(), w.end());
    const SpatialHash target(p.max_correspondence, std::move(local));
    const PoseSE3 pose = icp(pts(f, p.subsample), target, poses.back() * velocity, p);
    // Carrying the full yaw step feeds rotation noise back into the next guess
    // and the track runs away where walls dominate. Dropping it stalls ICP in
    // tight corners.
    const PoseSE3 step = poses.back().inverse() * pose;
    const double yaw = std::atan2(step.rotation()(1, 0), step.rotation()(0, 0));
    velocity = PoseSE3::fromYaw(p.yaw_prior * yaw, step.translation());
    poses.push_back(pose);
    admit(f);
  }
  return poses;
}

}  // namespace seqmos

#endif  // SEQMOS_ODOMETRY_HPP
