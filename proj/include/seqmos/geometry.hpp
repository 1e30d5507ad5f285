// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_GEOMETRY_HPP
#define SEQMOS_GEOMETRY_HPP

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

/**
 * @brief Rigid transform in homogeneous 4x4 form.
 *
 * The bottom row is exactly (0,0,0,1) and the rotation block is orthonormal
 * with determinant +1 (tolerance 1e-9). Double precision throughout.
 */
class PoseSE3 {
 public:
  static constexpr double kTolerance = 1e-9;

  PoseSE3() : m_(Eigen::Matrix4d::Identity()) {}

  /// Validates the matrix; throws NonFiniteValue / InvalidArgument.
  explicit PoseSE3(const Eigen::Matrix4d& m) : m_(m) { validate(); }

  PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : m_(Eigen::Matrix4d::Identity()) {
    m_.topLeftCorner<3, 3>() = rotation;
    m_.topRightCorner<3, 1>() = translation;
    validate();
  }

  static PoseSE3 identity() { return PoseSE3(); }

  static PoseSE3 fromTranslation(double x, double y, double z) {
    return PoseSE3(Eigen::Matrix3d::Identity(), Eigen::Vector3d(x, y, z));
  }

  static PoseSE3 fromYaw(double yaw, const Eigen::Vector3d& t = Eigen::Vector3d::Zero()) {
    return PoseSE3(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix(), t);
  }

  const Eigen::Matrix4d& matrix() const noexcept { return m_; }
  Eigen::Matrix3d rotation() const { return m_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return m_.topRightCorner<3, 1>(); }

  PoseSE3 operator*(const PoseSE3& rhs) const {
    PoseSE3 out;
    out.m_ = m_ * rhs.m_;
    out.m_.row(3) << 0.0, 0.0, 0.0, 1.0;
    return out;
  }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return m_.topLeftCorner<3, 3>() * p + m_.topRightCorner<3, 1>();
  }

  /// Closed-form inverse (R^T, -R^T t).
  PoseSE3 inverse() const {
    PoseSE3 out;
    const Eigen::Matrix3d rt = rotation().transpose();
    out.m_.topLeftCorner<3, 3>() = rt;
    out.m_.topRightCorner<3, 1>() = -rt * translation();
    return out;
  }

  /// Max-abs orthonormality defect of the rotation block, max|R^T R - I|.
  static double orthonormalityDefect(const Eigen::Matrix3d& r) {
    return (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  }

 private:
  void validate() const {
    if (!m_.allFinite()) fail(ErrorKind::NonFiniteValue, "pose has non-finite entries");
    if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0)
      fail(ErrorKind::InvalidArgument, "pose bottom row must be (0,0,0,1)");
    const Eigen::Matrix3d r = m_.topLeftCorner<3, 3>();
    if (orthonormalityDefect(r) > kTolerance || std::abs(r.determinant() - 1.0) > kTolerance)
      fail(ErrorKind::InvalidArgument, "pose rotation block is not a proper rotation");
  }

  Eigen::Matrix4d m_;
};

/// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
inline Eigen::Matrix3d nearestRotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

/**
 * @brief Transform taking frame-m coordinates into frame-n coordinates.
 *
 * chain[i] holds the relative transform T_{i+1}^{i} (frame i+1 into frame i),
 * so a chain of length c spans frames 0..c. The result is
 * chain[n] * chain[n+1] * ... * chain[m-1]; m == n yields identity.
 */
inline PoseSE3 composeRelative(std::span<const PoseSE3> chain, std::size_t m, std::size_t n) {
  if (n > m || m > chain.size())
    fail(ErrorKind::IndexOutOfRange,
         "compose_relative needs n <= m <= len(chain), got m=" + std::to_string(m) +
             " n=" + std::to_string(n) + " len=" + std::to_string(chain.size()));
  PoseSE3 out;
  for (std::size_t k = n; k < m; ++k) out = out * chain[k];
  return out;
}

inline RawScan transformScan(const RawScan& scan, const PoseSE3& t) {
  RawScan out;
  out.frame_index = scan.frame_index;
  out.points.reserve(scan.points.size());
  const Eigen::Matrix3d r = t.rotation();
  const Eigen::Vector3d tr = t.translation();
  for (const Point& p : scan.points) {
    const Eigen::Vector3d q = r * Eigen::Vector3d(p.x, p.y, p.z) + tr;
    out.points.push_back({q.x(), q.y(), q.z(), p.intensity});
  }
  return out;
}

inline PoseSE3 invertPose(const PoseSE3& t) { return t.inverse(); }

/// Relative chain T_k^{k-1} = W_{k-1}^{-1} W_k from world poses; entry 0 is identity.
inline std::vector<PoseSE3> relativeFromWorld(std::span<const PoseSE3> world) {
  std::vector<PoseSE3> rel;
  rel.reserve(world.size());
  for (std::size_t k = 0; k < world.size(); ++k)
    rel.push_back(k == 0 ? PoseSE3() : world[k - 1].inverse() * world[k]);
  return rel;
}

}  // namespace seqmos

#endif  // SEQMOS_GEOMETRY_HPP
