// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_RESIDUAL_HPP
#define SEQMOS_RESIDUAL_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/geometry.hpp"
#include "seqmos/spatial_hash.hpp"
#include "seqmos/tensor.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

/// Current scan plus the k previous scans re-expressed in the current frame.
struct ResidualStack {
  struct Previous {
    std::size_t offset = 0;  // frames back, 1..k
    RawScan scan;
  };

  RawScan current;
  std::vector<Previous> previous;

  std::size_t k() const noexcept { return previous.size(); }
};

/**
 * @brief Builds the residual stack for frame t.
 *
 * rel_poses[j] is T_j^{j-1} (frame j into frame j-1), aligned with scans;
 * rel_poses[0] is ignored.
 */
inline ResidualStack buildResidualStack(std::span<const RawScan> scans,
                                        std::span<const PoseSE3> rel_poses, std::size_t t,
                                        std::size_t k) {
  if (t < k || t >= scans.size())
    fail(ErrorKind::IndexOutOfRange, "residual stack needs k <= t < len(scans), got t=" +
                                         std::to_string(t) + " k=" + std::to_string(k));
  if (rel_poses.size() != scans.size())
    fail(ErrorKind::LengthMismatch, "scans and relative poses differ in length");
  ResidualStack stack;
  stack.current = scans[t];
  const auto chain = rel_poses.subspan(1);
  for (std::size_t i = 1; i <= k; ++i) {
    // composeRelative gives frame t into frame t-i; we need the reverse.
    const PoseSE3 to_current = composeRelative(chain, t, t - i).inverse();
    stack.previous.push_back({i, transformScan(scans[t - i], to_current)});
  }
  return stack;
}

struct SpatialDiffParams {
  double neighbor_radius = 0.5;
  double distance_threshold = 0.5;

  void validate() const {
    if (!(neighbor_radius > 0.0 && std::isfinite(neighbor_radius)))
      fail(ErrorKind::InvalidArgument, "neighbor_radius must be positive and finite");
    if (!(distance_threshold > 0.0))
      fail(ErrorKind::InvalidArgument, "distance_threshold must be positive");
  }
};

/**
 * @brief Non-learned baseline: a current point is Moving iff no point of any
 * compensated previous scan lies within distance_threshold of it.
 */
inline MotionLabels spatialDiffBaseline(const ResidualStack& stack, const SpatialDiffParams& params) {
  params.validate();
  if (stack.previous.empty()) fail(ErrorKind::EmptyStack, "baseline needs k >= 1");
  std::vector<SpatialHash> hashes;
  hashes.reserve(stack.previous.size());
  for (const auto& prev : stack.previous) {
    std::vector<Eigen::Vector3d> pts;
    pts.reserve(prev.scan.size());
    for (const Point& p : prev.scan.points) pts.emplace_back(p.x, p.y, p.z);
    hashes.emplace_back(params.neighbor_radius, std::move(pts));
  }
  MotionLabels out(stack.current.size(), MotionLabel::Static);
  for (std::size_t i = 0; i < stack.current.size(); ++i) {
    const Point& p = stack.current.points[i];
    const Eigen::Vector3d q(p.x, p.y, p.z);
    bool moving = true;
    for (const auto& h : hashes) {
      // An empty previous scan has no neighbor at any finite distance.
      if (h.size() == 0 ? std::isinf(params.distance_threshold)
                        : h.anyWithin(q, params.distance_threshold)) {
        moving = false;
        break;
      }
    }
    if (moving) out[i] = MotionLabel::Moving;
  }
  return out;
}

/// R_i = current - previous_i elementwise, one grid per previous frame.
template <typename T>
std::vector<Tensor4<T>> voxelResidualFeatures(const Tensor4<T>& current,
                                              std::span<const Tensor4<T>> previous) {
  std::vector<Tensor4<T>> out;
  out.reserve(previous.size());
  for (const auto& prev : previous) {
    requireSameShape(current, prev, "voxel residual");
    Tensor4<T> r(current.channels(), current.dims());
    r.mat() = current.mat() - prev.mat();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace seqmos

#endif  // SEQMOS_RESIDUAL_HPP
