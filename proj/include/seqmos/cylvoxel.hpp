// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_CYLVOXEL_HPP
#define SEQMOS_CYLVOXEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "seqmos/error.hpp"
#include "seqmos/tensor.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

struct CylindricalGridSpec {
  Dims3 bins{24, 32, 8};
  double rho_min = 0.0;
  double rho_max = 32.0;
  double z_min = -3.0;
  double z_max = 3.0;

  void validate() const {
    if (bins.h < 1 || bins.w < 1 || bins.l < 1)
      fail(ErrorKind::ConfigError, "grid bins must be >= 1");
    if (!(rho_min >= 0.0 && rho_min < rho_max && std::isfinite(rho_max)))
      fail(ErrorKind::ConfigError, "grid needs 0 <= rho_min < rho_max");
    if (!(z_min < z_max && std::isfinite(z_min) && std::isfinite(z_max)))
      fail(ErrorKind::ConfigError, "grid needs z_min < z_max");
  }

  double rhoStep() const { return (rho_max - rho_min) / bins.h; }
  double thetaStep() const { return 2.0 * std::numbers::pi / bins.w; }
  double zStep() const { return (z_max - z_min) / bins.l; }

  double rhoCenter(int h) const { return rho_min + (h + 0.5) * rhoStep(); }
  double thetaCenter(int w) const { return -std::numbers::pi + (w + 0.5) * thetaStep(); }
  double zCenter(int l) const { return z_min + (l + 0.5) * zStep(); }

  friend bool operator==(const CylindricalGridSpec&, const CylindricalGridSpec&) = default;
};

struct CylindricalPoint {
  double rho = 0.0;
  double theta = 0.0;  // [-pi, pi)
  double z = 0.0;
};

inline CylindricalPoint toCylindrical(double x, double y, double z) {
  double theta = std::atan2(y, x);
  if (theta >= std::numbers::pi) theta = -std::numbers::pi;
  return {std::hypot(x, y), theta, z};
}

struct VoxelIndex {
  int h = -1;
  int w = -1;
  int l = -1;

  bool valid() const noexcept { return h >= 0; }
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Per-point voxel assignment plus the point's position inside its voxel.
struct PointVoxelMapping {
  Dims3 dims;
  std::vector<VoxelIndex> index;
  /// Flattened voxel index, -1 for OutOfRange.
  std::vector<int> flat;
  /// (d_rho, d_theta * rho_center, d_z) relative to the voxel center, meters.
  std::vector<std::array<double, 3>> offset;
  std::vector<CylindricalPoint> cyl;

  std::size_t size() const noexcept { return flat.size(); }
};

namespace detail {

/// floor((v - lo) / step) with the closed upper edge clamped into the last bin;
/// -1 outside [lo, hi].
inline int binIndex(double v, double lo, double hi, int bins) {
  if (!(v >= lo && v <= hi)) return -1;
  const int i = static_cast<int>(std::floor((v - lo) / ((hi - lo) / bins)));
  return std::clamp(i, 0, bins - 1);
}

}  // namespace detail

inline PointVoxelMapping assignVoxels(const RawScan& scan, const CylindricalGridSpec& spec) {
  PointVoxelMapping m;
  m.dims = spec.bins;
  const std::size_t n = scan.size();
  m.index.resize(n);
  m.flat.assign(n, -1);
  m.offset.assign(n, {0.0, 0.0, 0.0});
  m.cyl.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = scan.points[i];
    const CylindricalPoint c = toCylindrical(p.x, p.y, p.z);
    m.cyl[i] = c;
    const int h = detail::binIndex(c.rho, spec.rho_min, spec.rho_max, spec.bins.h);
    const int l = detail::binIndex(c.z, spec.z_min, spec.z_max, spec.bins.l);
    if (h < 0 || l < 0) continue;
    const int w = detail::binIndex(c.theta, -std::numbers::pi, std::numbers::pi, spec.bins.w);
    m.index[i] = {h, w, l};
    m.flat[i] = (h * spec.bins.w + w) * spec.bins.l + l;
    const double rc = spec.rhoCenter(h);
    m.offset[i] = {c.rho - rc, (c.theta - spec.thetaCenter(w)) * rc, c.z - spec.zCenter(l)};
  }
  return m;
}

/**
 * @brief Network input features per point.
 *
 * Columns: (d_rho, d_theta*rho_center, d_z) divided by the matching voxel
 * extent, rho and z scaled to [0, 1] over the grid range, and intensity.
 * OutOfRange points get zero offsets.
 */
template <typename T>
RowMatrix<T> pointInputs(const RawScan& scan, const PointVoxelMapping& m,
                         const CylindricalGridSpec& spec) {
  if (scan.size() != m.size()) fail(ErrorKind::ShapeMismatch, "scan/mapping length");
  constexpr int kCols = 6;
  RowMatrix<T> x(static_cast<Eigen::Index>(m.size()), kCols);
  const double rho_span = spec.rho_max - spec.rho_min;
  const double z_span = spec.z_max - spec.z_min;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    if (m.flat[i] >= 0) {
      const double rc = spec.rhoCenter(m.index[i].h);
      x(r, 0) = static_cast<T>(m.offset[i][0] / spec.rhoStep());
      x(r, 1) = static_cast<T>(m.offset[i][1] / (spec.thetaStep() * rc));
      x(r, 2) = static_cast<T>(m.offset[i][2] / spec.zStep());
    } else {
      x(r, 0) = x(r, 1) = x(r, 2) = T(0);
    }
    x(r, 3) = static_cast<T>((m.cyl[i].rho - spec.rho_min) / rho_span);
    x(r, 4) = static_cast<T>((m.cyl[i].z - spec.z_min) / z_span);
    x(r, 5) = static_cast<T>(scan.points[i].intensity);
  }
  return x;
}

template <typename T>
struct VoxelFeatureGrid {
  Tensor4<T> data;
  CylindricalGridSpec spec;
};

/// Winner point per (channel, voxel), -1 for empty voxels.
using ArgmaxIndex = RowMatrix<int>;

/**
 * @brief Channel-wise max over the points of each voxel; empty voxels are 0.
 *
 * @param features N x C per-point features
 * @param argmax optional output recording the winning point (first maximum
 *        in point order)
 */
template <typename T>
Tensor4<T> scatterMaxPool(const RowMatrix<T>& features, const PointVoxelMapping& m,
                          ArgmaxIndex* argmax = nullptr) {
  if (static_cast<std::size_t>(features.rows()) != m.size())
    fail(ErrorKind::ShapeMismatch, "scatter: " + std::to_string(features.rows()) +
                                       " features for " + std::to_string(m.size()) + " points");
  const int c = static_cast<int>(features.cols());
  Tensor4<T> grid(c, m.dims);
  ArgmaxIndex arg = ArgmaxIndex::Constant(c, m.dims.volume(), -1);
  auto& g = grid.mat();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int v = m.flat[i];
    if (v < 0) continue;
    const auto r = static_cast<Eigen::Index>(i);
    for (int ch = 0; ch < c; ++ch) {
      const T f = features(r, ch);
      if (arg(ch, v) < 0 || f > g(ch, v)) {
        g(ch, v) = f;
        arg(ch, v) = static_cast<int>(i);
      }
    }
  }
  if (argmax) *argmax = std::move(arg);
  return grid;
}

/// Routes voxel gradients to the winning point of each (channel, voxel).
template <typename T>
void scatterMaxPoolBackward(const RowMatrix<T>& grad_grid, const ArgmaxIndex& argmax,
                            RowMatrix<T>& grad_features) {
  for (Eigen::Index ch = 0; ch < argmax.rows(); ++ch)
    for (Eigen::Index v = 0; v < argmax.cols(); ++v) {
      const int p = argmax(ch, v);
      if (p >= 0) grad_features(p, ch) += grad_grid(ch, v);
    }
}

/// Each in-range point receives its voxel's feature vector, OutOfRange points zeros.
template <typename T>
RowMatrix<T> gatherPointFeatures(const Tensor4<T>& grid, const PointVoxelMapping& m) {
  if (grid.dims() != m.dims)
    fail(ErrorKind::ShapeMismatch, "gather: grid " + grid.dims().str() + " vs mapping " +
                                       m.dims.str());
  RowMatrix<T> out = RowMatrix<T>::Zero(static_cast<Eigen::Index>(m.size()), grid.channels());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.flat[i] >= 0) out.row(static_cast<Eigen::Index>(i)) = grid.mat().col(m.flat[i]).transpose();
  return out;
}

/// Adjoint of gather: point gradients are summed into their voxels.
template <typename T>
void gatherPointFeaturesBackward(const RowMatrix<T>& grad_points, const PointVoxelMapping& m,
                                 Tensor4<T>& grad_grid) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m.flat[i] >= 0)
      grad_grid.mat().col(m.flat[i]) += grad_points.row(static_cast<Eigen::Index>(i)).transpose();
}

}  // namespace seqmos

#endif  // SEQMOS_CYLVOXEL_HPP
