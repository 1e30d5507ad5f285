// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_SPATIAL_HASH_HPP
#define SEQMOS_SPATIAL_HASH_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

namespace seqmos {

/// Uniform-grid hash over 3D points for radius and nearest-neighbor queries.
class SpatialHash {
 public:
  SpatialHash(double cell_size, std::vector<Eigen::Vector3d> points)
      : cell_(cell_size), points_(std::move(points)) {
    for (std::size_t i = 0; i < points_.size(); ++i) cells_[key(cellOf(points_[i]))].push_back(i);
  }

  std::size_t size() const noexcept { return points_.size(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

  /// True iff some stored point lies within `radius` (inclusive) of q.
  bool anyWithin(const Eigen::Vector3d& q, double radius) const {
    if (points_.empty()) return false;
    if (std::isinf(radius)) return true;
    const double r2 = radius * radius;
    const long ring = static_cast<long>(std::ceil(radius / cell_));
    if (ringVolume(ring) > static_cast<double>(points_.size())) {
      for (const auto& p : points_)
        if ((p - q).squaredNorm() <= r2) return true;
      return false;
    }
    const Cell c = cellOf(q);
    for (long dx = -ring; dx <= ring; ++dx)
      for (long dy = -ring; dy <= ring; ++dy)
        for (long dz = -ring; dz <= ring; ++dz) {
          auto it = cells_.find(key({c.x + dx, c.y + dy, c.z + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second)
            if ((points_[i] - q).squaredNorm() <= r2) return true;
        }
    return false;
  }

  /// Nearest stored point within max_dist; returns -1 if none.
  long nearest(const Eigen::Vector3d& q, double max_dist, double* dist2_out = nullptr) const {
    long best = -1;
    double best_d2 = max_dist * max_dist;
    const long ring = static_cast<long>(std::ceil(max_dist / cell_));
    const Cell c = cellOf(q);
    for (long dx = -ring; dx <= ring; ++dx)
      for (long dy = -ring; dy <= ring; ++dy)
        for (long dz = -ring; dz <= ring; ++dz) {
          auto it = cells_.find(key({c.x + dx, c.y + dy, c.z + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) {
            const double d2 = (points_[i] - q).squaredNorm();
            if (d2 <= best_d2) {
              if (d2 == best_d2 && best >= 0 && static_cast<long>(i) > best) continue;
              best_d2 = d2;
              best = static_cast<long>(i);
            }
          }
        }
    if (dist2_out) *dist2_out = best_d2;
    return best;
  }

 private:
  struct Cell {
    long x, y, z;
  };

  Cell cellOf(const Eigen::Vector3d& p) const {
    return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
            static_cast<long>(std::floor(p.z() / cell_))};
  }

  static std::uint64_t key(const Cell& c) {
    // 21 bits per axis
    constexpr std::uint64_t mask = (1ull << 21) - 1;
    return ((static_cast<std::uint64_t>(c.x) & mask) << 42) |
           ((static_cast<std::uint64_t>(c.y) & mask) << 21) | (static_cast<std::uint64_t>(c.z) & mask);
  }

  static double ringVolume(long ring) {
    const double side = 2.0 * static_cast<double>(ring) + 1.0;
    return side * side * side;
  }

  double cell_;
  std::vector<Eigen::Vector3d> points_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace seqmos

#endif  // SEQMOS_SPATIAL_HASH_HPP
