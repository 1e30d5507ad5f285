// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_TYPES_HPP
#define SEQMOS_TYPES_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace seqmos {

struct Point {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// One LiDAR sweep in its sensor frame.
struct RawScan {
  std::vector<Point> points;
  std::size_t frame_index = 0;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Serialized values are fixed: Static=0, Moving=1, Ignore=255.
enum class MotionLabel : std::uint8_t {
  Static = 0,
  Moving = 1,
  Ignore = 255,
};

using MotionLabels = std::vector<MotionLabel>;

inline bool isFinite(const Point& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         std::isfinite(p.intensity);
}

}  // namespace seqmos

#endif  // SEQMOS_TYPES_HPP
