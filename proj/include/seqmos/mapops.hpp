// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_MAPOPS_HPP
#define SEQMOS_MAPOPS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <tuple>
#include <vector>

#include "seqmos/geometry.hpp"
#include "seqmos/kitti_io.hpp"
#include "seqmos/types.hpp"

namespace seqmos {

struct MapPoint {
  Point world;
  std::size_t frame = 0;
  std::size_t index = 0;  // position inside the source scan
  MotionLabel label = MotionLabel::Static;

  friend bool operator==(const MapPoint&, const MapPoint&) = default;
};

struct GlobalMap {
  std::vector<MapPoint> points;

  std::size_t size() const noexcept { return points.size(); }
};

/// Concatenates every scan transformed by its world pose, labels attached.
inline GlobalMap aggregateMap(const std::vector<RawScan>& scans, const std::vector<PoseSE3>& poses,
                              const std::vector<MotionLabels>& labels) {
  if (scans.size() != poses.size() || scans.size() != labels.size())
    fail(ErrorKind::LengthMismatch, "aggregate map: scans, poses and labels must align");
  GlobalMap map;
  for (std::size_t f = 0; f < scans.size(); ++f) {
    if (labels[f].size() != scans[f].size())
      fail(ErrorKind::LengthMismatch, "aggregate map: frame " + std::to_string(f) + " label count");
    const RawScan world = transformScan(scans[f], poses[f]);
    for (std::size_t i = 0; i < world.size(); ++i) map.points.push_back({world.points[i], f, i, labels[f][i]});
  }
  return map;
}

/// Keeps Static and Ignore points in their original order.
inline GlobalMap filterMoving(const GlobalMap& map) {
  GlobalMap out;
  for (const MapPoint& p : map.points)
    if (p.label != MotionLabel::Moving) out.points.push_back(p);
  return out;
}

/// Surviving points whose true label (looked up by frame and index) is Moving.
inline std::size_t residualMovingCount(const GlobalMap& filtered, const std::vector<MotionLabels>& truth) {
  std::size_t n = 0;
  for (const MapPoint& p : filtered.points) {
    if (p.frame >= truth.size() || p.index >= truth[p.frame].size())
      fail(ErrorKind::IndexOutOfRange, "residual count: map point outside the truth labels");
    if (truth[p.frame][p.index] == MotionLabel::Moving) ++n;
  }
  return n;
}

/// One representative per occupied cell: the first point that landed there.
inline GlobalMap voxelDownsample(const GlobalMap& map, double leaf) {
  if (!(leaf > 0.0)) return map;
  std::map<std::tuple<long, long, long>, bool> seen;
  GlobalMap out;
  for (const MapPoint& p : map.points) {
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.world.x / leaf)),
                                     static_cast<long>(std::floor(p.world.y / leaf)),
                                     static_cast<long>(std::floor(p.world.z / leaf)));
    if (seen.emplace(key, true).second) out.points.push_back(p);
  }
  return out;
}

/// Writes `<stem>.bin` and `<stem>.label` (motion value per point).
inline void exportMap(const GlobalMap& map, const std::filesystem::path& stem) {
  RawScan scan;
  MotionLabels labels;
  scan.points.reserve(map.size());
  for (const MapPoint& p : map.points) {
    scan.points.push_back(p.world);
    labels.push_back(p.label);
  }
  std::filesystem::path bin = stem, label = stem;
  bin += ".bin";
  label += ".label";
  io::writeScan(bin, scan);
  io::writeLabels(label, io::encodePredictions(labels));
}

}  // namespace seqmos

#endif  // SEQMOS_MAPOPS_HPP
