// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_SYNTH_HPP
#define SEQMOS_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seqmos/error.hpp"
#include "seqmos/geometry.hpp"
#include "seqmos/kitti_io.hpp"
#include "seqmos/nn/param.hpp"
#include "seqmos/types.hpp"

namespace seqmos {
namespace synth {

/// Semantic ids written to the label files (SemanticKITTI numbering).
namespace semantic {
inline constexpr std::uint16_t kCar = 10;
inline constexpr std::uint16_t kBicycle = 11;
inline constexpr std::uint16_t kPerson = 30;
inline constexpr std::uint16_t kRoad = 40;
inline constexpr std::uint16_t kBuilding = 50;
inline constexpr std::uint16_t kPole = 80;
inline constexpr std::uint16_t kMovingCar = 252;
inline constexpr std::uint16_t kMovingPerson = 254;
inline constexpr std::uint16_t kMovingBicyclist = 253;
}  // namespace semantic

struct SensorSpec {
  int rings = 16;
  int columns = 360;
  double elevation_min_deg = -15.0;
  double elevation_max_deg = 5.0;
  double min_range = 1.0;
  double max_range = 40.0;
  double mount_height = 1.8;
  /// Gaussian range jitter (m); 0 gives exact hits.
  double range_noise = 0.0;
};

struct StaticBox {
  Eigen::Vector3d min;
  Eigen::Vector3d max;
  std::uint16_t semantic = semantic::kBuilding;
  double reflectivity = 0.5;
};

struct Waypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box moving along a piecewise-linear path; it rests at the
/// first waypoint before the path starts and at the last one afterwards.
struct Actor {
  Eigen::Vector3d size{4.5, 1.8, 1.5};  // extents along x, y, z
  std::vector<Waypoint> path;
  std::uint16_t static_semantic = semantic::kCar;
  std::uint16_t moving_semantic = semantic::kMovingCar;
  double reflectivity = 0.8;

  Eigen::Vector2d position(double t) const {
    if (t <= path.front().t) return {path.front().x, path.front().y};
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const Waypoint& a = path[i];
      const Waypoint& b = path[i + 1];
      if (t < b.t) {
        const double u = (t - a.t) / (b.t - a.t);
        return {a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)};
      }
    }
    return {path.back().x, path.back().y};
  }

  /// Speed on the segment containing t, [t_i, t_i+1); 0 outside the path.
  double speed(double t) const {
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      const Waypoint& a = path[i];
      const Waypoint& b = path[i + 1];
      if (t >= a.t && t < b.t) return std::hypot(b.x - a.x, b.y - a.y) / (b.t - a.t);
    }
    return 0.0;
  }
};

struct EgoWaypoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // unwrapped, interpolated linearly
};

struct SynthSceneSpec {
  std::string name = "custom";
  SensorSpec sensor;
  bool ground = true;
  std::vector<StaticBox> boxes;
  std::vector<Actor> actors;
  std::vector<EgoWaypoint> ego;
  double frame_rate = 10.0;
  std::uint64_t seed = 1;

  void validate() const {
    auto bad = [](const std::string& m) { fail(ErrorKind::DegenerateSpec, m); };
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) bad("frame rate must be positive and finite");
    if (sensor.rings < 1 || sensor.columns < 1) bad("sensor needs at least one ring and column");
    if (!(sensor.max_range > sensor.min_range && sensor.min_range >= 0.0 && std::isfinite(sensor.max_range)))
      bad("sensor range limits");
    if (!(sensor.range_noise >= 0.0) || !std::isfinite(sensor.range_noise)) bad("range noise");
    if (ego.empty()) bad("ego trajectory is empty");
    for (std::size_t i = 0; i < ego.size(); ++i) {
      if (!std::isfinite(ego[i].t) || !std::isfinite(ego[i].x) || !std::isfinite(ego[i].y) ||
          !std::isfinite(ego[i].yaw))
        bad("ego waypoint is not finite");
      if (i && !(ego[i].t > ego[i - 1].t)) bad("ego waypoint times must increase");
    }
    for (const Actor& a : actors) {
      if (a.path.empty()) bad("actor without waypoints");
      if (!(a.size.minCoeff() > 0.0) || !a.size.allFinite()) bad("actor size");
      for (std::size_t i = 0; i < a.path.size(); ++i) {
        if (!std::isfinite(a.path[i].t) || !std::isfinite(a.path[i].x) || !std::isfinite(a.path[i].y))
          bad("actor waypoint is not finite");
        if (i && !(a.path[i].t > a.path[i - 1].t)) bad("actor waypoint times must increase");
      }
    }
    for (const StaticBox& b : boxes)
      if (!b.min.allFinite() || !b.max.allFinite() || !(b.max.array() > b.min.array()).all())
        bad("static box bounds");
  }

  PoseSE3 egoPose(double t) const {
    const EgoWaypoint* a = &ego.front();
    const EgoWaypoint* b = a;
    double u = 0.0;
    if (t >= ego.back().t) {
      a = b = &ego.back();
    } else if (t > ego.front().t) {
      for (std::size_t i = 0; i + 1 < ego.size(); ++i)
        if (t < ego[i + 1].t) {
          a = &ego[i];
          b = &ego[i + 1];
          u = (t - a->t) / (b->t - a->t);
          break;
        }
    }
    const double x = a->x + u * (b->x - a->x);
    const double y = a->y + u * (b->y - a->y);
    const double yaw = a->yaw + u * (b->yaw - a->yaw);
    return PoseSE3::fromYaw(yaw, Eigen::Vector3d(x, y, sensor.mount_height));
  }
};

enum class HitKind : std::uint8_t { Ground, Box, Actor };

/// What a single return hit.
struct HitInfo {
  HitKind kind = HitKind::Ground;
  int id = -1;  // box or actor index
  Eigen::Vector3d world = Eigen::Vector3d::Zero();
};

struct SynthSequence {
  SynthSceneSpec spec;
  std::vector<RawScan> scans;
  std::vector<io::LabelSet> semantics;
  std::vector<MotionLabels> labels;
  std::vector<PoseSE3> world_poses;
  /// rel_poses[k] = T_k^{k-1}; entry 0 is the identity.
  std::vector<PoseSE3> rel_poses;
  std::vector<double> times;
  std::vector<std::vector<HitInfo>> hits;

  std::size_t size() const noexcept { return scans.size(); }
};

namespace detail {

/// Slab test; returns the entry distance of a ray starting outside the box.
inline bool rayBox(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                   const Eigen::Vector3d& hi, double& t_hit) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= 0.0) return false;
  t_hit = t0;
  return true;
}

inline std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t frame) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + frame + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

struct SynthFrame {
  RawScan scan;
  io::LabelSet semantics;
  MotionLabels labels;
  std::vector<HitInfo> hits;
};

/// Ray-casts one frame at time t.
inline SynthFrame renderFrame(const SynthSceneSpec& spec, std::size_t frame, double t, const PoseSE3& pose) {
  const SensorSpec& s = spec.sensor;
  const Eigen::Matrix3d R = pose.rotation();
  const Eigen::Vector3d o = pose.translation();

  struct Target {
    Eigen::Vector3d lo, hi;
    HitKind kind;
    int id;
  };
  std::vector<Target> targets;
  const double reach = s.max_range;
  auto near = [&](const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
    const Eigen::Vector3d c = o.cwiseMax(lo).cwiseMin(hi);
    return (c - o).norm() <= reach;
  };
  for (std::size_t i = 0; i < spec.boxes.size(); ++i)
    if (near(spec.boxes[i].min, spec.boxes[i].max))
      targets.push_back({spec.boxes[i].min, spec.boxes[i].max, HitKind::Box, static_cast<int>(i)});
  std::vector<bool> actor_moving(spec.actors.size());
  for (std::size_t i = 0; i < spec.actors.size(); ++i) {
    const Actor& a = spec.actors[i];
    const Eigen::Vector2d c = a.position(t);
    const Eigen::Vector3d lo(c.x() - a.size.x() / 2, c.y() - a.size.y() / 2, 0.0);
    const Eigen::Vector3d hi(c.x() + a.size.x() / 2, c.y() + a.size.y() / 2, a.size.z());
    actor_moving[i] = a.speed(t) > 0.0;
    if (near(lo, hi)) targets.push_back({lo, hi, HitKind::Actor, static_cast<int>(i)});
  }

  nn::Rng rng(detail::mixSeed(spec.seed, frame));
  SynthFrame out;
  out.scan.frame_index = frame;
  for (int r = 0; r < s.rings; ++r) {
    const double elev_deg = s.rings == 1 ? s.elevation_min_deg
                                         : s.elevation_min_deg + r * (s.elevation_max_deg - s.elevation_min_deg) /
                                                                     (s.rings - 1);
    const double elev = elev_deg * std::numbers::pi / 180.0;
    for (int c = 0; c < s.columns; ++c) {
      const double az = -std::numbers::pi + (c + 0.5) * 2.0 * std::numbers::pi / s.columns;
      const Eigen::Vector3d d_s(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const Eigen::Vector3d d_w = R * d_s;
      double best = s.max_range;
      HitKind kind = HitKind::Ground;
      int id = -1;
      bool hit = false;
      if (spec.ground && d_w.z() < 0.0) {
        const double tg = -o.z() / d_w.z();
        if (tg > 0.0 && tg <= best) {
          best = tg;
          hit = true;
        }
      }
      for (const Target& tg : targets) {
        double th;
        if (detail::rayBox(o, d_w, tg.lo, tg.hi, th) && th < best) {
          best = th;
          kind = tg.kind;
          id = tg.id;
          hit = true;
        }
      }
      if (!hit || best < s.min_range) continue;
      const double range = s.range_noise > 0.0 ? best + s.range_noise * rng.normal() : best;
      double refl = 0.3;
      std::uint16_t sem = semantic::kRoad;
      bool moving = false;
      if (kind == HitKind::Box) {
        refl = spec.boxes[static_cast<std::size_t>(id)].reflectivity;
        sem = spec.boxes[static_cast<std::size_t>(id)].semantic;
      } else if (kind == HitKind::Actor) {
        const Actor& a = spec.actors[static_cast<std::size_t>(id)];
        refl = a.reflectivity;
        moving = actor_moving[static_cast<std::size_t>(id)];
        sem = moving ? a.moving_semantic : a.static_semantic;
      }
      const Eigen::Vector3d p = range * d_s;
      out.scan.points.push_back({p.x(), p.y(), p.z(), refl});
      out.semantics.labels.push_back(sem);
      out.labels.push_back(moving ? MotionLabel::Moving : MotionLabel::Static);
      out.hits.push_back({kind, id, o + best * d_w});
    }
  }
  return out;
}

/// Renders num_frames frames at the spec's frame rate, starting at t = 0.
inline SynthSequence generateSequence(const SynthSceneSpec& spec, std::size_t num_frames) {
  spec.validate();
  if (num_frames < 1) fail(ErrorKind::DegenerateSpec, "sequence needs at least one frame");
  SynthSequence seq;
  seq.spec = spec;
  for (std::size_t f = 0; f < num_frames; ++f) {
    const double t = static_cast<double>(f) / spec.frame_rate;
    const PoseSE3 pose = spec.egoPose(t);
    SynthFrame fr = renderFrame(spec, f, t, pose);
    seq.scans.push_back(std::move(fr.scan));
    seq.semantics.push_back(std::move(fr.semantics));
    seq.labels.push_back(std::move(fr.labels));
    seq.hits.push_back(std::move(fr.hits));
    seq.world_poses.push_back(pose);
    seq.times.push_back(t);
  }
  seq.rel_poses = relativeFromWorld(seq.world_poses);
  return seq;
}

/// Labels recomputed from the hit record of a frame alone.
inline MotionLabels oracleMotionLabels(const SynthSequence& seq, std::size_t frame) {
  if (frame >= seq.size())
    fail(ErrorKind::IndexOutOfRange, "frame " + std::to_string(frame) + " of " + std::to_string(seq.size()));
  const double t = seq.times[frame];
  MotionLabels out;
  out.reserve(seq.hits[frame].size());
  for (const HitInfo& h : seq.hits[frame]) {
    const bool moving =
        h.kind == HitKind::Actor && seq.spec.actors[static_cast<std::size_t>(h.id)].speed(t) > 0.0;
    out.push_back(moving ? MotionLabel::Moving : MotionLabel::Static);
  }
  return out;
}

/// Writes velodyne/, labels/, poses.txt and times.txt under dir.
inline void writeSequence(const SynthSequence& seq, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "velodyne");
  std::filesystem::create_directories(dir / "labels");
  for (std::size_t f = 0; f < seq.size(); ++f) {
    io::writeScan(dir / "velodyne" / io::frameName(f, ".bin"), seq.scans[f]);
    io::writeLabels(dir / "labels" / io::frameName(f, ".label"), seq.semantics[f]);
  }
  io::writePoses(dir / "poses.txt", seq.world_poses);
  io::writeTimes(dir / "times.txt", seq.times);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace detail {

inline Actor car(double t0, double x0, double y0, double t1, double x1, double y1, bool along_x = true) {
  Actor a;
  a.size = along_x ? Eigen::Vector3d(4.5, 1.8, 1.5) : Eigen::Vector3d(1.8, 4.5, 1.5);
  a.path = {{t0, x0, y0}, {t1, x1, y1}};
  return a;
}

inline Actor parkedCar(double x, double y, bool along_x = true) {
  Actor a = car(0.0, x, y, 1.0, x, y, along_x);
  a.path.resize(1);
  return a;
}

/// Buildings with random setbacks and gaps along one side of a road parallel to x.
inline void addStreetSide(SynthSceneSpec& spec, nn::Rng& rng, double x_from, double x_to, double side,
                          double near_y) {
  double x = x_from + rng.uniform(0.0, 4.0);
  while (x < x_to) {
    const double len = rng.uniform(6.0, 22.0);
    const double depth = rng.uniform(6.0, 14.0);
    const double setback = near_y + rng.uniform(0.0, 6.0);
    const double height = rng.uniform(3.5, 14.0);
    const double y0 = side > 0 ? setback : -setback - depth;
    spec.boxes.push_back({{x, y0, 0.0}, {x + len, y0 + depth, height}, semantic::kBuilding, 0.5});
    x += len + rng.uniform(1.0, 8.0);
  }
}

inline void addPoles(SynthSceneSpec& spec, nn::Rng& rng, double x_from, double x_to, double y) {
  double x = x_from + rng.uniform(0.0, 6.0);
  while (x < x_to) {
    spec.boxes.push_back({{x - 0.15, y - 0.15, 0.0}, {x + 0.15, y + 0.15, rng.uniform(3.0, 6.0)}, semantic::kPole, 0.6});
    x += rng.uniform(6.0, 16.0);
  }
}

inline std::vector<EgoWaypoint> straightEgo(double speed, double duration, double y) {
  return {{0.0, 0.0, y, 0.0}, {duration, speed * duration, y, 0.0}};
}

}  // namespace detail

// Road along +x: lanes at y = -5.25 and -1.75 (ego) drive +x, lanes at
// y = 1.75 and 5.25 drive -x; parking strips at y = +-8.5.
inline constexpr double kLaneY[4] = {-5.25, -1.75, 1.75, 5.25};

/**
 * @brief Randomized street scene used for training and held-out evaluation.
 *
 * Moving and stopped vehicles share the same lanes, so position alone does
 * not reveal motion.
 */
inline SynthSceneSpec benchmarkScene(std::uint64_t seed, double duration = 5.0) {
  nn::Rng rng(detail::mixSeed(seed, 0xB3));
  SynthSceneSpec spec;
  spec.name = "benchmark";
  spec.seed = seed;
  spec.frame_rate = 10.0;
  const double ego_speed = rng.uniform(3.0, 8.0);
  spec.ego = detail::straightEgo(ego_speed, duration, kLaneY[1]);
  const double x_end = ego_speed * duration;
  detail::addStreetSide(spec, rng, -45.0, x_end + 45.0, 1.0, 11.0);
  detail::addStreetSide(spec, rng, -45.0, x_end + 45.0, -1.0, 11.0);
  detail::addPoles(spec, rng, -40.0, x_end + 40.0, 10.0);
  detail::addPoles(spec, rng, -40.0, x_end + 40.0, -10.0);

  // parked cars
  for (double side : {-8.5, 8.5}) {
    double x = -35.0 + rng.uniform(0.0, 10.0);
    while (x < x_end + 35.0) {
      if (rng.uniform01() < 0.5) spec.actors.push_back(detail::parkedCar(x, side));
      x += rng.uniform(5.5, 12.0);
    }
  }

  // Vehicles sharing a lane never come closer than 1.5 m bumper to bumper.
  auto collides = [&](const Actor& a) {
    for (const Actor& b : spec.actors) {
      if (b.path.front().y != a.path.front().y) continue;
      const double gap = 0.5 * (a.size.x() + b.size.x()) + 1.5;
      for (double t = 0.0; t <= duration + 1.0; t += 0.05)
        if (std::abs(a.position(t).x() - b.position(t).x()) < gap) return true;
    }
    return false;
  };
  const int vehicles = 6 + static_cast<int>(rng.below(5));
  for (int v = 0; v < vehicles; ++v) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const int lane_pick = static_cast<int>(rng.below(3));
      const int lane = lane_pick == 0 ? 0 : lane_pick + 1;  // never the ego lane
      const double dir = kLaneY[lane] < 0 ? 1.0 : -1.0;
      const double y = kLaneY[lane];
      const double x0 = rng.uniform(-25.0, x_end + 30.0);
      const double roll = rng.uniform01();
      const bool bike = rng.uniform01() < 0.15;
      Actor a;
      if (roll < 0.3) {
        a = detail::parkedCar(x0, y);
      } else {
        const double speed = bike ? rng.uniform(4.0, 7.0) : rng.uniform(8.0, 14.0);
        if (roll < 0.45) {
          // stops halfway or starts halfway
          const double t_switch = rng.uniform(1.0, duration - 1.0);
          if (rng.uniform01() < 0.5)
            a = detail::car(0.0, x0, y, t_switch, x0 + dir * speed * t_switch, y);
          else
            a = detail::car(t_switch, x0, y, duration + 1.0, x0 + dir * speed * (duration + 1.0 - t_switch), y);
        } else {
          a = detail::car(0.0, x0, y, duration + 1.0, x0 + dir * speed * (duration + 1.0), y);
        }
      }
      if (bike) {
        a.size = {1.8, 0.6, 1.7};
        a.static_semantic = semantic::kBicycle;
        a.moving_semantic = semantic::kMovingBicyclist;
        a.reflectivity = 0.7;
      }
      if (collides(a)) continue;
      spec.actors.push_back(a);
      break;
    }
  }
  return spec;
}

/// Actor 0 waits in the next lane for the whole sequence; actor 1 drives past it.
inline SynthSceneSpec stoppedCarScene(std::uint64_t seed, double duration = 5.0) {
  nn::Rng rng(detail::mixSeed(seed, 0x5C));
  SynthSceneSpec spec;
  spec.name = "stopped-car";
  spec.seed = seed;
  const double ego_speed = 5.0;
  spec.ego = detail::straightEgo(ego_speed, duration, kLaneY[1]);
  spec.actors.push_back(detail::parkedCar(14.0, kLaneY[0]));
  const double speed = 8.0;
  spec.actors.push_back(detail::car(0.0, 40.0, kLaneY[2], duration + 1.0, 40.0 - speed * (duration + 1.0), kLaneY[2]));
  detail::addStreetSide(spec, rng, -45.0, 70.0, 1.0, 11.0);
  detail::addStreetSide(spec, rng, -45.0, 70.0, -1.0, 11.0);
  detail::addPoles(spec, rng, -40.0, 65.0, 10.0);
  detail::addPoles(spec, rng, -40.0, 65.0, -10.0);
  return spec;
}

/**
 * @brief Closed circuit: a rounded rectangle driven once in 200 frames at
 * 5 Hz, so frame 200 revisits frame 0 with the same pose.
 */
inline SynthSceneSpec loopScene(std::uint64_t seed, std::size_t circuit_frames = 200) {
  nn::Rng rng(detail::mixSeed(seed, 0x100));
  SynthSceneSpec spec;
  spec.name = "loop";
  spec.seed = seed;
  spec.frame_rate = 5.0;
  const double a = 50.0, b = 30.0, rc = 10.0;  // half sides, corner radius
  // Arc-length parametrized rounded rectangle, counter-clockwise from (0, -b).
  const double straight_x = 2 * (a - rc), straight_y = 2 * (b - rc), arc = std::numbers::pi * rc / 2;
  const double perimeter = 2 * straight_x + 2 * straight_y + 4 * arc;
  auto at = [&](double s, double& x, double& y, double& yaw) {
    s = std::fmod(s, perimeter);
    const double segs[8] = {straight_x / 2, arc, straight_y, arc, straight_x, arc, straight_y, arc};
    double cx[4] = {a - rc, a - rc, -(a - rc), -(a - rc)};
    double cy[4] = {-(b - rc), b - rc, b - rc, -(b - rc)};
    double base = 0.0;
    // start at (0,-b) heading +x
    double px = 0.0, py = -b, heading = 0.0;
    for (int i = 0; i < 9; ++i) {
      const double len = i < 8 ? segs[i] : straight_x / 2;
      const bool is_arc = i < 8 && (i % 2 == 1);
      if (s <= base + len || i == 8) {
        const double u = s - base;
        if (!is_arc) {
          x = px + u * std::cos(heading);
          y = py + u * std::sin(heading);
          yaw = heading;
        } else {
          const int k = i / 2;
          const double phi = heading - std::numbers::pi / 2 + u / rc;
          x = cx[k] + rc * std::cos(phi);
          y = cy[k] + rc * std::sin(phi);
          yaw = heading + u / rc;
        }
        return;
      }
      if (!is_arc) {
        px += len * std::cos(heading);
        py += len * std::sin(heading);
      } else {
        heading += std::numbers::pi / 2;
        const int k = i / 2;
        px = cx[k] + rc * std::cos(heading - std::numbers::pi / 2);
        py = cy[k] + rc * std::sin(heading - std::numbers::pi / 2);
      }
      base += len;
    }
  };
  const double duration = static_cast<double>(circuit_frames) / spec.frame_rate;
  const std::size_t samples = circuit_frames * 4;
  for (std::size_t i = 0; i <= samples; ++i) {
    const double s = perimeter * static_cast<double>(i) / static_cast<double>(samples);
    double x, y, yaw;
    at(s, x, y, yaw);
    if (i == samples) x = 0.0, y = -b, yaw = 2 * std::numbers::pi;
    spec.ego.push_back({duration * static_cast<double>(i) / static_cast<double>(samples), x, y, yaw});
  }
  // keep the final heading equal to the start modulo 2 pi
  spec.ego.back().yaw = 2 * std::numbers::pi;

  // Scattered buildings inside and outside the loop, clear of the road.
  auto clear = [&](double x0, double y0, double x1, double y1) {
    const double margin = 7.0;
    const double ox = std::max(std::abs(x0), std::abs(x1)), oy = std::max(std::abs(y0), std::abs(y1));
    const double ix = std::min(std::abs(x0), std::abs(x1)), iy = std::min(std::abs(y0), std::abs(y1));
    const bool straddles_x = x0 < 0 && x1 > 0, straddles_y = y0 < 0 && y1 > 0;
    const double nx = straddles_x ? 0.0 : ix, ny = straddles_y ? 0.0 : iy;
    // box entirely inside the inner rectangle or entirely outside the outer one
    const bool inside = ox < a - margin && oy < b - margin;
    const bool outside = nx > a + margin || ny > b + margin;
    return inside || outside;
  };
  int placed = 0;
  for (int attempt = 0; attempt < 4000 && placed < 70; ++attempt) {
    const double w = rng.uniform(4.0, 14.0), d = rng.uniform(4.0, 14.0);
    const double x0 = rng.uniform(-a - 35.0, a + 35.0 - w), y0 = rng.uniform(-b - 35.0, b + 35.0 - d);
    if (!clear(x0, y0, x0 + w, y0 + d)) continue;
    bool overlap = false;
    for (const auto& bx : spec.boxes)
      if (x0 < bx.max.x() + 1 && x0 + w > bx.min.x() - 1 && y0 < bx.max.y() + 1 && y0 + d > bx.min.y() - 1)
        overlap = true;
    if (overlap) continue;
    spec.boxes.push_back({{x0, y0, 0.0}, {x0 + w, y0 + d, rng.uniform(3.0, 15.0)}, semantic::kBuilding, 0.5});
    ++placed;
  }

  // Cars shuttling along the long sides, one lane outside the ego path.
  for (int i = 0; i < 6; ++i) {
    const double side = i % 2 ? 1.0 : -1.0;
    const double y = side * (b + 3.5);
    const double speed = rng.uniform(5.0, 10.0);
    const double x0 = rng.uniform(-a, a);
    Actor c;
    c.size = {4.5, 1.8, 1.5};
    double t = 0.0, x = x0, dir = rng.uniform01() < 0.5 ? 1.0 : -1.0;
    c.path.push_back({t, x, y});
    while (t < duration + 1.0) {
      const double target = dir > 0 ? a + 10.0 : -a - 10.0;
      const double dt = std::abs(target - x) / speed;
      t += std::max(dt, 0.1);
      x = target;
      c.path.push_back({t, x, y});
      dir = -dir;
    }
    spec.actors.push_back(c);
  }
  return spec;
}

/// Dense traffic moving with the ego vehicle, for odometry robustness checks.
inline SynthSceneSpec trafficScene(std::uint64_t seed, double duration = 5.0) {
  nn::Rng rng(detail::mixSeed(seed, 0x7F));
  SynthSceneSpec spec;
  spec.name = "traffic";
  spec.seed = seed;
  const double ego_speed = 8.0;
  spec.ego = detail::straightEgo(ego_speed, duration, kLaneY[1]);
  const double x_end = ego_speed * duration;
  detail::addStreetSide(spec, rng, -45.0, x_end + 45.0, 1.0, 11.0);
  detail::addStreetSide(spec, rng, -45.0, x_end + 45.0, -1.0, 11.0);
  detail::addPoles(spec, rng, -40.0, x_end + 40.0, 10.0);
  detail::addPoles(spec, rng, -40.0, x_end + 40.0, -10.0);
  // A platoon matching the ego speed in the neighbouring lanes, plus oncoming cars.
  for (int lane : {0, 2, 3}) {
    const double dir = kLaneY[lane] < 0 ? 1.0 : -1.0;
    double x = -20.0 + rng.uniform(0.0, 4.0);
    while (x < 30.0) {
      const double speed = lane == 0 ? ego_speed * rng.uniform(0.95, 1.05) : rng.uniform(6.0, 10.0);
      const double x0 = lane == 0 ? x : x + x_end;
      spec.actors.push_back(detail::car(0.0, x0, kLaneY[lane], duration + 1.0,
                                        x0 + dir * speed * (duration + 1.0), kLaneY[lane]));
      x += rng.uniform(6.0, 9.0);
    }
  }
  // Cars directly ahead and behind the ego in its own lane, keeping distance.
  for (double gap : {-9.0, 9.0, 16.0})
    spec.actors.push_back(detail::car(0.0, gap, kLaneY[1], duration + 1.0, gap + ego_speed * (duration + 1.0), kLaneY[1]));
  return spec;
}

inline SynthSceneSpec sceneByName(const std::string& name, std::uint64_t seed, std::size_t frames) {
  if (name == "benchmark") return benchmarkScene(seed, static_cast<double>(frames) / 10.0);
  if (name == "stopped-car") return stoppedCarScene(seed, static_cast<double>(frames) / 10.0);
  if (name == "traffic") return trafficScene(seed, static_cast<double>(frames) / 10.0);
  if (name == "loop") return loopScene(seed, frames > 1 ? frames - 1 : 1);
  fail(ErrorKind::ConfigError, "unknown scenario '" + name + "'");
}

}  // namespace synth
}  // namespace seqmos

#endif  // SEQMOS_SYNTH_HPP
