// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>
#include <tuple>

#include "seqmos/mapops.hpp"
#include "seqmos/synth.hpp"

using namespace seqmos;

namespace {

struct Fixture {
  std::vector<RawScan> scans;
  std::vector<PoseSE3> poses;
  std::vector<MotionLabels> labels;
};

Fixture randomFixture(std::mt19937_64& rng, int frames) {
  std::uniform_real_distribution<double> c(-20.0, 20.0), yaw(-3.0, 3.0);
  std::uniform_int_distribution<int> n(0, 40), lab(0, 2);
  Fixture f;
  for (int k = 0; k < frames; ++k) {
    RawScan s;
    s.frame_index = static_cast<std::size_t>(k);
    MotionLabels l;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
      s.points.push_back({c(rng), c(rng), c(rng) / 10.0, 0.5});
      const int v = lab(rng);
      l.push_back(v == 0 ? MotionLabel::Static : v == 1 ? MotionLabel::Moving : MotionLabel::Ignore);
    }
    f.scans.push_back(s);
    f.labels.push_back(l);
    f.poses.push_back(PoseSE3::fromYaw(yaw(rng), Eigen::Vector3d(c(rng), c(rng), 0.0)));
  }
  return f;
}

}  // namespace

TEST(MapOps, AggregateKeepsEveryPoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Fixture f = randomFixture(rng, 1 + trial % 7);
    const GlobalMap map = aggregateMap(f.scans, f.poses, f.labels);
    std::size_t total = 0;
    for (const auto& s : f.scans) total += s.size();
    ASSERT_EQ(map.size(), total);
    for (const MapPoint& p : map.points) {
      const Point& src = f.scans[p.frame].points[p.index];
      const Eigen::Vector3d w = f.poses[p.frame].apply(Eigen::Vector3d(src.x, src.y, src.z));
      EXPECT_NEAR(p.world.x, w.x(), 1e-12);
      EXPECT_NEAR(p.world.y, w.y(), 1e-12);
      EXPECT_NEAR(p.world.z, w.z(), 1e-12);
      EXPECT_EQ(p.label, f.labels[p.frame][p.index]);
    }
  }
}

TEST(MapOps, FilterIsIdempotentAndCommutesWithAggregation) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Fixture f = randomFixture(rng, 5);
    const GlobalMap once = filterMoving(aggregateMap(f.scans, f.poses, f.labels));
    EXPECT_EQ(filterMoving(once).points, once.points);
    for (const MapPoint& p : once.points) EXPECT_NE(p.label, MotionLabel::Moving);

    // Filtering each scan first and aggregating gives the same world points.
    std::vector<RawScan> kept_scans;
    std::vector<MotionLabels> kept_labels;
    for (std::size_t k = 0; k < f.scans.size(); ++k) {
      RawScan s;
      MotionLabels l;
      for (std::size_t i = 0; i < f.scans[k].size(); ++i)
        if (f.labels[k][i] != MotionLabel::Moving) {
          s.points.push_back(f.scans[k].points[i]);
          l.push_back(f.labels[k][i]);
        }
      kept_scans.push_back(s);
      kept_labels.push_back(l);
    }
    const GlobalMap other = aggregateMap(kept_scans, f.poses, kept_labels);
    ASSERT_EQ(other.size(), once.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      EXPECT_EQ(other.points[i].world, once.points[i].world);
      EXPECT_EQ(other.points[i].frame, once.points[i].frame);
      EXPECT_EQ(other.points[i].label, once.points[i].label);
    }
  }
}

TEST(MapOps, ResidualCountAgainstTruth) {
  std::mt19937_64 rng(5);
  const Fixture f = randomFixture(rng, 6);
  // Ground-truth filtering removes every moving point.
  EXPECT_EQ(residualMovingCount(filterMoving(aggregateMap(f.scans, f.poses, f.labels)), f.labels), 0u);
  // Predicting everything Static keeps all of them.
  std::vector<MotionLabels> all_static;
  std::size_t moving = 0;
  for (const auto& l : f.labels) {
    all_static.emplace_back(l.size(), MotionLabel::Static);
    for (MotionLabel v : l) moving += v == MotionLabel::Moving;
  }
  EXPECT_EQ(residualMovingCount(filterMoving(aggregateMap(f.scans, f.poses, all_static)), f.labels), moving);

  GlobalMap bogus;
  bogus.points.push_back({Point{}, f.scans.size(), 0, MotionLabel::Static});
  EXPECT_THROW(residualMovingCount(bogus, f.labels), Error);
}

TEST(MapOps, AggregateRejectsMisalignedInputs) {
  std::mt19937_64 rng(6);
  Fixture f = randomFixture(rng, 3);
  auto poses = f.poses;
  poses.pop_back();
  EXPECT_THROW(aggregateMap(f.scans, poses, f.labels), Error);
  f.scans[1].points.push_back({1, 2, 3, 0});
  EXPECT_THROW(aggregateMap(f.scans, f.poses, f.labels), Error);
}

TEST(MapOps, VoxelDownsampleKeepsFirstPointPerCell) {
  std::mt19937_64 rng(7);
  const Fixture f = randomFixture(rng, 8);
  const GlobalMap map = aggregateMap(f.scans, f.poses, f.labels);
  for (double leaf : {0.5, 2.0, 7.5}) {
    const GlobalMap ds = voxelDownsample(map, leaf);
    auto cell = [leaf](const MapPoint& p) {
      return std::make_tuple(std::floor(p.world.x / leaf), std::floor(p.world.y / leaf), std::floor(p.world.z / leaf));
    };
    std::set<std::tuple<double, double, double>> all, kept;
    for (const auto& p : map.points) all.insert(cell(p));
    for (const auto& p : ds.points) EXPECT_TRUE(kept.insert(cell(p)).second);
    EXPECT_EQ(all, kept);
    // the representative is the earliest point of its cell
    for (const auto& r : ds.points)
      for (const auto& p : map.points) {
        if (cell(p) != cell(r)) continue;
        EXPECT_EQ(p, r);
        break;
      }
    EXPECT_EQ(voxelDownsample(ds, leaf).points, ds.points);
  }
  EXPECT_EQ(voxelDownsample(map, 0.0).points, map.points);
}

TEST(MapOps, ExportRoundTrip) {
  std::mt19937_64 rng(8);
  const Fixture f = randomFixture(rng, 4);
  const GlobalMap map = aggregateMap(f.scans, f.poses, f.labels);
  const auto dir = std::filesystem::temp_directory_path() / "seqmos_mapops_export";
  std::filesystem::create_directories(dir);
  exportMap(map, dir / "map");
  const RawScan back = io::readScan(dir / "map.bin");
  const MotionLabels labels = io::decodePredictions(io::readLabels(dir / "map.label"));
  ASSERT_EQ(back.size(), map.size());
  ASSERT_EQ(labels.size(), map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    EXPECT_NEAR(back.points[i].x, map.points[i].world.x, 1e-5 * (1.0 + std::abs(map.points[i].world.x)));
    EXPECT_EQ(labels[i], map.points[i].label);
  }
  std::filesystem::remove_all(dir);
}

TEST(MapOps, SynthStaticPointsAgreeInWorldFrame) {
  const synth::SynthSequence seq = synth::generateSequence(synth::benchmarkScene(21), 10);
  const GlobalMap map = aggregateMap(seq.scans, seq.world_poses, seq.labels);
  std::size_t checked = 0;
  for (const MapPoint& p : map.points) {
    const synth::HitInfo& h = seq.hits[p.frame][p.index];
    if (h.kind == synth::HitKind::Actor) continue;
    ASSERT_NEAR(p.world.x, h.world.x(), 1e-6);
    ASSERT_NEAR(p.world.y, h.world.y(), 1e-6);
    ASSERT_NEAR(p.world.z, h.world.z(), 1e-6);
    ++checked;
  }
  EXPECT_GT(checked, 1000u);
}
