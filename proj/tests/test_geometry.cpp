// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "seqmos/geometry.hpp"

using namespace seqmos;

namespace {

PoseSE3 randomPose(std::mt19937_64& rng, double span = 10.0) {
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi), tr(-span, span);
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(ang(rng), Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(ang(rng) / 2, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(ang(rng), Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  return PoseSE3(nearestRotation(r), Eigen::Vector3d(tr(rng), tr(rng), tr(rng)));
}

oracle::Mat4 toMat(const PoseSE3& p) {
  oracle::Mat4 m{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[r][c] = p.matrix()(r, c);
  return m;
}

double maxAbsDiff(const PoseSE3& a, const oracle::Mat4& b) {
  double d = 0.0;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) d = std::max(d, std::abs(a.matrix()(r, c) - b[r][c]));
  return d;
}

}  // namespace

TEST(Geometry, ComposeRelativeMatchesMatrixProductOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t len = 1 + rng() % 12;
    std::vector<PoseSE3> chain;
    std::vector<oracle::Mat4> mats;
    for (std::size_t i = 0; i < len; ++i) {
      chain.push_back(randomPose(rng, 2.0));
      mats.push_back(toMat(chain.back()));
    }
    const std::size_t m = rng() % (len + 1);
    const std::size_t n = rng() % (m + 1);
    const PoseSE3 got = composeRelative(chain, m, n);
    EXPECT_LT(maxAbsDiff(got, oracle::chainProduct(mats, m, n)), 1e-12) << "m=" << m << " n=" << n;
  }
}

TEST(Geometry, ComposeRelativeEdgeCases) {
  std::mt19937_64 rng(5);
  std::vector<PoseSE3> chain{randomPose(rng), randomPose(rng), randomPose(rng)};
  EXPECT_EQ(composeRelative(chain, 2, 2).matrix(), Eigen::Matrix4d::Identity());
  EXPECT_EQ(composeRelative(chain, 2, 1).matrix(), chain[1].matrix());
  EXPECT_THROW(composeRelative(chain, 1, 2), Error);
  EXPECT_THROW(composeRelative(chain, 4, 0), Error);
  EXPECT_EQ(composeRelative({}, 0, 0).matrix(), Eigen::Matrix4d::Identity());
}

TEST(Geometry, ComposeIsAssociativeOverSplits) {
  std::mt19937_64 rng(8);
  std::vector<PoseSE3> chain;
  for (int i = 0; i < 9; ++i) chain.push_back(randomPose(rng, 3.0));
  for (std::size_t n = 0; n <= 9; ++n)
    for (std::size_t j = n; j <= 9; ++j)
      for (std::size_t m = j; m <= 9; ++m) {
        const Eigen::Matrix4d whole = composeRelative(chain, m, n).matrix();
        const Eigen::Matrix4d split = (composeRelative(chain, j, n) * composeRelative(chain, m, j)).matrix();
        EXPECT_LT((whole - split).cwiseAbs().maxCoeff(), 1e-12);
      }
}

TEST(Geometry, TransformInverseRoundTrip) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> coord(-100.0, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const PoseSE3 t = randomPose(rng, 50.0);
    RawScan scan;
    for (int i = 0; i < 200; ++i) scan.points.push_back({coord(rng), coord(rng), coord(rng), 0.5});
    const RawScan back = transformScan(transformScan(scan, t), t.inverse());
    for (std::size_t i = 0; i < scan.size(); ++i) {
      EXPECT_NEAR(back.points[i].x, scan.points[i].x, 1e-9);
      EXPECT_NEAR(back.points[i].y, scan.points[i].y, 1e-9);
      EXPECT_NEAR(back.points[i].z, scan.points[i].z, 1e-9);
      EXPECT_EQ(back.points[i].intensity, scan.points[i].intensity);
    }
    EXPECT_LT(((t * t.inverse()).matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Geometry, TransformMatchesHomogeneousProduct) {
  std::mt19937_64 rng(17);
  const PoseSE3 t = randomPose(rng);
  RawScan scan;
  scan.points.push_back({1.5, -2.0, 0.25, 0.0});
  const Point q = transformScan(scan, t).points[0];
  const Eigen::Vector4d h = t.matrix() * Eigen::Vector4d(1.5, -2.0, 0.25, 1.0);
  EXPECT_NEAR(q.x, h.x(), 1e-12);
  EXPECT_NEAR(q.y, h.y(), 1e-12);
  EXPECT_NEAR(q.z, h.z(), 1e-12);
}

TEST(Geometry, InvalidPosesAreRejected) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = 2.0;
  EXPECT_THROW(PoseSE3{m}, Error);
  m = Eigen::Matrix4d::Identity();
  m(3, 0) = 1.0;
  EXPECT_THROW(PoseSE3{m}, Error);
  m = Eigen::Matrix4d::Identity();
  m(0, 3) = std::numeric_limits<double>::infinity();
  try {
    PoseSE3 p(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
  }
  m = Eigen::Matrix4d::Identity();
  m(2, 2) = -1.0;  // reflection
  EXPECT_THROW(PoseSE3{m}, Error);
}

TEST(Geometry, RelativeFromWorldRechainsToWorld) {
  std::mt19937_64 rng(23);
  std::vector<PoseSE3> world;
  for (int i = 0; i < 30; ++i) world.push_back(randomPose(rng, 20.0));
  const auto rel = relativeFromWorld(world);
  ASSERT_EQ(rel.size(), world.size());
  EXPECT_EQ(rel[0].matrix(), Eigen::Matrix4d::Identity());
  const std::span<const PoseSE3> chain = std::span<const PoseSE3>(rel).subspan(1);
  for (std::size_t k = 0; k < world.size(); ++k) {
    const PoseSE3 w = world[0] * composeRelative(chain, k, 0);
    EXPECT_LT((w.matrix() - world[k].matrix()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Geometry, NearestRotationIsProper) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix3d m;
    for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = g(rng);
    const Eigen::Matrix3d r = nearestRotation(m);
    EXPECT_LT(PoseSE3::orthonormalityDefect(r), 1e-12);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  }
}
