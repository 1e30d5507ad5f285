// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "seqmos/kitti_io.hpp"

namespace fs = std::filesystem;
using namespace seqmos;

namespace {

fs::path scratchDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("seqmos_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void writeRaw(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace

TEST(KittiIo, ScanRoundTripIsExactForFloat32Values) {
  const fs::path dir = scratchDir("scan");
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> coord(-80.0f, 80.0f);
  std::uniform_real_distribution<float> refl(0.0f, 1.0f);
  std::uniform_int_distribution<int> count(0, 500);
  for (int trial = 0; trial < 100; ++trial) {
    RawScan scan;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) scan.points.push_back({coord(rng), coord(rng), coord(rng), refl(rng)});
    const fs::path p = dir / "s.bin";
    io::writeScan(p, scan);
    EXPECT_EQ(fs::file_size(p), static_cast<std::uintmax_t>(16 * n));
    const RawScan back = io::readScan(p, 4);
    ASSERT_EQ(back.size(), scan.size());
    EXPECT_EQ(back.frame_index, 4u);
    for (int i = 0; i < n; ++i) EXPECT_EQ(back.points[i], scan.points[i]) << "trial " << trial << " point " << i;
  }
}

TEST(KittiIo, EmptyScanFileGivesEmptyScan) {
  const fs::path p = scratchDir("empty") / "e.bin";
  writeRaw(p, "");
  EXPECT_TRUE(io::readScan(p).empty());
}

TEST(KittiIo, ScanSizeNotMultipleOf16IsMalformed) {
  const fs::path p = scratchDir("odd") / "o.bin";
  writeRaw(p, std::string(17, '\0'));
  try {
    io::readScan(p);
    FAIL() << "expected MalformedFile";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MalformedFile);
  }
}

TEST(KittiIo, NonFiniteScanValueIsRejected) {
  const fs::path p = scratchDir("nan") / "n.bin";
  RawScan scan;
  scan.points.push_back({1.0, std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0});
  io::writeScan(p, scan);
  try {
    io::readScan(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFiniteValue);
  }
}

TEST(KittiIo, MissingFileIsIoError) {
  try {
    io::readScan("/nonexistent/seqmos/000000.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IoError);
  }
}

TEST(KittiIo, LabelRoundTripAndBitSplit) {
  const fs::path p = scratchDir("labels") / "l.label";
  std::mt19937 rng(3);
  io::LabelSet labels;
  for (int i = 0; i < 1000; ++i) labels.labels.push_back(rng());
  io::writeLabels(p, labels);
  const io::LabelSet back = io::readLabels(p);
  ASSERT_EQ(back.labels, labels.labels);
  EXPECT_EQ(io::LabelSet::semantic(0x00070FC0u), 0x0FC0);
  EXPECT_EQ(io::LabelSet::instance(0x00070FC0u), 7);
}

TEST(KittiIo, LabelSizeNotMultipleOf4IsMalformed) {
  const fs::path p = scratchDir("badlabel") / "b.label";
  writeRaw(p, "abcdef");
  EXPECT_THROW(io::readLabels(p), Error);
}

TEST(KittiIo, PoseParserAgreesWithSscanfOracle) {
  const fs::path dir = scratchDir("poses");
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(-3.0, 3.0), tr(-500.0, 500.0);
  std::vector<PoseSE3> poses;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Matrix3d r = (Eigen::AngleAxisd(ang(rng), Eigen::Vector3d::UnitZ()) *
                               Eigen::AngleAxisd(ang(rng), Eigen::Vector3d::UnitY()) *
                               Eigen::AngleAxisd(ang(rng), Eigen::Vector3d::UnitX()))
                                  .toRotationMatrix();
    poses.emplace_back(r, Eigen::Vector3d(tr(rng), tr(rng), tr(rng)));
  }
  const fs::path p = dir / "poses.txt";
  io::writePoses(p, poses);
  const auto parsed = io::readPoses(p);
  const auto expected = oracle::parsePoses(p.string());
  ASSERT_EQ(parsed.size(), expected.size());
  for (std::size_t k = 0; k < parsed.size(); ++k)
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) EXPECT_EQ(parsed[k].matrix()(r, c), expected[k][r][c]);
}

TEST(KittiIo, PoseFileSkipsBlankLinesAndRejectsShortLines) {
  const fs::path dir = scratchDir("posefmt");
  writeRaw(dir / "ok.txt", "1 0 0 1 0 1 0 2 0 0 1 3\n\n  \n1 0 0 0 0 1 0 0 0 0 1 0\n");
  const auto poses = io::readPoses(dir / "ok.txt");
  ASSERT_EQ(poses.size(), 2u);
  EXPECT_EQ(poses[0].translation(), Eigen::Vector3d(1, 2, 3));
  writeRaw(dir / "short.txt", "1 0 0 1 0 1 0 2 0 0 1\n");
  EXPECT_THROW(io::readPoses(dir / "short.txt"), Error);
  writeRaw(dir / "junk.txt", "1 0 0 1 0 1 0 2 0 0 1 x\n");
  EXPECT_THROW(io::readPoses(dir / "junk.txt"), Error);
}

TEST(KittiIo, SlightlyNonOrthonormalRotationIsProjected) {
  const fs::path dir = scratchDir("ortho");
  writeRaw(dir / "p.txt", "1.0000001 0 0 0 0 1 0 0 0 0 0.9999999 0\n");
  const auto poses = io::readPoses(dir / "p.txt");
  ASSERT_EQ(poses.size(), 1u);
  EXPECT_LT(PoseSE3::orthonormalityDefect(poses[0].rotation()), 1e-12);
}

TEST(KittiIo, CalibrationConjugatesPoses) {
  const fs::path dir = scratchDir("calib");
  const PoseSE3 tr = PoseSE3::fromYaw(0.3, Eigen::Vector3d(0.2, -0.1, 0.5));
  const std::vector<PoseSE3> cam{PoseSE3(), PoseSE3::fromYaw(-0.7, Eigen::Vector3d(3, 1, 0))};
  io::writePoses(dir / "poses.txt", cam);
  {
    std::ofstream c(dir / "calib.txt");
    c << "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nTr:";
    c << std::setprecision(17);
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 4; ++k) c << ' ' << tr.matrix()(r, k);
    c << '\n';
  }
  const auto lidar = io::readSequencePoses(dir / "poses.txt");
  ASSERT_EQ(lidar.size(), 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const Eigen::Matrix4d expect = tr.matrix().inverse() * cam[k].matrix() * tr.matrix();
    EXPECT_LT((lidar[k].matrix() - expect).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(KittiIo, SemanticToMotionMapping) {
  io::LabelSet labels;
  labels.labels = {0u, 1u, 10u, 252u | (5u << 16), 40u, 259u, 30u};
  const auto motion = io::mapSemanticToMotion(labels, io::SequenceConfig{});
  const MotionLabels expect{MotionLabel::Ignore, MotionLabel::Ignore, MotionLabel::Static, MotionLabel::Moving,
                            MotionLabel::Static, MotionLabel::Moving, MotionLabel::Static};
  EXPECT_EQ(motion, expect);
}

TEST(KittiIo, OverlappingClassSetsAreAConfigError) {
  io::SequenceConfig cfg;
  cfg.ignore_class_ids.insert(252);
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(KittiIo, PredictionEncodingRoundTrips) {
  const MotionLabels m{MotionLabel::Static, MotionLabel::Moving, MotionLabel::Ignore, MotionLabel::Moving};
  const io::LabelSet enc = io::encodePredictions(m);
  EXPECT_EQ(enc.labels, (std::vector<std::uint32_t>{0, 1, 255, 1}));
  EXPECT_EQ(io::decodePredictions(enc), m);
}

TEST(KittiIo, FrameNamesAndSortedListing) {
  EXPECT_EQ(io::frameName(42, ".bin"), "000042.bin");
  const fs::path dir = scratchDir("list");
  for (int i : {3, 0, 11}) writeRaw(dir / io::frameName(i, ".bin"), "");
  writeRaw(dir / "notes.txt", "x");
  const auto files = io::listFiles(dir, ".bin");
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "000000.bin");
  EXPECT_EQ(files[2].filename(), "000011.bin");
}

TEST(KittiIo, TimesRoundTrip) {
  const fs::path p = scratchDir("times") / "times.txt";
  const std::vector<double> t{0.0, 0.1036, 0.2071999, 1e5 + 0.25};
  io::writeTimes(p, t);
  EXPECT_EQ(io::readTimes(p), t);
}
