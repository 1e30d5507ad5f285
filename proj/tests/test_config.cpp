// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "seqmos/settings.hpp"

using namespace seqmos;

namespace {

ErrorKind kindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;  // sentinel: nothing thrown
}

}  // namespace

TEST(Config, DefaultsBuildValidOptions) {
  const RunConfig cfg;
  const CylindricalGridSpec g = gridFromConfig(cfg);
  EXPECT_EQ(g.bins.h, 16);
  EXPECT_EQ(g.bins.w, 32);
  EXPECT_EQ(g.bins.l, 8);
  EXPECT_EQ(modelFromConfig(cfg).residual_frames, 3);
  EXPECT_TRUE(autoClassWeights(cfg));
  EXPECT_EQ(trainFromConfig(cfg).epochs, 12);
  EXPECT_EQ(loopFromConfig(cfg).sectors, 60);
  EXPECT_DOUBLE_EQ(baselineFromConfig(cfg).distance_threshold, 0.5);
  EXPECT_EQ(odomFromConfig(cfg).iterations, 30);
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const RunConfig cfg = RunConfig::fromText(
      "# comment\n"
      "  seed = 42   # trailing\n"
      "\n"
      "model.channels=8, 8,12 ,12\n"
      "loss.class_weights = 1,4\n"
      "train.shuffle = no\n");
  EXPECT_EQ(cfg.integer("seed"), 42);
  EXPECT_EQ(cfg.integers("model.channels"), (std::vector<long>{8, 8, 12, 12}));
  EXPECT_FALSE(cfg.boolean("train.shuffle"));
  EXPECT_EQ(lossFromConfig(cfg).class_weights, (std::vector<double>{1.0, 4.0}));
  EXPECT_EQ(modelFromConfig(cfg).seed, 42u);
}

TEST(Config, UnknownKeysAreErrors) {
  EXPECT_EQ(kindOf([] { RunConfig::fromText("grid.hh = 3\n"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([] { RunConfig().set("nope", "1"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([] { RunConfig::fromText("seed 3\n"); }), ErrorKind::ConfigError);
}

TEST(Config, BadValuesAreErrors) {
  auto with = [](const std::string& text) { return RunConfig::fromText(text); };
  EXPECT_EQ(kindOf([&] { with("seed = 3x").integer("seed"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { with("train.lr = fast").num("train.lr"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { with("train.shuffle = maybe").boolean("train.shuffle"); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { modelFromConfig(with("model.channels = 4,4")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { lossFromConfig(with("loss.class_weights = 1")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { trainFromConfig(with("train.frame_stride = 0")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { adamFromConfig(with("train.beta1 = 1")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { baselineFromConfig(with("baseline.distance_threshold = -1")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { loopFromConfig(with("loop.sectors = 0")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { odomFromConfig(with("odom.subsample = 0")); }), ErrorKind::ConfigError);
  EXPECT_EQ(kindOf([&] { odomFromConfig(with("odom.yaw_prior = -0.1")); }), ErrorKind::ConfigError);
}

TEST(Config, DumpRoundTrips) {
  RunConfig cfg;
  cfg.set("seed", "9");
  cfg.set("grid.h", "12");
  const RunConfig back = RunConfig::fromText(cfg.dump());
  EXPECT_EQ(back.dump(), cfg.dump());
  EXPECT_EQ(cfg.dump().find("# "), std::string::npos);
  const std::string commented = cfg.dump("# ");
  EXPECT_EQ(commented.rfind("# ", 0), 0u);
  // a commented dump parses to the defaults
  EXPECT_EQ(RunConfig::fromText(commented).dump(), RunConfig().dump());
}

TEST(Config, FileLoading) {
  const auto path = std::filesystem::temp_directory_path() / "seqmos_config_test.cfg";
  {
    std::ofstream out(path);
    out << "seed = 5\n";
  }
  EXPECT_EQ(RunConfig::fromFile(path).integer("seed"), 5);
  std::filesystem::remove(path);
  EXPECT_EQ(kindOf([&] { RunConfig::fromFile(path); }), ErrorKind::IoError);
}

TEST(Config, EveryKeyHasHelp) {
  std::set<std::string> names;
  for (const auto& k : configKeys()) {
    EXPECT_FALSE(k.help.empty()) << k.name;
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
  }
}
