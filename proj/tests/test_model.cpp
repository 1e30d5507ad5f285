// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

#include "grad_helpers.hpp"
#include "seqmos/loss.hpp"
#include "seqmos/nn/checkpoint.hpp"
#include "seqmos/nn/model.hpp"
#include "seqmos/nn/optim.hpp"

using namespace seqmos;
using namespace seqmos::nn;

namespace {

ModelConfig toyConfig(int k) {
  ModelConfig c;
  c.point_feature_dim = 3;
  c.mlp_hidden = {4};
  c.channels = {3, 3, 4, 4};
  c.refine_hidden = 4;
  c.residual_frames = k;
  c.leaky_slope = 0.1;
  c.seed = 5;
  return c;
}

CylindricalGridSpec toyGrid() {
  CylindricalGridSpec g;
  g.bins = {8, 8, 8};
  g.rho_min = 0.0;
  g.rho_max = 8.0;
  g.z_min = -2.0;
  g.z_max = 2.0;
  return g;
}

ResidualStack toyStack(int k, Rng& rng, int n = 40) {
  auto scan = [&] {
    RawScan s;
    for (int i = 0; i < n; ++i)
      s.points.push_back({rng.uniform(-7, 7), rng.uniform(-7, 7), rng.uniform(-2, 2), rng.uniform01()});
    return s;
  };
  ResidualStack st;
  st.current = scan();
  for (int i = 1; i <= k; ++i) st.previous.push_back({static_cast<std::size_t>(i), scan()});
  return st;
}

}  // namespace

TEST(Model, EndToEndGradcheck) {
  Rng rng(99);
  Model<double> model(toyConfig(2));
  const ResidualStack stack = toyStack(2, rng);
  const ModelInput<double> in = prepareInput<double>(stack, toyGrid());
  Targets pt(stack.current.size());
  for (auto& t : pt) t = static_cast<int>(rng.below(2));
  MotionLabels labels;
  for (int t : pt) labels.push_back(t ? MotionLabel::Moving : MotionLabel::Static);
  const Targets vt = voxelTargets(in.mappings[0], labels);
  LossConfig cfg;
  cfg.class_weights = {1.0, 2.5};
  auto loss = [&] {
    const auto out = model.forward(in);
    return totalLoss(out.voxel_logits, vt, out.point_logits, pt, cfg).total;
  };
  auto grads = [&] {
    model.zeroGrad();
    const auto out = model.forward(in);
    const auto l = totalLoss(out.voxel_logits, vt, out.point_logits, pt, cfg);
    model.backward(l.d_voxel_logits, l.d_point_logits);
  };
  GradcheckOptions opt;
  opt.tolerance = 1e-4;
  opt.max_coords_per_param = 12;
  // Entries far below the loss scale are dominated by round-off in the
  // difference quotient, so relative error is measured against 1e-4.
  opt.denom_floor = 1e-4;
  const auto r = finiteDiffGradcheck(loss, grads, model.params(), opt);
  EXPECT_TRUE(r.passed) << "worst " << r.worst_param << " " << r.max_rel_error;
  EXPECT_GT(r.coords_checked, 300u);
}

TEST(Model, OutputShapes) {
  Rng rng(1);
  Model<float> model(toyConfig(3));
  const ResidualStack stack = toyStack(3, rng, 25);
  const auto in = prepareInput<float>(stack, toyGrid());
  const auto out = model.forward(in);
  EXPECT_EQ(out.voxel_logits.channels(), 2);
  EXPECT_EQ(out.voxel_logits.dims(), (Dims3{8, 8, 8}));
  EXPECT_EQ(out.point_logits.rows(), 25);
  EXPECT_EQ(out.point_logits.cols(), 2);
  EXPECT_TRUE(out.point_logits.allFinite());
}

TEST(Model, WrongFrameCountOrGridIsRejected) {
  Rng rng(2);
  Model<float> model(toyConfig(3));
  const auto in = prepareInput<float>(toyStack(2, rng), toyGrid());
  EXPECT_THROW(model.forward(in), Error);
  CylindricalGridSpec odd = toyGrid();
  odd.bins = {8, 12, 8};
  try {
    model.forward(prepareInput<float>(toyStack(3, rng), odd));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::OddDimension);
  }
}

TEST(Model, SameSeedSameWeightsAndOutputs) {
  Rng rng(3);
  const ResidualStack stack = toyStack(1, rng);
  Model<float> a(toyConfig(1)), b(toyConfig(1));
  const auto in = prepareInput<float>(stack, toyGrid());
  EXPECT_EQ(a.forward(in).point_logits, b.forward(in).point_logits);
  ModelConfig other = toyConfig(1);
  other.seed = 6;
  Model<float> c(other);
  EXPECT_NE(a.forward(in).point_logits, c.forward(in).point_logits);
}

TEST(Model, ResidualChannelsVanishForIdenticalFrames) {
  // With k copies of the current scan every residual grid is zero, so the
  // k = 2 model behaves like its current-frame stem slice alone.
  Rng rng(4);
  ResidualStack stack = toyStack(0, rng);
  stack.previous = {{1, stack.current}, {2, stack.current}};
  Model<double> model(toyConfig(2));
  const auto in = prepareInput<double>(stack, toyGrid());
  const auto base = model.forward(in);
  for (Param<double>* p : model.params())
    if (p->name == "stem.weight")
      p->value.rightCols(p->value.cols() - 3).setConstant(7.0);  // residual slots only
  EXPECT_EQ(model.forward(in).point_logits, base.point_logits);
}

TEST(Model, AdamStepReducesLossOnFixedSample) {
  Rng rng(5);
  Model<double> model(toyConfig(1));
  const ResidualStack stack = toyStack(1, rng, 60);
  const auto in = prepareInput<double>(stack, toyGrid());
  MotionLabels labels;
  for (std::size_t i = 0; i < stack.current.size(); ++i)
    labels.push_back(stack.current.points[i].x > 0 ? MotionLabel::Moving : MotionLabel::Static);
  const Targets vt = voxelTargets(in.mappings[0], labels), pt = targetsFromLabels(labels);
  AdamConfig ac;
  ac.lr = 1e-2;
  Adam<double> adam(model.params(), ac);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 30; ++it) {
    model.zeroGrad();
    const auto out = model.forward(in);
    const auto l = totalLoss(out.voxel_logits, vt, out.point_logits, pt, LossConfig{});
    if (it == 0) first = l.total;
    last = l.total;
    model.backward(l.d_voxel_logits, l.d_point_logits);
    adam.step();
  }
  EXPECT_LT(last, 0.7 * first);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(6);
  ModelConfig cfg = toyConfig(2);
  cfg.leaky_slope = 0.1234567890123;
  Model<float> model(cfg);
  for (Param<float>* p : model.params())
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += static_cast<float>(rng.normal() * 0.01);
  const auto path = std::filesystem::temp_directory_path() / "seqmos_ckpt_test.bin";
  saveCheckpoint(path, model);
  Model<float> back = loadCheckpoint<float>(path);
  EXPECT_EQ(back.config().describe(), model.config().describe());
  auto pa = model.params(), pb = back.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->name, pb[i]->name);
    EXPECT_EQ(pa[i]->value, pb[i]->value);
  }
  EXPECT_EQ(serializeCheckpoint(back), serializeCheckpoint(model));
  const auto in = prepareInput<float>(toyStack(2, rng), toyGrid());
  EXPECT_EQ(back.forward(in).point_logits, model.forward(in).point_logits);
}

TEST(Checkpoint, CorruptionIsDetected) {
  Model<float> model(toyConfig(1));
  const std::vector<char> good = serializeCheckpoint(model);
  auto expectMalformed = [](const std::vector<char>& bytes) {
    try {
      deserializeCheckpoint<float>(bytes);
      ADD_FAILURE() << "accepted corrupt checkpoint";
    } catch (const Error& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::MalformedFile || e.kind() == ErrorKind::ConfigError ||
                  e.kind() == ErrorKind::NonFiniteValue)
          << e.what();
    }
  };
  std::vector<char> bad = good;
  bad[0] = 'X';
  expectMalformed(bad);
  expectMalformed(std::vector<char>(good.begin(), good.end() - 3));
  bad = good;
  bad.push_back('\0');
  expectMalformed(bad);
  // NaN in the last stored value
  bad = good;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(bad.data() + bad.size() - 8, &nan, 8);
  expectMalformed(bad);
  EXPECT_THROW(loadCheckpoint<float>("/nonexistent/seqmos.ckpt"), Error);
}
