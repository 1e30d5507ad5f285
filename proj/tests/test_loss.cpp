// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include "grad_helpers.hpp"
#include "oracles.hpp"
#include "seqmos/loss.hpp"

using namespace seqmos;
using seqmos::nn::Param;
using seqmos::nn::Rng;

TEST(Lovasz, ExhaustiveSmallInstancesMatchExtensionOracle) {
  // Every instance of 1..6 elements, 2 classes, with the moving-class
  // probability on {0, 1/3, 1/2, 1} and targets in {static, moving, ignore}.
  const double grid[4] = {0.0, 1.0 / 3.0, 0.5, 1.0};
  std::size_t instances = 0;
  double worst = 0.0;
  for (int n = 1; n <= 6; ++n) {
    int prob_combos = 1, target_combos = 1;
    for (int i = 0; i < n; ++i) {
      prob_combos *= 4;
      target_combos *= 3;
    }
    for (int pc = 0; pc < prob_combos; ++pc) {
      RowMatrix<double> probs(n, 2);
      std::vector<std::vector<double>> probs_o(n, std::vector<double>(2));
      int code = pc;
      for (int i = 0; i < n; ++i, code /= 4) {
        const double p1 = grid[code % 4];
        probs(i, 0) = 1.0 - p1;
        probs(i, 1) = p1;
        probs_o[i] = {1.0 - p1, p1};
      }
      for (int tc = 0; tc < target_combos; ++tc) {
        Targets t(n);
        int tcode = tc;
        bool any = false;
        for (int i = 0; i < n; ++i, tcode /= 3) {
          const int v = tcode % 3;
          t[i] = v == 2 ? kIgnoreTarget : v;
          any = any || v != 2;
        }
        if (!any) {
          EXPECT_THROW(lovaszSoftmax(probs, t), Error);
          continue;
        }
        const double got = lovaszSoftmax(probs, t).value;
        const double expect = oracle::lovaszSoftmax(probs_o, t);
        worst = std::max(worst, std::abs(got - expect));
        ASSERT_NEAR(got, expect, 1e-10) << "n=" << n << " pc=" << pc << " tc=" << tc;
        ++instances;
      }
    }
  }
  EXPECT_GT(instances, 100000u);
  EXPECT_LT(worst, 1e-10);
}

TEST(Lovasz, PerfectPredictionIsZeroAndWorstIsOne) {
  RowMatrix<double> probs(4, 2);
  probs << 1, 0, 0, 1, 1, 0, 0, 1;
  const Targets t{0, 1, 0, 1};
  EXPECT_EQ(lovaszSoftmax(probs, t).value, 0.0);
  const Targets flipped{1, 0, 1, 0};
  EXPECT_NEAR(lovaszSoftmax(probs, flipped).value, 1.0, 1e-15);
}

TEST(Lovasz, GradMatchesJaccardDifferences) {
  // g_i = J(first i+1 errors) - J(first i errors) for the sorted mistake prefixes.
  const std::vector<int> fg{1, 0, 0, 1, 1, 0};
  const auto g = lovaszGrad(fg);
  std::vector<bool> gt(fg.begin(), fg.end());
  double prev = 0.0;
  for (std::size_t i = 0; i < fg.size(); ++i) {
    std::vector<bool> s(fg.size(), false);
    for (std::size_t j = 0; j <= i; ++j) s[j] = true;
    const double j = oracle::jaccardLoss(s, gt);
    EXPECT_NEAR(g[i], j - prev, 1e-15);
    prev = j;
  }
}

TEST(LossGradients, LovaszThroughSoftmax) {
  Rng rng(3);
  Param<double> logits = testutil::asParam("logits", testutil::randomMatrix(9, 2, rng));
  const Targets t{0, 1, 1, kIgnoreTarget, 0, 0, 1, 0, 1};
  auto loss = [&] { return lovaszSoftmax(softmaxRows(logits.value), t).value; };
  auto grads = [&] {
    const RowMatrix<double> p = softmaxRows(logits.value);
    logits.grad = softmaxBackward(p, lovaszSoftmax(p, t).grad);
  };
  const auto r = nn::finiteDiffGradcheck(loss, grads, {&logits});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(LossGradients, WeightedCrossEntropy) {
  Rng rng(4);
  Param<double> logits = testutil::asParam("logits", testutil::randomMatrix(12, 3, rng));
  const Targets t{0, 1, 2, kIgnoreTarget, 2, 1, 0, 0, kIgnoreTarget, 1, 2, 2};
  const std::vector<double> w{0.5, 2.0, 1.5};
  auto loss = [&] { return weightedCrossEntropy(logits.value, t, w).value; };
  auto grads = [&] { logits.grad = weightedCrossEntropy(logits.value, t, w).grad; };
  const auto r = nn::finiteDiffGradcheck(loss, grads, {&logits});
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(LossGradients, TotalLoss) {
  Rng rng(5);
  const Dims3 d{4, 4, 2};
  Param<double> vox = testutil::asParam("voxel_logits", testutil::randomMatrix(2, d.volume(), rng));
  Param<double> pts = testutil::asParam("point_logits", testutil::randomMatrix(10, 2, rng));
  Targets vt(static_cast<std::size_t>(d.volume()));
  for (std::size_t i = 0; i < vt.size(); ++i) vt[i] = i % 5 == 0 ? kIgnoreTarget : static_cast<int>(rng.below(2));
  Targets pt(10);
  for (auto& v : pt) v = static_cast<int>(rng.below(2));
  LossConfig cfg;
  cfg.alpha = 0.7;
  cfg.beta = 1.3;
  cfg.class_weights = {0.6, 3.0};
  auto eval = [&] {
    Tensor4<double> v(2, d);
    v.mat() = vox.value;
    return totalLoss(v, vt, pts.value, pt, cfg);
  };
  auto loss = [&] { return eval().total; };
  auto grads = [&] {
    const auto l = eval();
    vox.grad = l.d_voxel_logits.mat();
    pts.grad = l.d_point_logits;
  };
  const auto r = nn::finiteDiffGradcheck(loss, grads, {&vox, &pts});
  EXPECT_TRUE(r.passed) << r.max_rel_error << " " << r.worst_param;
}

TEST(CrossEntropy, HandComputedValue) {
  RowMatrix<double> logits(2, 2);
  logits << 0.0, std::log(3.0), 2.0, 2.0;
  const Targets t{1, 0};
  const auto l = weightedCrossEntropy(logits, t, {1.0, 2.0});
  // -log(3/4) with weight 2 and -log(1/2) with weight 1, averaged over 2
  EXPECT_NEAR(l.value, (2.0 * -std::log(0.75) + -std::log(0.5)) / 2.0, 1e-15);
}

TEST(CrossEntropy, ErrorsAndIgnore) {
  RowMatrix<double> logits(2, 2);
  logits.setZero();
  EXPECT_THROW(weightedCrossEntropy(logits, {kIgnoreTarget, kIgnoreTarget}, {1.0, 1.0}), Error);
  EXPECT_THROW(weightedCrossEntropy(logits, {0}, {1.0, 1.0}), Error);
  EXPECT_THROW(weightedCrossEntropy(logits, {0, 3}, {1.0, 1.0}), Error);
  const auto l = weightedCrossEntropy(logits, {0, kIgnoreTarget}, {1.0, 1.0});
  EXPECT_NEAR(l.value, std::log(2.0), 1e-15);
  EXPECT_EQ(l.grad(1, 0), 0.0);
}

TEST(ClassWeights, InverseFrequencyClamped) {
  const auto w = inverseFrequencyWeights({900, 100});
  EXPECT_NEAR(w[0], 1000.0 / 900.0, 1e-15);
  EXPECT_NEAR(w[1], 10.0, 1e-15);
  const auto w2 = inverseFrequencyWeights({5000, 1});
  EXPECT_EQ(w2[1], 10.0);
  const auto w3 = inverseFrequencyWeights({10, 0});
  EXPECT_EQ(w3[1], 10.0);
}

TEST(VoxelTargets, MajorityVote) {
  CylindricalGridSpec g;
  g.bins = {2, 2, 2};
  g.rho_max = 4.0;
  g.z_min = -1.0;
  g.z_max = 1.0;
  RawScan s;
  for (int i = 0; i < 5; ++i) s.points.push_back({1.0, 0.1, 0.5, 0.0});  // one voxel
  s.points.push_back({3.0, 0.1, 0.5, 0.0});                               // second voxel
  s.points.push_back({3.0, 0.1, 0.5, 0.0});
  s.points.push_back({30.0, 0.0, 0.0, 0.0});  // out of range
  const PointVoxelMapping m = assignVoxels(s, g);
  const MotionLabels labels{MotionLabel::Moving, MotionLabel::Moving, MotionLabel::Static, MotionLabel::Ignore,
                            MotionLabel::Ignore, MotionLabel::Static, MotionLabel::Moving, MotionLabel::Moving};
  const Targets t = voxelTargets(m, labels);
  EXPECT_EQ(t[static_cast<std::size_t>(m.flat[0])], 1);
  EXPECT_EQ(t[static_cast<std::size_t>(m.flat[5])], kIgnoreTarget);  // tie
  const int occupied = static_cast<int>(std::count_if(t.begin(), t.end(), [](int v) { return v != kIgnoreTarget; }));
  EXPECT_EQ(occupied, 1);
}
