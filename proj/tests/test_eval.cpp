// seqmos - sequential LiDAR moving object segmentation toolkit
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"
#include "seqmos/eval.hpp"

using namespace seqmos;

namespace {

constexpr int kTrials = 1000;

MotionLabel fromInt(int v) { return v == 0 ? MotionLabel::Static : v == 1 ? MotionLabel::Moving : MotionLabel::Ignore; }

PoseSE3 randomPose(std::mt19937_64& rng, double span) {
  std::uniform_real_distribution<double> a(-std::numbers::pi, std::numbers::pi), t(-span, span);
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(a(rng), Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(a(rng), Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  return PoseSE3(nearestRotation(r), Eigen::Vector3d(t(rng), t(rng), t(rng)));
}

oracle::Mat4 toMat(const PoseSE3& p) {
  oracle::Mat4 m{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m[r][c] = p.matrix()(r, c);
  return m;
}

// Rigid inverse by transposition, written out.
oracle::Mat4 rigidInverse(const oracle::Mat4& m) {
  oracle::Mat4 out = oracle::identity4();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r][c] = m[c][r];
  for (int r = 0; r < 3; ++r) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s -= m[k][r] * m[k][3];
    out[r][3] = s;
  }
  return out;
}

double oracleAte(const std::vector<PoseSE3>& gt, const std::vector<PoseSE3>& est) {
  double sum = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const oracle::Mat4 e = oracle::matmul(rigidInverse(toMat(gt[i])), toMat(est[i]));
    sum += e[0][3] * e[0][3] + e[1][3] * e[1][3] + e[2][3] * e[2][3];
  }
  return std::sqrt(sum / static_cast<double>(gt.size()));
}

}  // namespace

TEST(Eval, IouAndMiouMatchNaiveCounts) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng() % 60;
    std::vector<int> p(n), t(n);
    MotionLabels pm(n), tm(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int pv = static_cast<int>(rng() % 5), tv = static_cast<int>(rng() % 5);
      p[i] = pv < 2 ? pv : pv == 4 ? 255 : pv - 2;
      t[i] = tv < 2 ? tv : tv == 4 ? 255 : tv - 2;
      pm[i] = fromInt(p[i]);
      tm[i] = fromInt(t[i]);
    }
    const oracle::Counts o = oracle::confusion(p, t);
    const ConfusionCounts c = confusion(pm, tm);
    double sum = 0.0;
    int classes = 0;
    for (int cls = 0; cls < 2; ++cls) {
      EXPECT_EQ(static_cast<long>(c.tp[cls]), o.tp[cls]);
      EXPECT_EQ(static_cast<long>(c.fp[cls]), o.fp[cls]);
      EXPECT_EQ(static_cast<long>(c.fn[cls]), o.fn[cls]);
      const long d = o.tp[cls] + o.fp[cls] + o.fn[cls];
      const double expect = d == 0 ? 1.0 : static_cast<double>(o.tp[cls]) / static_cast<double>(d);
      EXPECT_NEAR(iou(c, cls), expect, 1e-12);
      if (d) {
        sum += expect;
        ++classes;
      }
    }
    EXPECT_NEAR(miou(c), classes ? sum / classes : 1.0, 1e-12);
  }
}

TEST(Eval, PerfectPredictionScoresOne) {
  const MotionLabels l{MotionLabel::Static, MotionLabel::Moving, MotionLabel::Ignore};
  const ConfusionCounts c = confusion(l, l);
  EXPECT_EQ(movingIou(c), 1.0);
  EXPECT_EQ(miou(c), 1.0);
  EXPECT_EQ(formatPercent(0.749), "74.9");
  EXPECT_THROW(confusion(l, MotionLabels(2)), Error);
}

TEST(Eval, AteMatchesOracle) {
  std::mt19937_64 rng(103);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    std::vector<PoseSE3> gt, est;
    for (std::size_t i = 0; i < n; ++i) {
      gt.push_back(randomPose(rng, 50.0));
      est.push_back(randomPose(rng, 50.0));
    }
    EXPECT_NEAR(ate({gt, est}), oracleAte(gt, est), 1e-12);
  }
}

TEST(Eval, AteOfConstantOffsetIsExactlyFive) {
  std::vector<PoseSE3> gt(10), est;
  for (std::size_t i = 0; i < gt.size(); ++i) est.push_back(PoseSE3::fromTranslation(3.0, 4.0, 0.0));
  EXPECT_EQ(ate({gt, est}), 5.0);
  EXPECT_EQ(ate({gt, gt}), 0.0);
}

TEST(Eval, AteIsInvariantToCommonLeftTransform) {
  std::mt19937_64 rng(107);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<PoseSE3> gt, est;
    for (int i = 0; i < 15; ++i) {
      gt.push_back(randomPose(rng, 20.0));
      est.push_back(randomPose(rng, 20.0));
    }
    const PoseSE3 g = randomPose(rng, 20.0);
    std::vector<PoseSE3> gt2, est2;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      gt2.push_back(g * gt[i]);
      est2.push_back(g * est[i]);
    }
    EXPECT_NEAR(ate({gt, est}), ate({gt2, est2}), 1e-9);
  }
}

TEST(Eval, TrajectoryErrors) {
  std::vector<PoseSE3> a(3), b(2);
  try {
    ate({a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
  EXPECT_THROW(ate({{}, {}}), Error);
  EXPECT_THROW(drift({a, a}), Error);  // zero path length
}

TEST(Eval, DriftMatchesOracle) {
  std::mt19937_64 rng(109);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    std::vector<PoseSE3> gt, est;
    for (std::size_t i = 0; i < n; ++i) {
      gt.push_back(randomPose(rng, 30.0));
      est.push_back(randomPose(rng, 30.0));
    }
    double length = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const oracle::Mat4 a = toMat(gt[i]), b = toMat(gt[i - 1]);
      length += std::sqrt((a[0][3] - b[0][3]) * (a[0][3] - b[0][3]) + (a[1][3] - b[1][3]) * (a[1][3] - b[1][3]) +
                          (a[2][3] - b[2][3]) * (a[2][3] - b[2][3]));
    }
    const oracle::Mat4 e = oracle::matmul(rigidInverse(toMat(gt.back())), toMat(est.back()));
    const double de = std::sqrt(e[0][3] * e[0][3] + e[1][3] * e[1][3] + e[2][3] * e[2][3]);
    const Drift d = drift({gt, est});
    EXPECT_NEAR(d.path_length, length, 1e-12 * std::max(1.0, length));
    EXPECT_NEAR(d.de, de, 1e-12);
    EXPECT_NEAR(d.dr_percent, 100.0 * de / length, 1e-12);
  }
}

TEST(Eval, PrCurveAndF1MaxMatchThresholdSweep) {
  std::mt19937_64 rng(113);
  for (int trial = 0; trial < kTrials; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<double> scores(n);
    std::vector<bool> truth(n);
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % 12) / 11.0;  // plenty of ties
      truth[i] = rng() % 3 == 0;
      any = any || truth[i];
    }
    if (!any) {
      EXPECT_THROW(prCurve(scores, truth), Error);
      continue;
    }
    const PRCurve curve = prCurve(scores, truth);
    std::set<double> distinct(scores.begin(), scores.end());
    ASSERT_EQ(curve.size(), distinct.size());
    double best = 0.0;
    std::size_t k = 0;
    for (double tau : distinct) {
      const auto [p, r] = oracle::prAt(scores, truth, tau);
      EXPECT_EQ(curve[k].threshold, tau);
      EXPECT_NEAR(curve[k].precision, p, 1e-12);
      EXPECT_NEAR(curve[k].recall, r, 1e-12);
      best = std::max(best, p + r > 0 ? 2 * p * r / (p + r) : 0.0);
      ++k;
    }
    EXPECT_NEAR(f1Max(curve), best, 1e-12);
  }
}

TEST(Eval, PerfectSeparationGivesF1One) {
  const std::vector<double> s{0.9, 0.8, 0.2, 0.1};
  const std::vector<bool> t{true, true, false, false};
  EXPECT_EQ(f1Max(prCurve(s, t)), 1.0);
  std::ostringstream csv, plot;
  writePrCsv(csv, prCurve(s, t));
  writePrPlot(plot, prCurve(s, t));
  EXPECT_EQ(csv.str().substr(0, 27), "threshold,precision,recall,");
  EXPECT_EQ(plot.str()[0], '#');
}
