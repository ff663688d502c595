// Copyright 2026 The vbdiar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "vbdiar/overlap.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vbdiar/rng.hpp"

namespace vbdiar {
namespace {

using testing::KindOf;
using testing::TempDir;

double Logit(double p) { return std::log(p / (1.0 - p)); }

TEST(TrainLogReg, ConstantFeatureGivesTheLogOdds) {
  const Matrix x = Matrix::Zero(10, 1);
  const std::vector<int> y{1, 0, 0, 1, 0, 0, 1, 0, 0, 0};
  const auto m = TrainLogReg(x, y, 0.0);
  EXPECT_NEAR(m.bias, std::log(3.0 / 7.0), 1e-8);
}

TEST(TrainLogReg, BinaryFeatureMatchesCellFrequencies) {
  // Unregularized ML on a 0/1 feature reproduces the per-cell frequencies.
  Matrix x(12, 1);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) x(i, 0) = i < 5 ? 0.0 : 1.0;
  y = {1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0};
  const auto m = TrainLogReg(x, y, 0.0);
  EXPECT_NEAR(m.bias, Logit(1.0 / 5.0), 1e-7);
  EXPECT_NEAR(m.bias + m.weights(0), Logit(5.0 / 7.0), 1e-7);
}

TEST(TrainLogReg, RegularizedSolutionIsStationary) {
  Rng rng(3);
  Matrix x(200, 3);
  std::vector<int> y(200);
  for (Eigen::Index i = 0; i < 200; ++i) {
    x.row(i) << rng.Normal(), rng.Normal(), rng.Normal();
    y[static_cast<std::size_t>(i)] = x(i, 0) - 0.5 * x(i, 2) > 0.0 ? 1 : 0;
  }
  const double l2 = 1.0;
  const auto m = TrainLogReg(x, y, l2);
  Vector grad_w = l2 * m.weights;
  double grad_b = 0.0;
  int correct = 0;
  for (Eigen::Index i = 0; i < 200; ++i) {
    const double p = m.Probability(x.row(i).transpose());
    const double r = p - y[static_cast<std::size_t>(i)];
    grad_w += r * x.row(i).transpose();
    grad_b += r;
    correct += (p > 0.5) == (y[static_cast<std::size_t>(i)] == 1);
  }
  EXPECT_LT(grad_w.norm(), 1e-6);
  EXPECT_LT(std::abs(grad_b), 1e-6);
  EXPECT_GE(correct, 190);
}

TEST(TrainLogReg, HeavyPenaltyShrinksWeights) {
  Rng rng(4);
  Matrix x(100, 2);
  std::vector<int> y(100);
  for (Eigen::Index i = 0; i < 100; ++i) {
    x.row(i) << rng.Normal(), rng.Normal();
    y[static_cast<std::size_t>(i)] = i % 4 == 0 ? 1 : 0;
  }
  const auto m = TrainLogReg(x, y, 1e9);
  EXPECT_LT(m.weights.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(m.bias, std::log(25.0 / 75.0), 1e-4);
}

TEST(TrainLogReg, Errors) {
  EXPECT_EQ(KindOf([] { TrainLogReg(Matrix::Zero(3, 1), {0, 0, 0}, 1.0); }), ErrorKind::kTraining);
  EXPECT_EQ(KindOf([] { TrainLogReg(Matrix::Zero(3, 1), {0, 1, 2}, 1.0); }), ErrorKind::kFormat);
  EXPECT_EQ(KindOf([] { TrainLogReg(Matrix::Zero(3, 1), {0, 1}, 1.0); }), ErrorKind::kDimension);
  EXPECT_EQ(KindOf([] { TrainLogReg(Matrix::Zero(2, 1), {0, 1}, -1.0); }), ErrorKind::kConfig);
}

TEST(DetectOverlap, StrictThreshold) {
  const LogRegModel m{(Vector(1) << 1.0).finished(), 0.0};
  Matrix x(3, 1);
  x << -1.0, 0.0, 2.0;
  EXPECT_EQ(DetectOverlap(m, x, 0.5), (std::vector<bool>{false, false, true}));
  EXPECT_EQ(DetectOverlap(m, x, 0.2), (std::vector<bool>{true, true, true}));
  EXPECT_EQ(KindOf([&] { DetectOverlap(m, Matrix::Zero(2, 2), 0.5); }), ErrorKind::kDimension);
}

TEST(OverlapTrainingLabels, MajorityCoverage) {
  const DiarizationHypothesis ref{"r", {{0.0, 2.0, "a"}, {1.4, 2.0, "b"}}};
  // Overlap is [1.4, 2.0].
  const std::vector<TimeSpan> spans{{0.0, 1.0}, {1.0, 1.0}, {1.3, 1.0}, {1.5, 0.4}, {2.5, 1.0}};
  EXPECT_EQ(OverlapTrainingLabels(spans, ref), (std::vector<int>{0, 1, 1, 1, 0}));
  const std::vector<TimeSpan> half{{1.5, 1.0}};
  EXPECT_EQ(OverlapTrainingLabels(half, ref), (std::vector<int>{0}));
}

TEST(AssignTwoClosest, NearestOtherSpeaker) {
  const DiarizationHypothesis hyp{"r", {{0.0, 2.0, "A"}, {2.0, 2.0, "B"}, {10.0, 1.0, "C"}}};
  const auto r = AssignTwoClosest(hyp, {{1.5, 2.5}}, 0.1);
  ASSERT_EQ(r.added.size(), 2u);
  EXPECT_NEAR(r.added[0].onset, 1.5, 1e-9);
  EXPECT_NEAR(r.added[0].duration, 0.5, 1e-9);
  EXPECT_EQ(r.added[0].speaker, "B");
  EXPECT_NEAR(r.added[1].onset, 2.0, 1e-9);
  EXPECT_NEAR(r.added[1].duration, 0.5, 1e-9);
  EXPECT_EQ(r.added[1].speaker, "A");
  EXPECT_EQ(r.hypothesis.segments.size(), 5u);
  EXPECT_EQ(r.skipped_regions, 0);
}

TEST(AssignTwoClosest, TiesGoToTheSmallerLabel) {
  const DiarizationHypothesis hyp{"r", {{2.0, 2.0, "M"}, {0.0, 1.0, "Z"}, {5.0, 1.0, "B"}}};
  const auto r = AssignTwoClosest(hyp, {{2.9, 3.1}}, 0.2);
  ASSERT_EQ(r.added.size(), 1u);
  EXPECT_EQ(r.added[0].speaker, "B");
}

TEST(AssignTwoClosest, SingleSpeakerAndGapsAddNothing) {
  const DiarizationHypothesis one{"r", {{0.0, 3.0, "A"}}};
  const auto r = AssignTwoClosest(one, {{1.0, 2.0}}, 0.1);
  EXPECT_TRUE(r.added.empty());
  EXPECT_EQ(r.skipped_regions, 1);
  const DiarizationHypothesis two{"r", {{0.0, 1.0, "A"}, {3.0, 1.0, "B"}}};
  EXPECT_TRUE(AssignTwoClosest(two, {{1.2, 2.8}}, 0.1).added.empty());
}

TEST(AssignTwoClosest, AddedSegmentsStayInsideRegionsAndDifferFromTheActiveSpeaker) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    DiarizationHypothesis hyp{"r", {}};
    double t = 0.0;
    const char *names[] = {"a", "b", "c"};
    while (t < 20.0) {
      const double d = 0.3 + 2.0 * rng.Uniform();
      hyp.segments.push_back({t, d, names[rng.Below(3)]});
      t += d + (rng.Uniform() < 0.3 ? rng.Uniform() : 0.0);
    }
    std::vector<SpeechRegion> regions;
    for (double s = 0.5; s < 19.0; s += 3.0 + rng.Uniform()) regions.push_back({s, s + 0.2 + rng.Uniform()});
    const auto r = AssignTwoClosest(hyp, regions, 0.01);
    for (const auto &a : r.added) {
      const bool inside = std::any_of(regions.begin(), regions.end(), [&](const SpeechRegion &g) {
        return a.onset >= g.onset - 1e-9 && a.end() <= g.offset + 1e-9;
      });
      EXPECT_TRUE(inside);
      const double mid = a.onset + 0.5 * a.duration;
      for (const auto &s : hyp.segments) {
        if (s.onset <= mid && mid < s.end() && s.onset <= a.onset + 1e-9 && a.end() <= s.end() + 1e-9) {
          EXPECT_NE(s.speaker, a.speaker);
        }
      }
    }
  }
}

TEST(FlaggedRegions, OwnedSpansOfFlaggedWindows) {
  const std::vector<TimeSpan> spans{{0.0, 1.5}, {0.25, 1.5}, {0.5, 1.5}, {0.75, 1.5}};
  const auto regions = FlaggedRegions(spans, {false, true, true, false});
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_NEAR(regions[0].onset, 0.875, 1e-12);
  EXPECT_NEAR(regions[0].offset, 1.375, 1e-12);
  EXPECT_TRUE(FlaggedRegions(spans, {false, false, false, false}).empty());
  EXPECT_EQ(KindOf([&] { FlaggedRegions(spans, {true}); }), ErrorKind::kDimension);
}

TEST(LogRegFile, RoundTrip) {
  TempDir dir;
  const LogRegModel m{(Vector(3) << 0.1, -2.5, 1e-17).finished(), -0.3};
  SaveLogReg(m, dir.File("o.csv"));
  const auto back = LoadLogReg(dir.File("o.csv"));
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.weights, m.weights);
  dir.Write("bad.csv", "1\n");
  EXPECT_EQ(KindOf([&] { LoadLogReg(dir.File("bad.csv")); }), ErrorKind::kFormat);
}

}  // namespace
}  // namespace vbdiar
