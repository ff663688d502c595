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


#include "vbdiar/transforms.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vbdiar/lda.hpp"
#include "vbdiar/rng.hpp"

namespace vbdiar {
namespace {

using testing::KindOf;

Matrix Gaussian(Rng &rng, Eigen::Index n, Eigen::Index d) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = rng.Normal();
  }
  return m;
}

Matrix MlCovariance(const Matrix &x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows());
}

Matrix RandomSpd(Rng &rng, Eigen::Index d, double ridge) {
  const Matrix a = Gaussian(rng, d, d);
  return a * a.transpose() + ridge * Matrix::Identity(d, d);
}

TEST(CenterWhiten, AlreadyWhiteIsIdentity) {
  const Eigen::Index d = 4;
  Matrix x(2 * d, d);
  x.setZero();
  for (Eigen::Index i = 0; i < d; ++i) {
    x(2 * i, i) = std::sqrt(static_cast<double>(d));
    x(2 * i + 1, i) = -std::sqrt(static_cast<double>(d));
  }
  const auto t = EstimateCenterWhiten(x);
  EXPECT_LT(t.shift.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((t.matrix - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CenterWhiten, OneDimensional) {
  Matrix x(2, 1);
  x << 1.0, 5.0;  // mean 3, variance 4
  const auto t = EstimateCenterWhiten(x);
  EXPECT_NEAR(t.shift(0), 3.0, 1e-12);
  EXPECT_NEAR(t.matrix(0, 0), 0.5, 1e-6);
}

TEST(CenterWhiten, RandomGaussianBecomesWhite) {
  Rng rng(1);
  const Eigen::Index d = 5;
  const Matrix mix = RandomSpd(rng, d, 0.5);
  Matrix x = Gaussian(rng, 500, d) * mix;
  x.rowwise() += Vector::LinSpaced(d, -2.0, 3.0).transpose();
  const auto t = EstimateCenterWhiten(x);
  const Matrix y = t.ApplyRows(x);
  EXPECT_LT(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((MlCovariance(y) - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CenterWhiten, LargeSampleInvariant) {
  Rng rng(2);
  for (Eigen::Index d : {2, 6, 10}) {
    const Matrix x = Gaussian(rng, 100 * d, d) * RandomSpd(rng, d, 0.1);
    const Matrix y = EstimateCenterWhiten(x).ApplyRows(x);
    EXPECT_LT(y.colwise().mean().cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((MlCovariance(y) - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(CenterWhiten, NeedsTwoVectors) {
  EXPECT_EQ(KindOf([] { EstimateCenterWhiten(Matrix::Ones(1, 3)); }), ErrorKind::kInsufficientData);
}

TEST(LengthNormalize, Examples) {
  Vector v(2);
  v << 3.0, 4.0;
  const Vector out = LengthNormalize(v);
  EXPECT_NEAR(out(0), 3.0 * std::sqrt(2.0) / 5.0, 1e-15);
  EXPECT_NEAR(out(1), 4.0 * std::sqrt(2.0) / 5.0, 1e-15);
  const Vector fixed = Vector::Ones(4);  // norm 2 = sqrt(4)
  EXPECT_EQ(LengthNormalize(fixed), fixed);
  EXPECT_EQ(KindOf([] { LengthNormalize(Vector::Zero(2)); }), ErrorKind::kDegenerate);
}

TEST(Pca, CumulativeRatioExamples) {
  Matrix a(4, 2);
  a << 3, 1, 3, -1, -3, 1, -3, -1;  // covariance diag(9, 1)
  EXPECT_EQ(PerRecordingPca(a, 0.35).out_dim(), 1);
  Matrix b = Matrix::Zero(8, 4);
  for (int i = 0; i < 4; ++i) {
    b(2 * i, i) = 2.0;
    b(2 * i + 1, i) = -2.0;
  }  // covariance I_4
  EXPECT_EQ(PerRecordingPca(b, 0.35).out_dim(), 2);
}

TEST(Pca, FullFractionKeepsRank) {
  Rng rng(4);
  const Matrix basis = Gaussian(rng, 2, 3);
  const Matrix x = Gaussian(rng, 50, 2) * basis;  // rank 2 in 3-D
  EXPECT_EQ(PerRecordingPca(x, 1.0).out_dim(), 2);
}

TEST(Pca, MinimalDimension) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.Below(8));
    const Matrix x = Gaussian(rng, 40, d) * RandomSpd(rng, d, 0.01);
    const double fraction = 0.05 + 0.9 * rng.Uniform();
    const auto t = PerRecordingPca(x, fraction);
    const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(MlCovariance(x)).eigenvalues().reverse();
    const double total = eig.sum();
    const Eigen::Index k = t.out_dim();
    EXPECT_GE(eig.head(k).sum() / total, fraction - 1e-12);
    if (k > 1) {
      EXPECT_LT(eig.head(k - 1).sum() / total, fraction);
    }
    // Kept variance equals the variance of the projected data.
    EXPECT_NEAR(MlCovariance(t.ApplyRows(x)).trace(), eig.head(k).sum(), 1e-9 * total);
  }
}

PldaModel DiagonalModel(const std::vector<double> &across, const std::vector<double> &within) {
  const auto d = static_cast<Eigen::Index>(across.size());
  PldaModel m;
  m.mean = Vector::Zero(d);
  m.across_class = Eigen::Map<const Vector>(across.data(), d).asDiagonal();
  m.within_class = Eigen::Map<const Vector>(within.data(), d).asDiagonal();
  return m;
}

TEST(LdaFromPlda, SelectsLargestRatioAxis) {
  const auto t = LdaFromPlda(DiagonalModel({4, 1}, {1, 1}), 1);
  ASSERT_EQ(t.out_dim(), 1);
  EXPECT_NEAR(t.matrix(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(t.matrix(0, 1), 0.0, 1e-12);
}

TEST(LdaFromPlda, WhitensWithinAndDiagonalizesAcross) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.Below(7));
    PldaModel m;
    m.mean = Gaussian(rng, d, 1);
    m.across_class = RandomSpd(rng, d, 0.0);
    m.within_class = RandomSpd(rng, d, 0.1);
    const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.Below(static_cast<std::uint64_t>(d)));
    const auto t = LdaFromPlda(m, k);
    const Matrix w = t.matrix * m.within_class * t.matrix.transpose();
    const Matrix b = t.matrix * m.across_class * t.matrix.transpose();
    EXPECT_LT((w - Matrix::Identity(k, k)).cwiseAbs().maxCoeff(), 1e-6);
    Matrix off = b;
    off.diagonal().setZero();
    EXPECT_LT(off.cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, b.cwiseAbs().maxCoeff()));
    for (Eigen::Index i = 1; i < k; ++i) EXPECT_GE(b(i - 1, i - 1), b(i, i) - 1e-6);
    EXPECT_EQ(t.shift, m.mean);
  }
}

TEST(LdaFromPlda, ProportionalCovariancesAreDeterministic) {
  Rng rng(7);
  PldaModel m;
  m.mean = Vector::Zero(3);
  m.within_class = RandomSpd(rng, 3, 0.5);
  m.across_class = 2.5 * m.within_class;
  const auto a = LdaFromPlda(m, 3);
  const auto b = LdaFromPlda(m, 3);
  EXPECT_EQ(a.matrix, b.matrix);
  EXPECT_LT((a.matrix * m.within_class * a.matrix.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(LdaFromPlda, IdentityWithinRecoversAcrossEigenvectors) {
  Rng rng(8);
  PldaModel m;
  m.mean = Vector::Zero(4);
  m.within_class = Matrix::Identity(4, 4);
  m.across_class = RandomSpd(rng, 4, 0.0);
  const auto t = LdaFromPlda(m, 4);
  Eigen::SelfAdjointEigenSolver<Matrix> oracle(m.across_class);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const Vector expected = oracle.eigenvectors().col(3 - i);
    EXPECT_NEAR(std::abs(t.matrix.row(i).dot(expected)), 1.0, 1e-9);
  }
}

TEST(LdaFromPlda, RejectsTooLargeDimension) {
  EXPECT_EQ(KindOf([] { LdaFromPlda(DiagonalModel({1, 1}, {1, 1}), 3); }), ErrorKind::kDimension);
}

TEST(Transform, SaveLoadRoundTrip) {
  testing::TempDir dir;
  Rng rng(9);
  AffineTransform t{Gaussian(rng, 3, 1), Gaussian(rng, 2, 3)};
  SaveTransform(t, dir.File("t.csv"));
  const auto back = LoadTransform(dir.File("t.csv"));
  EXPECT_EQ(back.shift, t.shift);
  EXPECT_EQ(back.matrix, t.matrix);
}

}  // namespace
}  // namespace vbdiar
