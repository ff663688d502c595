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

#ifndef VBDIAR_TRANSFORMS_HPP_
#define VBDIAR_TRANSFORMS_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/text.hpp"

namespace vbdiar {

/// y = matrix * (x - shift). matrix is out_dim x in_dim.
struct AffineTransform {
  Vector shift;
  Matrix matrix;

  Eigen::Index in_dim() const { return matrix.cols(); }
  Eigen::Index out_dim() const { return matrix.rows(); }

  Vector Apply(const Vector &x) const {
    if (x.size() != in_dim()) Fail(ErrorKind::kDimension, "transform input dimension mismatch");
    return matrix * (x - shift);
  }

  /// Applies the transform to every row of `rows`.
  Matrix ApplyRows(const Matrix &rows) const {
    if (rows.cols() != in_dim()) Fail(ErrorKind::kDimension, "transform input dimension mismatch");
    return (rows.rowwise() - shift.transpose()) * matrix.transpose();
  }

  static AffineTransform Identity(Eigen::Index dim) {
    return {Vector::Zero(dim), Matrix::Identity(dim, dim)};
  }
};

namespace detail {

struct Moments {
  Vector mean;
  Matrix cov;  // maximum-likelihood (divides by n)
};

inline Moments SampleMoments(const Matrix &rows) {
  const double n = static_cast<double>(rows.rows());
  Moments m;
  m.mean = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - m.mean.transpose();
  m.cov = Symmetrized(centered.transpose() * centered / n);
  return m;
}

}  // namespace detail

/// Centering and whitening estimated from the rows of `vectors`. The matrix is
/// the inverse symmetric square root of the sample covariance, with eigenvalues
/// floored at 1e-6 * trace / D.
inline AffineTransform EstimateCenterWhiten(const Matrix &vectors) {
  if (vectors.rows() < 2) Fail(ErrorKind::kInsufficientData, "center/whiten needs at least 2 vectors");
  const auto moments = detail::SampleMoments(vectors);
  const double dim = static_cast<double>(vectors.cols());
  const double floor = 1e-6 * moments.cov.trace() / dim;
  if (!(floor > 0.0)) Fail(ErrorKind::kDegenerate, "all vectors identical");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(moments.cov);
  const Vector inv_root = solver.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
  AffineTransform t;
  t.shift = moments.mean;
  t.matrix = Symmetrized(solver.eigenvectors() * inv_root.asDiagonal() * solver.eigenvectors().transpose());
  return t;
}

/// Scales v to norm sqrt(D).
inline Vector LengthNormalize(const Vector &v) {
  const double norm = v.norm();
  if (!(norm > 0.0)) Fail(ErrorKind::kDegenerate, "cannot length-normalize a zero vector");
  return v * (std::sqrt(static_cast<double>(v.size())) / norm);
}

inline Matrix LengthNormalizeRows(const Matrix &rows) {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) out.row(i) = LengthNormalize(rows.row(i).transpose()).transpose();
  return out;
}

/// Smallest k such that the top-k eigenvalues hold at least
/// `preserved_fraction` of the total variance (k >= 1).
inline Eigen::Index PcaDimension(const Vector &eigenvalues_desc, double preserved_fraction) {
  const Vector clamped = eigenvalues_desc.cwiseMax(0.0);
  const double total = clamped.sum();
  if (!(total > 0.0)) return 1;
  const double target = preserved_fraction * total - 1e-12 * total;
  double acc = 0.0;
  for (Eigen::Index k = 0; k < clamped.size(); ++k) {
    acc += clamped(k);
    if (acc >= target) return k + 1;
  }
  return clamped.size();
}

/// Per-recording PCA keeping the leading principal directions that explain
/// `preserved_fraction` of the variance. shift is the recording mean.
inline AffineTransform PerRecordingPca(const Matrix &vectors, double preserved_fraction) {
  if (!(preserved_fraction > 0.0 && preserved_fraction <= 1.0)) {
    Fail(ErrorKind::kConfig, "preserved fraction must lie in (0, 1]");
  }
  if (vectors.rows() < 2) Fail(ErrorKind::kInsufficientData, "PCA needs at least 2 vectors");
  const auto moments = detail::SampleMoments(vectors);
  const auto eig = SymmetricEigen(moments.cov);
  const Eigen::Index k = PcaDimension(eig.values, preserved_fraction);
  AffineTransform t;
  t.shift = moments.mean;
  t.matrix = eig.vectors.leftCols(k).transpose();
  return t;
}

inline void SaveTransform(const AffineTransform &t, const std::string &path) {
  auto out = text::OpenOut(path);
  out << text::JoinRow(t.shift) << '\n';
  text::WriteMatrixRows(out, t.matrix);
}

inline AffineTransform LoadTransform(const std::string &path) {
  text::CsvBlockReader reader(path);
  AffineTransform t;
  t.shift = reader.NextRow(-1);
  std::vector<Vector> rows;
  while (!reader.AtEnd()) rows.push_back(reader.NextRow(t.shift.size()));
  if (rows.empty()) Fail(ErrorKind::kFormat, path + ": transform has no matrix rows");
  t.matrix = RowsToMatrix(rows);
  return t;
}

}  // namespace vbdiar

#endif  // VBDIAR_TRANSFORMS_HPP_
