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

#ifndef VBDIAR_LINALG_HPP_
#define VBDIAR_LINALG_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "vbdiar/error.hpp"

namespace vbdiar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

inline double LogSumExp(const double *values, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, values[i]);
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(values[i] - mx);
  return mx + std::log(acc);
}

template <typename Derived>
double LogSumExp(const Eigen::MatrixBase<Derived> &values) {
  const double mx = values.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((values.derived().array() - mx).exp().sum());
}

inline Matrix Symmetrized(const Matrix &m) { return 0.5 * (m + m.transpose()); }

inline bool AllFinite(const Matrix &m) { return m.allFinite(); }

/// Flips each column so that its first entry with |x| > tol is positive.
inline void CanonicalizeColumnSigns(Matrix &columns, double tol = 1e-12) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    for (Eigen::Index i = 0; i < columns.rows(); ++i) {
      const double v = columns(i, j);
      if (std::abs(v) > tol) {
        if (v < 0) columns.col(j) *= -1.0;
        break;
      }
    }
  }
}

struct SortedEigen {
  Vector values;   // non-increasing
  Matrix vectors;  // columns, sign-canonicalized
};

/// Orders eigenpairs by decreasing eigenvalue. Pairs whose eigenvalues agree
/// to a relative 1e-10 are ordered by descending lexicographic comparison of
/// the sign-canonicalized vectors so that degenerate subspaces still yield a
/// reproducible basis.
inline SortedEigen SortEigenpairs(const Vector &values, Matrix vectors) {
  CanonicalizeColumnSigns(vectors);
  const Eigen::Index n = values.size();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(values(a) - values(b)) > 1e-10 * scale) return values(a) > values(b);
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      if (vectors(i, a) != vectors(i, b)) return vectors(i, a) > vectors(i, b);
    }
    return false;
  });
  SortedEigen out;
  out.values.resize(n);
  out.vectors.resize(vectors.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = values(order[k]);
    out.vectors.col(k) = vectors.col(order[k]);
  }
  return out;
}

inline SortedEigen SymmetricEigen(const Matrix &m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(Symmetrized(m));
  if (solver.info() != Eigen::Success) Fail(ErrorKind::kNumerical, "eigendecomposition did not converge");
  return SortEigenpairs(solver.eigenvalues(), solver.eigenvectors());
}

/// log|m| for symmetric positive definite m.
inline double LogDetSpd(const Matrix &m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) Fail(ErrorKind::kSingular, "matrix is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline bool IsPositiveDefinite(const Matrix &m) {
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

inline Matrix InverseSpd(const Matrix &m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) Fail(ErrorKind::kSingular, "matrix is not positive definite");
  return Symmetrized(llt.solve(Matrix::Identity(m.rows(), m.cols())));
}

/// Symmetric square root of a positive semi-definite matrix; negative
/// eigenvalues from round-off are clamped to zero.
inline Matrix SqrtPsd(const Matrix &m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(Symmetrized(m));
  const Vector root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * root.asDiagonal() * solver.eigenvectors().transpose();
}

/// Stacks a list of equal-length vectors as rows.
inline Matrix RowsToMatrix(const std::vector<Vector> &rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) Fail(ErrorKind::kDimension, "rows of unequal length");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return m;
}

}  // namespace vbdiar

#endif  // VBDIAR_LINALG_HPP_
