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

#ifndef VBDIAR_LDA_HPP_
#define VBDIAR_LDA_HPP_

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/plda.hpp"
#include "vbdiar/transforms.hpp"

namespace vbdiar {

/// LDA derived from PLDA parameters: rows are the leading generalized
/// eigenvectors of (across_class, within_class), scaled so that the projected
/// within-class covariance is the identity. The projected across-class
/// covariance is then diagonal with non-increasing entries.
inline AffineTransform LdaFromPlda(const PldaModel &model, Eigen::Index out_dim) {
  const Eigen::Index d = model.dim();
  if (out_dim < 1 || out_dim > d) {
    Fail(ErrorKind::kDimension, "LDA dimension " + std::to_string(out_dim) + " outside [1, " + std::to_string(d) + "]");
  }
  Matrix within = Symmetrized(model.within_class);
  if (!IsPositiveDefinite(within)) {
    within.diagonal().array() += 1e-8 * std::max(within.trace(), 1.0) / static_cast<double>(d);
  }
  // Reduce to a standard problem in the within-whitened space so that the
  // deterministic ordering in SortEigenpairs applies.
  Eigen::LLT<Matrix> llt(within);
  if (llt.info() != Eigen::Success) Fail(ErrorKind::kSingular, "within-class covariance is singular");
  const Matrix l = llt.matrixL();
  const Matrix l_inv = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  const Matrix reduced = Symmetrized(l_inv * model.across_class * l_inv.transpose());
  const auto eig = SymmetricEigen(reduced);
  Matrix rows = eig.vectors.leftCols(out_dim).transpose() * l_inv;  // out_dim x d
  Matrix cols = rows.transpose();
  CanonicalizeColumnSigns(cols);
  AffineTransform t;
  t.shift = model.mean;
  t.matrix = cols.transpose();
  return t;
}

}  // namespace vbdiar

#endif  // VBDIAR_LDA_HPP_
