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

#ifndef VBDIAR_PLDA_HPP_
#define VBDIAR_PLDA_HPP_

// Two-covariance PLDA: a class (speaker) mean y ~ N(mean, across_class) and
// observations x ~ N(y, within_class).

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/text.hpp"
#include "vbdiar/transforms.hpp"

namespace vbdiar {

struct PldaModel {
  Vector mean;
  Matrix across_class;
  Matrix within_class;

  Eigen::Index dim() const { return mean.size(); }

  /// Throws unless shapes agree, entries are finite, both covariances are
  /// symmetric (1e-10 relative) and within_class is positive definite.
  void Validate() const {
    const Eigen::Index d = dim();
    if (across_class.rows() != d || across_class.cols() != d || within_class.rows() != d ||
        within_class.cols() != d) {
      Fail(ErrorKind::kDimension, "PLDA parameter shapes disagree");
    }
    if (!mean.allFinite() || !across_class.allFinite() || !within_class.allFinite()) {
      Fail(ErrorKind::kNumerical, "PLDA parameters contain non-finite values");
    }
    const auto asym = [](const Matrix &m) {
      return (m - m.transpose()).cwiseAbs().maxCoeff() / std::max(1.0, m.cwiseAbs().maxCoeff());
    };
    if (asym(across_class) > 1e-10 || asym(within_class) > 1e-10) {
      Fail(ErrorKind::kFormat, "PLDA covariances are not symmetric");
    }
    if (!IsPositiveDefinite(within_class)) Fail(ErrorKind::kSingular, "within-class covariance not positive definite");
  }
};

/// Pairwise log-likelihood ratios. The diagonal holds +inf and is never read
/// as a score.
struct SimilarityMatrix {
  Matrix scores;

  Eigen::Index size() const { return scores.rows(); }

  /// Off-diagonal scores, each unordered pair once (upper triangle, row-major).
  std::vector<double> UpperTriangle() const {
    std::vector<double> out;
    const Eigen::Index n = size();
    out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(scores(i, j));
    }
    return out;
  }
};

inline constexpr double kDiagonalSentinel = std::numeric_limits<double>::infinity();

namespace detail {

struct ClassStats {
  std::vector<double> counts;
  std::vector<Vector> means;
  std::vector<Matrix> scatters;  // around the class mean
  double total = 0.0;
};

inline ClassStats GatherClassStats(const Matrix &vectors, const std::vector<int> &labels) {
  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Eigen::Index>(i));
  ClassStats stats;
  for (const auto &[label, rows] : members) {
    Matrix x(static_cast<Eigen::Index>(rows.size()), vectors.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Eigen::Index>(r)) = vectors.row(rows[r]);
    const Vector mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    stats.counts.push_back(static_cast<double>(rows.size()));
    stats.means.push_back(mean);
    stats.scatters.push_back(centered.transpose() * centered);
    stats.total += static_cast<double>(rows.size());
  }
  return stats;
}

inline double GaussianLogDensity(const Vector &x, const Vector &mean, const Matrix &cov) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) Fail(ErrorKind::kSingular, "covariance not positive definite");
  const Vector diff = x - mean;
  const Vector z = llt.matrixL().solve(diff);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + logdet + z.squaredNorm());
}

/// Marginal log-likelihood of all classes under the model, with each class's
/// latent mean integrated out.
inline double PldaLogLikelihood(const PldaModel &model, const ClassStats &stats) {
  const double d = static_cast<double>(model.dim());
  const Matrix within_inv = InverseSpd(model.within_class);
  const double within_logdet = LogDetSpd(model.within_class);
  double ll = 0.0;
  for (std::size_t k = 0; k < stats.counts.size(); ++k) {
    const double n = stats.counts[k];
    ll += -0.5 * (n - 1.0) * d * kLog2Pi - 0.5 * (n - 1.0) * within_logdet - 0.5 * d * std::log(n) -
          0.5 * (within_inv.cwiseProduct(stats.scatters[k])).sum() +
          GaussianLogDensity(stats.means[k], model.mean, model.across_class + model.within_class / n);
  }
  return ll;
}

}  // namespace detail

/// Log-likelihood of labelled data under `model` (class means marginalized).
inline double PldaLogLikelihood(const PldaModel &model, const Matrix &vectors, const std::vector<int> &labels) {
  return detail::PldaLogLikelihood(model, detail::GatherClassStats(vectors, labels));
}

/// Maximum-likelihood two-covariance PLDA by EM. Initialization: global mean,
/// covariance of class means, pooled within-class covariance. If `ll_trace` is
/// given it receives the log-likelihood before the first and after every
/// iteration.
inline PldaModel TrainPldaEm(const Matrix &vectors, const std::vector<int> &labels, int iterations,
                             std::vector<double> *ll_trace = nullptr) {
  if (static_cast<std::size_t>(vectors.rows()) != labels.size()) Fail(ErrorKind::kDimension, "one label per vector");
  if (iterations < 1) Fail(ErrorKind::kConfig, "iterations must be positive");
  const Eigen::Index d = vectors.cols();
  if (d > vectors.rows()) {
    Fail(ErrorKind::kSingular, "dimension " + std::to_string(d) + " exceeds number of vectors " +
                                   std::to_string(vectors.rows()));
  }
  const auto stats = detail::GatherClassStats(vectors, labels);
  const std::size_t num_classes = stats.counts.size();
  if (num_classes < 2) Fail(ErrorKind::kTraining, "across-class covariance needs at least 2 classes");

  PldaModel model;
  model.mean = vectors.colwise().mean().transpose();
  model.across_class = Matrix::Zero(d, d);
  model.within_class = Matrix::Zero(d, d);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const Vector diff = stats.means[k] - model.mean;
    model.across_class += diff * diff.transpose();
    model.within_class += stats.scatters[k];
  }
  model.across_class = Symmetrized(model.across_class / static_cast<double>(num_classes));
  model.within_class = Symmetrized(model.within_class / stats.total);
  if (!IsPositiveDefinite(model.within_class)) {
    Fail(ErrorKind::kSingular, "within-class scatter is rank deficient (too few vectors per dimension)");
  }
  if (ll_trace) ll_trace->assign(1, detail::PldaLogLikelihood(model, stats));

  std::vector<Vector> post_means(num_classes);
  std::vector<Matrix> post_covs(num_classes);
  for (int it = 0; it < iterations; ++it) {
    // E-step: q(y_k) = N(m_k, C_k) with gain K = B (B + W/n)^-1.
    std::map<double, std::pair<Matrix, Matrix>> by_count;  // n -> (gain, posterior cov)
    for (std::size_t k = 0; k < num_classes; ++k) {
      const double n = stats.counts[k];
      auto it_cache = by_count.find(n);
      if (it_cache == by_count.end()) {
        const Matrix g = model.across_class + model.within_class / n;
        const Matrix gain = g.llt().solve(model.across_class).transpose();
        const Matrix cov = Symmetrized(model.across_class - gain * model.across_class);
        it_cache = by_count.emplace(n, std::make_pair(gain, cov)).first;
      }
      post_means[k] = model.mean + it_cache->second.first * (stats.means[k] - model.mean);
      post_covs[k] = it_cache->second.second;
    }
    // M-step.
    Vector mean = Vector::Zero(d);
    for (const auto &m : post_means) mean += m;
    mean /= static_cast<double>(num_classes);
    Matrix across = Matrix::Zero(d, d);
    Matrix within = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < num_classes; ++k) {
      const Vector dm = post_means[k] - mean;
      across += post_covs[k] + dm * dm.transpose();
      const Vector dx = stats.means[k] - post_means[k];
      within += stats.scatters[k] + stats.counts[k] * (dx * dx.transpose() + post_covs[k]);
    }
    model.mean = mean;
    model.across_class = Symmetrized(across / static_cast<double>(num_classes));
    model.within_class = Symmetrized(within / stats.total);
    if (ll_trace) ll_trace->push_back(detail::PldaLogLikelihood(model, stats));
  }
  return model;
}

/// Same-speaker vs different-speaker log-likelihood ratio for every pair of
/// rows. With T = B + W and S = T - B T^-1 B:
///   llr(x1, x2) = -1/2 y1' Q y1 - 1/2 y2' Q y2 + y1' P y2 + 1/2 (log|T| - log|S|)
/// where y = x - mean, Q = S^-1 - T^-1 and P = T^-1 B S^-1.
inline SimilarityMatrix LlrMatrix(const PldaModel &model, const Matrix &vectors) {
  if (vectors.cols() != model.dim()) Fail(ErrorKind::kDimension, "vector dimension differs from PLDA dimension");
  const Matrix total = model.across_class + model.within_class;
  const Matrix total_inv = InverseSpd(total);
  const Matrix schur = Symmetrized(total - model.across_class * total_inv * model.across_class);
  const Matrix schur_inv = InverseSpd(schur);
  const Matrix quad = schur_inv - total_inv;
  const Matrix cross = Symmetrized(total_inv * model.across_class * schur_inv);
  const double offset = 0.5 * (LogDetSpd(total) - LogDetSpd(schur));

  const Matrix y = vectors.rowwise() - model.mean.transpose();
  const Vector self = ((y * quad).cwiseProduct(y)).rowwise().sum();
  const Matrix pair = y * cross * y.transpose();
  const Eigen::Index n = vectors.rows();
  SimilarityMatrix sim;
  sim.scores.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sim.scores(i, i) = kDiagonalSentinel;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = -0.5 * self(i) - 0.5 * self(j) + pair(i, j) + offset;
      sim.scores(i, j) = s;
      sim.scores(j, i) = s;
    }
  }
  return sim;
}

/// weight * a + (1 - weight) * b for mean and both covariances.
inline PldaModel Interpolate(const PldaModel &a, const PldaModel &b, double weight = 0.5) {
  if (a.dim() != b.dim()) Fail(ErrorKind::kDimension, "cannot interpolate PLDA models of different dimension");
  if (!(weight >= 0.0 && weight <= 1.0)) Fail(ErrorKind::kConfig, "interpolation weight must lie in [0, 1]");
  const double other = 1.0 - weight;
  return {weight * a.mean + other * b.mean, weight * a.across_class + other * b.across_class,
          weight * a.within_class + other * b.within_class};
}

/// Expresses the model in the output space of `t`. A within-class covariance
/// that loses positive definiteness is regularized by 1e-8 * trace / D.
inline PldaModel Project(const PldaModel &model, const AffineTransform &t) {
  if (t.in_dim() != model.dim()) Fail(ErrorKind::kDimension, "transform input dimension differs from PLDA dimension");
  const Matrix &m = t.matrix;
  PldaModel out;
  out.mean = m * (model.mean - t.shift);
  out.across_class = Symmetrized(m * model.across_class * m.transpose());
  out.within_class = Symmetrized(m * model.within_class * m.transpose());
  const double dim = static_cast<double>(out.dim());
  const double trace = out.within_class.trace();
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(out.within_class, Eigen::EigenvaluesOnly)
                             .eigenvalues()
                             .minCoeff();
  if (!(min_eig > 1e-12 * std::max(trace, 0.0) / dim)) {
    Warn("projected within-class covariance is not positive definite; regularizing");
    out.within_class.diagonal().array() += 1e-8 * std::max(trace, 1.0) / dim;
  }
  return out;
}

/// File format: "plda,D", then the mean, D across-class rows, D within-class rows.
inline void SavePlda(const PldaModel &model, const std::string &path) {
  auto out = text::OpenOut(path);
  out << "plda," << model.dim() << '\n' << text::JoinRow(model.mean) << '\n';
  text::WriteMatrixRows(out, model.across_class);
  text::WriteMatrixRows(out, model.within_class);
}

inline PldaModel LoadPlda(const std::string &path) {
  text::CsvBlockReader reader(path);
  const auto header = reader.NextFields();
  if (header.size() != 2 || header[0] != "plda") Fail(ErrorKind::kFormat, path + ": missing 'plda,D' header");
  const long d = text::ParseInt(header[1], path, reader.line_number());
  if (d <= 0) Fail(ErrorKind::kFormat, path + ": non-positive dimension");
  PldaModel model;
  model.mean = reader.NextRow(d);
  model.across_class = reader.NextMatrix(d, d);
  model.within_class = reader.NextMatrix(d, d);
  if (!reader.AtEnd()) Fail(ErrorKind::kFormat, path + ": trailing lines after PLDA blocks");
  model.Validate();
  return model;
}

}  // namespace vbdiar

#endif  // VBDIAR_PLDA_HPP_
