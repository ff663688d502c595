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

#ifndef VBDIAR_HMM_HPP_
#define VBDIAR_HMM_HPP_

// Log-domain forward-backward for speaker HMMs.

#include <cmath>
#include <limits>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"

namespace vbdiar {

struct ForwardBackwardResult {
  Matrix log_alpha;   // T x N
  Matrix log_beta;    // T x N
  Matrix posteriors;  // T x N, rows sum to 1
  double log_likelihood = 0.0;
};

namespace detail {

inline void FinishPosteriors(ForwardBackwardResult &r) {
  const Eigen::Index t_len = r.log_alpha.rows();
  r.posteriors.resize(t_len, r.log_alpha.cols());
  for (Eigen::Index t = 0; t < t_len; ++t) {
    r.posteriors.row(t) = (r.log_alpha.row(t) + r.log_beta.row(t)).array() - r.log_likelihood;
    r.posteriors.row(t) = r.posteriors.row(t).array().exp();
    const double sum = r.posteriors.row(t).sum();
    r.posteriors.row(t) /= sum;
  }
}

}  // namespace detail

/// General HMM with log_transition(i, j) = log p(j | i).
inline ForwardBackwardResult ForwardBackward(const Matrix &log_emissions, const Matrix &log_transition,
                                             const Vector &log_initial) {
  const Eigen::Index t_len = log_emissions.rows();
  const Eigen::Index n = log_emissions.cols();
  if (log_transition.rows() != n || log_transition.cols() != n || log_initial.size() != n) {
    Fail(ErrorKind::kDimension, "HMM parameter shapes disagree with emissions");
  }
  ForwardBackwardResult r;
  r.log_alpha.resize(t_len, n);
  r.log_beta.resize(t_len, n);
  if (t_len == 0) return r;
  std::vector<double> buf(static_cast<std::size_t>(n));
  r.log_alpha.row(0) = log_initial.transpose() + log_emissions.row(0);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = r.log_alpha(t - 1, i) + log_transition(i, j);
      r.log_alpha(t, j) = log_emissions(t, j) + LogSumExp(buf.data(), buf.size());
    }
  }
  r.log_beta.row(t_len - 1).setZero();
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        buf[static_cast<std::size_t>(j)] = log_transition(i, j) + log_emissions(t + 1, j) + r.log_beta(t + 1, j);
      }
      r.log_beta(t, i) = LogSumExp(buf.data(), buf.size());
    }
  }
  r.log_likelihood = LogSumExp(r.log_alpha.row(t_len - 1));
  detail::FinishPosteriors(r);
  return r;
}

/// Dense log transition matrix of the speaker-loop HMM:
/// p(j | i) = loop * [i == j] + (1 - loop) * prior(j).
inline Matrix LoopTransition(double loop_probability, const Vector &prior) {
  const Eigen::Index n = prior.size();
  Matrix tr(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      tr(i, j) = (1.0 - loop_probability) * prior(j);
      if (i == j) tr(i, j) = loop_probability + tr(i, j);
    }
  }
  return tr.array().log().matrix();
}

/// Forward-backward specialised to the speaker-loop HMM; O(T N) instead of
/// O(T N^2). The initial distribution is `prior`.
inline ForwardBackwardResult ForwardBackwardLoop(const Matrix &log_emissions, double loop_probability,
                                                 const Vector &prior) {
  const Eigen::Index t_len = log_emissions.rows();
  const Eigen::Index n = log_emissions.cols();
  if (prior.size() != n) Fail(ErrorKind::kDimension, "prior size differs from emission columns");
  const double log_stay = std::log(loop_probability);
  const double log_jump = std::log1p(-loop_probability);
  const Vector log_prior = prior.array().log().matrix();
  ForwardBackwardResult r;
  r.log_alpha.resize(t_len, n);
  r.log_beta.resize(t_len, n);
  if (t_len == 0) return r;
  r.log_alpha.row(0) = log_prior.transpose() + log_emissions.row(0);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const double total = LogSumExp(r.log_alpha.row(t - 1));
    for (Eigen::Index j = 0; j < n; ++j) {
      const double stay = log_stay + r.log_alpha(t - 1, j);
      const double jump = log_jump + log_prior(j) + total;
      const double mx = std::max(stay, jump);
      r.log_alpha(t, j) = log_emissions(t, j) + mx + std::log(std::exp(stay - mx) + std::exp(jump - mx));
    }
  }
  r.log_beta.row(t_len - 1).setZero();
  RowVector next(n);
  for (Eigen::Index t = t_len - 2; t >= 0; --t) {
    next = log_emissions.row(t + 1) + r.log_beta.row(t + 1);
    const double jump_total = log_jump + LogSumExp((next + log_prior.transpose()).transpose());
    for (Eigen::Index i = 0; i < n; ++i) {
      const double stay = log_stay + next(i);
      const double mx = std::max(stay, jump_total);
      r.log_beta(t, i) = mx + std::log(std::exp(stay - mx) + std::exp(jump_total - mx));
    }
  }
  r.log_likelihood = LogSumExp(r.log_alpha.row(t_len - 1));
  detail::FinishPosteriors(r);
  return r;
}

}  // namespace vbdiar

#endif  // VBDIAR_HMM_HPP_
