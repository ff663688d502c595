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

#ifndef VBDIAR_AHC_HPP_
#define VBDIAR_AHC_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/plda.hpp"

namespace vbdiar {

// ---------------------------------------------------------------------------
// Unsupervised threshold calibration

/// Two univariate Gaussians with a shared standard deviation, ordered so that
/// mu_low < mu_high.
struct CalibrationFit {
  double mu_low = 0.0;
  double mu_high = 0.0;
  double sigma = 1.0;
  double w_low = 0.5;
  double w_high = 0.5;
  int iterations = 0;
};

namespace detail {

/// Linear-interpolation percentile of sorted data, p in [0, 1].
inline double Percentile(const std::vector<double> &sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// EM fit of a shared-variance two-component mixture. Starts from the 10th
/// and 90th percentiles, the sample standard deviation and equal weights; stops
/// when the mean per-score log-likelihood changes by less than 1e-9 or after
/// 1000 iterations.
inline CalibrationFit FitTwoGaussians(const std::vector<double> &scores) {
  const std::size_t n = scores.size();
  if (n < 10) Fail(ErrorKind::kInsufficientData, "calibration needs at least 10 scores, got " + std::to_string(n));
  for (double s : scores) {
    if (!std::isfinite(s)) Fail(ErrorKind::kNumerical, "non-finite score in calibration input");
  }
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) Fail(ErrorKind::kDegenerate, "all calibration scores are equal");

  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double s : scores) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n);
  const double var_floor = 1e-12 * var;

  double mu[2] = {detail::Percentile(sorted, 0.1), detail::Percentile(sorted, 0.9)};
  double w[2] = {0.5, 0.5};
  double sigma2 = var;
  std::vector<double> resp_high(n);

  double prev_ll = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < 1000; ++it) {
    // E-step and log-likelihood under the current parameters.
    const double log_norm = -0.5 * (kLog2Pi + std::log(sigma2));
    const double lw0 = std::log(w[0]), lw1 = std::log(w[1]);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw0 + log_norm - 0.5 * (scores[i] - mu[0]) * (scores[i] - mu[0]) / sigma2;
      const double b = lw1 + log_norm - 0.5 * (scores[i] - mu[1]) * (scores[i] - mu[1]) / sigma2;
      const double mx = std::max(a, b);
      const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
      ll += lse;
      resp_high[i] = std::exp(b - lse);
    }
    if (std::abs(ll - prev_ll) < 1e-9 * static_cast<double>(n)) break;
    prev_ll = ll;
    // M-step.
    double n1 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += resp_high[i];
      s1 += resp_high[i] * scores[i];
      s0 += (1.0 - resp_high[i]) * scores[i];
    }
    const double n0 = static_cast<double>(n) - n1;
    if (n0 > 0.0) mu[0] = s0 / n0;
    if (n1 > 0.0) mu[1] = s1 / n1;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = scores[i] - mu[0], d1 = scores[i] - mu[1];
      ss += (1.0 - resp_high[i]) * d0 * d0 + resp_high[i] * d1 * d1;
    }
    sigma2 = std::max(ss / static_cast<double>(n), var_floor);
    w[1] = std::clamp(n1 / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
    w[0] = 1.0 - w[1];
  }
  CalibrationFit fit;
  const int lo = mu[0] <= mu[1] ? 0 : 1;
  fit.mu_low = mu[lo];
  fit.mu_high = mu[1 - lo];
  fit.w_low = w[lo];
  fit.w_high = w[1 - lo];
  fit.sigma = std::sqrt(sigma2);
  fit.iterations = it;
  return fit;
}

/// Score at which both components have posterior 0.5, plus `bias`.
inline double CalibrationThreshold(const CalibrationFit &fit, double bias) {
  if (!(fit.mu_high != fit.mu_low)) Fail(ErrorKind::kDegenerate, "calibration components coincide");
  const double s2 = fit.sigma * fit.sigma;
  return 0.5 * (fit.mu_low + fit.mu_high) + s2 * std::log(fit.w_low / fit.w_high) / (fit.mu_high - fit.mu_low) +
         bias;
}

// ---------------------------------------------------------------------------
// UPGMA

/// Hard cluster ids, contiguous from 0 in order of first appearance.
struct ClusterLabels {
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  int num_clusters() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }
};

/// Relabels arbitrary ids to 0, 1, ... in order of first appearance.
inline ClusterLabels Relabel(const std::vector<int> &ids) {
  ClusterLabels out;
  out.labels.reserve(ids.size());
  std::vector<std::pair<int, int>> seen;  // (raw id, new id); cluster counts are small
  for (int id : ids) {
    auto it = std::find_if(seen.begin(), seen.end(), [id](const auto &p) { return p.first == id; });
    if (it == seen.end()) {
      seen.emplace_back(id, static_cast<int>(seen.size()));
      out.labels.push_back(static_cast<int>(seen.size()) - 1);
    } else {
      out.labels.push_back(it->second);
    }
  }
  return out;
}

/// One agglomeration step. Clusters are named by their smallest member
/// index; `kept` < `absorbed`.
struct Merge {
  Eigen::Index kept = 0;
  Eigen::Index absorbed = 0;
  double similarity = 0.0;
};

/// Unweighted average linkage: repeatedly merges the pair of clusters with
/// the highest mean cross-cluster similarity while it exceeds
/// `stop_threshold` and more than `min_clusters` clusters remain. Ties go to
/// the lexicographically smallest cluster pair.
///
/// Cluster similarities are maintained with the Lance-Williams update
/// s(k, a+b) = (n_a s(k,a) + n_b s(k,b)) / (n_a + n_b) and each row caches its
/// best partner, so memory is O(n^2) and time O(n^3) in the worst case but
/// close to O(n^2) in practice.
inline std::vector<Merge> UpgmaMerges(const SimilarityMatrix &sim, double stop_threshold,
                                      Eigen::Index min_clusters = 1) {
  const Eigen::Index n = sim.size();
  std::vector<Merge> merges;
  if (n < 2) return merges;
  Matrix s = sim.scores;
  std::vector<char> active(static_cast<std::size_t>(n), 1);
  std::vector<double> count(static_cast<std::size_t>(n), 1.0);
  std::vector<double> best_val(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> best_idx(static_cast<std::size_t>(n));
  const double kNone = -std::numeric_limits<double>::infinity();

  auto rescan = [&](Eigen::Index i) {
    double bv = kNone;
    Eigen::Index bj = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || !active[static_cast<std::size_t>(j)]) continue;
      if (bj < 0 || s(i, j) > bv) {
        bv = s(i, j);
        bj = j;
      }
    }
    best_val[static_cast<std::size_t>(i)] = bv;
    best_idx[static_cast<std::size_t>(i)] = bj;
  };
  for (Eigen::Index i = 0; i < n; ++i) rescan(i);

  Eigen::Index remaining = n;
  while (remaining > std::max<Eigen::Index>(min_clusters, 1)) {
    Eigen::Index a = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)] || best_idx[static_cast<std::size_t>(i)] < 0) continue;
      if (a < 0 || best_val[static_cast<std::size_t>(i)] > best_val[static_cast<std::size_t>(a)]) a = i;
    }
    if (a < 0) break;
    const double value = best_val[static_cast<std::size_t>(a)];
    if (!(value > stop_threshold)) break;
    const Eigen::Index b = best_idx[static_cast<std::size_t>(a)];  // b > a, see tie rule above
    const double na = count[static_cast<std::size_t>(a)], nb = count[static_cast<std::size_t>(b)];
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == a || k == b) continue;
      const double merged = (na * s(a, k) + nb * s(b, k)) / (na + nb);
      s(a, k) = merged;
      s(k, a) = merged;
    }
    active[static_cast<std::size_t>(b)] = 0;
    count[static_cast<std::size_t>(a)] = na + nb;
    --remaining;
    merges.push_back({a, b, value});

    rescan(a);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == a) continue;
      const auto ku = static_cast<std::size_t>(k);
      if (best_idx[ku] == a || best_idx[ku] == b) {
        rescan(k);
      } else if (s(k, a) > best_val[ku] || (s(k, a) == best_val[ku] && a < best_idx[ku])) {
        best_val[ku] = s(k, a);
        best_idx[ku] = a;
      }
    }
  }
  return merges;
}

/// Applies a merge sequence to n singletons.
inline ClusterLabels LabelsFromMerges(Eigen::Index n, const std::vector<Merge> &merges) {
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (const auto &m : merges) parent[static_cast<std::size_t>(m.absorbed)] = static_cast<int>(m.kept);
  std::vector<int> root(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    int r = static_cast<int>(i);
    while (parent[static_cast<std::size_t>(r)] != r) r = parent[static_cast<std::size_t>(r)];
    root[static_cast<std::size_t>(i)] = r;
  }
  return Relabel(root);
}

inline ClusterLabels UpgmaCluster(const SimilarityMatrix &sim, double stop_threshold) {
  return LabelsFromMerges(sim.size(), UpgmaMerges(sim, stop_threshold));
}

/// UPGMA stopped as soon as `num_clusters` clusters remain.
inline ClusterLabels UpgmaClusterCount(const SimilarityMatrix &sim, Eigen::Index num_clusters) {
  return LabelsFromMerges(sim.size(),
                          UpgmaMerges(sim, -std::numeric_limits<double>::infinity(), num_clusters));
}

/// Entrywise mean of equally sized similarity matrices (multi-channel fusion).
inline SimilarityMatrix AverageSimilarities(const std::vector<SimilarityMatrix> &mats) {
  if (mats.empty()) Fail(ErrorKind::kEmptyInput, "no similarity matrices to average");
  const Eigen::Index n = mats.front().size();
  SimilarityMatrix out;
  out.scores = Matrix::Zero(n, n);
  for (const auto &m : mats) {
    if (m.size() != n) Fail(ErrorKind::kDimension, "similarity matrices differ in size");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j) out.scores(i, j) += m.scores(i, j);
      }
    }
  }
  out.scores /= static_cast<double>(mats.size());
  out.scores.diagonal().setConstant(kDiagonalSentinel);
  return out;
}

}  // namespace vbdiar

#endif  // VBDIAR_AHC_HPP_
