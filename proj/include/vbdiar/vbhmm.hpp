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

#ifndef VBDIAR_VBHMM_HPP_
#define VBDIAR_VBHMM_HPP_

// Bayesian HMM clustering of embeddings. Each HMM state is a speaker whose
// mean is V y_s with y_s ~ N(0, I) and V = diag(sqrt(phi)), where phi is the
// across-class diagonal of a PLDA model projected so that its within-class
// covariance is the identity. Observations: x_t ~ N(V y_{z_t}, I).
//
// The variational objective is
//   ELBO = F_A E[log p(X | Z, Y)] + E[log p(Z | pi)] + H(q(Z)) - F_B KL(q(Y) || p(Y))
// and each update below (q(Y), q(Z), pi) is a coordinate ascent step on it.

#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vbdiar/ahc.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/hmm.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/plda.hpp"

namespace vbdiar {

struct VbConfig {
  double loop_probability = 0.8;         // P_loop
  double acoustic_scale = 0.4;           // F_A
  double speaker_regularization = 11.0;  // F_B
  double init_smoothing = 5.0;
  int max_iterations = 40;
  double elbo_tolerance = 1e-4;
  double prune_threshold = 0.05;

  void Validate() const {
    if (!(loop_probability > 0.0 && loop_probability < 1.0)) Fail(ErrorKind::kConfig, "P_loop must lie in (0, 1)");
    if (!(acoustic_scale > 0.0)) Fail(ErrorKind::kConfig, "F_A must be positive");
    if (!(speaker_regularization > 0.0)) Fail(ErrorKind::kConfig, "F_B must be positive");
    if (!(init_smoothing > 0.0)) Fail(ErrorKind::kConfig, "smoothing must be positive");
    if (max_iterations < 1) Fail(ErrorKind::kConfig, "max_iterations must be positive");
    if (!(elbo_tolerance > 0.0)) Fail(ErrorKind::kConfig, "elbo_tolerance must be positive");
    if (!(prune_threshold > 0.0 && prune_threshold < 1.0)) Fail(ErrorKind::kConfig, "prune_threshold must lie in (0, 1)");
  }
};

/// Responsibilities q(z_t = s); T x S, row-stochastic.
struct SoftAssignment {
  Matrix gamma;

  Eigen::Index frames() const { return gamma.rows(); }
  Eigen::Index speakers() const { return gamma.cols(); }

  std::vector<int> Argmax() const {
    std::vector<int> out(static_cast<std::size_t>(gamma.rows()));
    for (Eigen::Index t = 0; t < gamma.rows(); ++t) {
      Eigen::Index best = 0;
      gamma.row(t).maxCoeff(&best);
      out[static_cast<std::size_t>(t)] = static_cast<int>(best);
    }
    return out;
  }
};

/// q(y_s) = N(mean.row(s), diag(variance.row(s))) per speaker.
struct SpeakerPosterior {
  Matrix mean;
  Matrix variance;
};

struct VbState {
  SoftAssignment assignment;
  Vector prior;                   // pi over surviving speakers
  SpeakerPosterior speakers;      // from the most recent update
  Eigen::Index initial_speakers = 0;
  std::vector<int> speaker_ids;   // original column of each surviving speaker
};

/// Row t = softmax(smoothing * onehot(labels[t])).
inline SoftAssignment InitSoft(const ClusterLabels &labels, double smoothing) {
  if (!(smoothing > 0.0)) Fail(ErrorKind::kConfig, "smoothing must be positive");
  const int s = labels.num_clusters();
  const auto t_len = static_cast<Eigen::Index>(labels.size());
  SoftAssignment a;
  a.gamma.resize(t_len, s);
  // softmax of (smoothing, 0, ..., 0): exp(smoothing) / (exp(smoothing) + s - 1).
  const double hot = 1.0 / (1.0 + static_cast<double>(s - 1) * std::exp(-smoothing));
  const double cold = s > 1 ? std::exp(-smoothing) * hot : 0.0;
  for (Eigen::Index t = 0; t < t_len; ++t) {
    a.gamma.row(t).setConstant(cold);
    a.gamma(t, labels.labels[static_cast<std::size_t>(t)]) = hot;
  }
  return a;
}

inline VbState MakeVbState(SoftAssignment init) {
  VbState state;
  const Eigen::Index s = init.speakers();
  if (s < 1) Fail(ErrorKind::kDimension, "initial assignment has no speakers");
  state.assignment = std::move(init);
  state.prior = Vector::Constant(s, 1.0 / static_cast<double>(s));
  state.initial_speakers = s;
  state.speaker_ids.resize(static_cast<std::size_t>(s));
  for (Eigen::Index i = 0; i < s; ++i) state.speaker_ids[static_cast<std::size_t>(i)] = static_cast<int>(i);
  return state;
}

namespace detail {

/// Diagonal across-class variances of a PLDA in LDA form (within = I).
inline Vector LdaFormAcrossDiagonal(const PldaModel &plda) {
  const Eigen::Index d = plda.dim();
  const double dev = (plda.within_class - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  if (!(dev <= 1e-6)) {
    Fail(ErrorKind::kConfig, "VB emission model expects an LDA-projected PLDA (within-class = I), deviation " +
                                 std::to_string(dev));
  }
  return plda.across_class.diagonal().cwiseMax(0.0);
}

}  // namespace detail

/// Updates q(Y) from the current responsibilities and returns the
/// F_A-scaled expected log-likelihoods (T x S) together with the KL term.
struct SpeakerUpdate {
  SpeakerPosterior posterior;
  Matrix log_emissions;
  double kl_term = 0.0;  // sum over s,d of 1/2 (log L^-1 - L^-1 - a^2 + 1), i.e. -KL
};

inline SpeakerUpdate UpdateSpeakers(const Matrix &centered, const Vector &phi, const Matrix &gamma,
                                    const VbConfig &config) {
  const Eigen::Index d = centered.cols();
  const double fa = config.acoustic_scale, fb = config.speaker_regularization;
  const Vector sqrt_phi = phi.cwiseSqrt();
  const Matrix rho = centered * sqrt_phi.asDiagonal();                              // T x D
  const Vector g = -0.5 * (centered.rowwise().squaredNorm().array() + static_cast<double>(d) * kLog2Pi).matrix();
  const RowVector counts = gamma.colwise().sum();                                    // 1 x S
  SpeakerUpdate u;
  u.posterior.variance = (1.0 + ((fa / fb) * counts.transpose() * phi.transpose()).array()).inverse().matrix();  // S x D
  u.posterior.mean = ((fa / fb) * u.posterior.variance.array() * (gamma.transpose() * rho).array()).matrix();   // S x D
  const Vector expected_quad =
      (u.posterior.variance.array() + u.posterior.mean.array().square()).matrix() * phi;                       // S
  u.log_emissions = fa * ((rho * u.posterior.mean.transpose()).rowwise() - 0.5 * expected_quad.transpose());
  u.log_emissions.colwise() += fa * g;
  u.kl_term = 0.5 * (u.posterior.variance.array().log() - u.posterior.variance.array() -
                     u.posterior.mean.array().square() + 1.0)
                        .sum();
  return u;
}

/// One VB iteration: q(Y) update, forward-backward for q(Z), ELBO, then the
/// pi update (expected initial-state and jump counts).
inline std::pair<VbState, double> VbIterate(const VbState &state, const Matrix &observations,
                                            const PldaModel &plda_projected, const VbConfig &config) {
  config.Validate();
  if (observations.cols() != plda_projected.dim()) Fail(ErrorKind::kDimension, "observation dim differs from PLDA");
  if (observations.rows() != state.assignment.frames()) Fail(ErrorKind::kDimension, "assignment rows differ from T");
  const Vector phi = detail::LdaFormAcrossDiagonal(plda_projected);
  const Matrix centered = observations.rowwise() - plda_projected.mean.transpose();

  const auto upd = UpdateSpeakers(centered, phi, state.assignment.gamma, config);
  const auto fb = ForwardBackwardLoop(upd.log_emissions, config.loop_probability, state.prior);
  const double elbo = fb.log_likelihood + config.speaker_regularization * upd.kl_term;
  if (!std::isfinite(elbo)) {
    std::ostringstream msg;
    msg << "non-finite ELBO (T=" << observations.rows() << ", S=" << state.assignment.speakers()
        << ", F_A=" << config.acoustic_scale << ", F_B=" << config.speaker_regularization
        << ", P_loop=" << config.loop_probability << ", loglik=" << fb.log_likelihood << ", kl=" << upd.kl_term << ")";
    Fail(ErrorKind::kNumerical, msg.str());
  }

  VbState next = state;
  next.assignment.gamma = fb.posteriors;
  next.speakers = upd.posterior;

  // pi_s <- gamma_0s + sum_{t>0} sum_i alpha_{t-1}(i) (1-P) pi_s p_t(s) beta_t(s) / p(X)
  const Eigen::Index t_len = observations.rows();
  const Eigen::Index s_len = state.prior.size();
  Vector counts = fb.posteriors.row(0).transpose();
  const double log_jump = std::log1p(-config.loop_probability);
  for (Eigen::Index t = 1; t < t_len; ++t) {
    const double prev = LogSumExp(fb.log_alpha.row(t - 1));
    for (Eigen::Index s = 0; s < s_len; ++s) {
      counts(s) += std::exp(prev + log_jump + std::log(state.prior(s)) + upd.log_emissions(t, s) +
                            fb.log_beta(t, s) - fb.log_likelihood);
    }
  }
  next.prior = counts / counts.sum();
  return {std::move(next), elbo};
}

/// Drops speakers whose responsibility mass is below
/// prune_threshold * T / initial_speakers, renormalizing gamma rows and pi.
/// At least one speaker (the heaviest) always survives.
inline VbState PruneSpeakers(const VbState &state, double prune_threshold) {
  const Matrix &gamma = state.assignment.gamma;
  const RowVector mass = gamma.colwise().sum();
  const double limit = prune_threshold * static_cast<double>(gamma.rows()) /
                       static_cast<double>(std::max<Eigen::Index>(state.initial_speakers, 1));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index s = 0; s < gamma.cols(); ++s) {
    if (!(mass(s) < limit)) keep.push_back(s);
  }
  if (keep.empty()) {
    Eigen::Index best = 0;
    mass.maxCoeff(&best);
    keep.push_back(best);
  }
  if (static_cast<Eigen::Index>(keep.size()) == gamma.cols()) return state;

  VbState out;
  out.initial_speakers = state.initial_speakers;
  const auto k = static_cast<Eigen::Index>(keep.size());
  out.assignment.gamma.resize(gamma.rows(), k);
  out.prior.resize(k);
  const bool has_posterior = state.speakers.mean.rows() == gamma.cols();
  if (has_posterior) {
    out.speakers.mean.resize(k, state.speakers.mean.cols());
    out.speakers.variance.resize(k, state.speakers.variance.cols());
  }
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index s = keep[static_cast<std::size_t>(i)];
    out.assignment.gamma.col(i) = gamma.col(s);
    out.prior(i) = state.prior(s);
    out.speaker_ids.push_back(state.speaker_ids[static_cast<std::size_t>(s)]);
    if (has_posterior) {
      out.speakers.mean.row(i) = state.speakers.mean.row(s);
      out.speakers.variance.row(i) = state.speakers.variance.row(s);
    }
  }
  for (Eigen::Index t = 0; t < gamma.rows(); ++t) {
    const double sum = out.assignment.gamma.row(t).sum();
    if (sum > 0.0) {
      out.assignment.gamma.row(t) /= sum;
    } else {
      out.assignment.gamma.row(t).setConstant(1.0 / static_cast<double>(k));
    }
  }
  const double prior_sum = out.prior.sum();
  if (prior_sum > 0.0) {
    out.prior /= prior_sum;
  } else {
    out.prior.setConstant(1.0 / static_cast<double>(k));
  }
  return out;
}

struct VbResult {
  SoftAssignment assignment;
  int speaker_count = 0;
  std::vector<double> elbo_trace;
  std::vector<int> speaker_counts;  // after each iteration's pruning
  std::vector<int> speaker_ids;     // initial column of each surviving speaker
  int iterations = 0;
};

/// Alternates VbIterate and PruneSpeakers until the relative ELBO change
/// drops below elbo_tolerance (on an iteration that pruned nothing) or
/// max_iterations is reached.
inline VbResult RunVb(const Matrix &observations, const SoftAssignment &init, const PldaModel &plda_projected,
                      const VbConfig &config) {
  config.Validate();
  VbState state = MakeVbState(init);
  VbResult result;
  for (int it = 0; it < config.max_iterations; ++it) {
    auto [next, elbo] = VbIterate(state, observations, plda_projected, config);
    const Eigen::Index before = next.assignment.speakers();
    state = PruneSpeakers(next, config.prune_threshold);
    const bool pruned = state.assignment.speakers() != before;
    result.elbo_trace.push_back(elbo);
    result.speaker_counts.push_back(static_cast<int>(state.assignment.speakers()));
    result.iterations = it + 1;
    if (it > 0 && !pruned) {
      const double prev = result.elbo_trace[result.elbo_trace.size() - 2];
      if (std::abs(elbo - prev) / std::abs(elbo) < config.elbo_tolerance) break;
    }
  }
  result.assignment = state.assignment;
  result.speaker_count = static_cast<int>(state.assignment.speakers());
  result.speaker_ids = state.speaker_ids;
  return result;
}

}  // namespace vbdiar

#endif  // VBDIAR_VBHMM_HPP_
