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

#ifndef VBDIAR_FRAME_VB_HPP_
#define VBDIAR_FRAME_VB_HPP_

// Frame-level resegmentation with an eigenvoice model: a diagonal UBM-GMM
// whose component means shift as m_c + V_c y_s for speaker s, y_s ~ N(0, I).
// A single pass updates every speaker's q(y_s) from the initial frame
// assignment and then re-assigns frames with one forward-backward.

#include <cmath>
#include <string>
#include <vector>

#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/hmm.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/text.hpp"
#include "vbdiar/vbhmm.hpp"

namespace vbdiar {

struct EigenvoiceModel {
  Vector weights;    // C
  Matrix means;      // C x F
  Matrix diag_covs;  // C x F
  Matrix v;          // (C*F) x R, row c*F + f

  Eigen::Index components() const { return weights.size(); }
  Eigen::Index feature_dim() const { return means.cols(); }
  Eigen::Index rank() const { return v.cols(); }

  /// Rows of V belonging to component c (F x R).
  auto Block(Eigen::Index c) const { return v.middleRows(c * feature_dim(), feature_dim()); }

  void Validate() const {
    const Eigen::Index c = components(), f = feature_dim();
    if (c < 1 || f < 1 || rank() < 1) Fail(ErrorKind::kFormat, "eigenvoice model has an empty dimension");
    if (means.rows() != c || diag_covs.rows() != c || diag_covs.cols() != f || v.rows() != c * f) {
      Fail(ErrorKind::kDimension, "eigenvoice parameter shapes disagree");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-12) Fail(ErrorKind::kFormat, "GMM weights do not sum to 1");
    if ((weights.array() < 0.0).any()) Fail(ErrorKind::kFormat, "negative GMM weight");
    if (!(diag_covs.array() > 0.0).all()) Fail(ErrorKind::kFormat, "GMM variances must be positive");
    if (!means.allFinite() || !v.allFinite() || !diag_covs.allFinite()) Fail(ErrorKind::kNumerical, "non-finite model");
  }
};

struct FrameVbConfig {
  double acoustic_scale = 0.1;  // F_A
  double loop_probability = 0.95;
  int min_duration = 1;         // frames (after downsampling)
  int downsample = 5;

  void Validate() const {
    if (!(acoustic_scale > 0.0)) Fail(ErrorKind::kConfig, "frame F_A must be positive");
    if (!(loop_probability > 0.0 && loop_probability < 1.0)) Fail(ErrorKind::kConfig, "frame P_loop must lie in (0, 1)");
    if (min_duration < 1) Fail(ErrorKind::kConfig, "min_duration must be positive");
    if (downsample < 1) Fail(ErrorKind::kConfig, "downsample must be positive");
  }
};

/// One-hot rows for the speaker whose segment covers each frame centre
/// (closed intervals; on a shared boundary the earlier segment wins) and
/// uniform rows for uncovered frames. Column order is SpeakerLabels(hyp).
inline SoftAssignment FrameInitFromSegments(const DiarizationHypothesis &hyp, double frame_rate,
                                            Eigen::Index total_frames) {
  if (hyp.segments.empty()) Fail(ErrorKind::kEmptyInput, "cannot initialize frames from an empty hypothesis");
  if (!(frame_rate > 0.0)) Fail(ErrorKind::kConfig, "frame rate must be positive");
  const auto labels = SpeakerLabels(hyp);
  auto segments = hyp.segments;
  std::stable_sort(segments.begin(), segments.end(),
                   [](const auto &a, const auto &b) { return a.onset < b.onset; });
  std::vector<int> column(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    column[i] = static_cast<int>(std::lower_bound(labels.begin(), labels.end(), segments[i].speaker) - labels.begin());
  }
  const auto s = static_cast<Eigen::Index>(labels.size());
  SoftAssignment a;
  a.gamma = Matrix::Constant(total_frames, s, 1.0 / static_cast<double>(s));
  std::size_t first = 0;  // segments ending before the current centre are skipped
  for (Eigen::Index t = 0; t < total_frames; ++t) {
    const double centre = (static_cast<double>(t) + 0.5) / frame_rate;
    while (first < segments.size() && segments[first].end() < centre) ++first;
    for (std::size_t i = first; i < segments.size() && segments[i].onset <= centre; ++i) {
      if (centre <= segments[i].end()) {
        a.gamma.row(t).setZero();
        a.gamma(t, column[i]) = 1.0;
        break;
      }
    }
  }
  return a;
}

/// Per-frame UBM statistics. zeroth(t, c) is the UBM component posterior,
/// projected_first(t) = sum_c V_c' Sigma_c^-1 zeroth(t,c) (x_t - m_c) and
/// ubm_loglik(t) = log p(x_t | UBM).
struct FrameStatistics {
  Matrix zeroth;           // T x C
  Matrix projected_first;  // T x R
  Vector ubm_loglik;       // T
};

inline FrameStatistics ComputeFrameStatistics(const Matrix &frames, const EigenvoiceModel &model) {
  model.Validate();
  if (frames.cols() != model.feature_dim()) Fail(ErrorKind::kDimension, "frame dimension differs from model");
  const Eigen::Index t_len = frames.rows(), c_len = model.components(), f = model.feature_dim();
  const Matrix precision = model.diag_covs.cwiseInverse();
  Vector log_const(c_len);
  for (Eigen::Index c = 0; c < c_len; ++c) {
    log_const(c) = std::log(model.weights(c)) -
                   0.5 * (static_cast<double>(f) * kLog2Pi + model.diag_covs.row(c).array().log().sum());
  }
  FrameStatistics st;
  st.zeroth.resize(t_len, c_len);
  st.ubm_loglik.resize(t_len);
  st.projected_first = Matrix::Zero(t_len, model.rank());
  Vector ll(c_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    for (Eigen::Index c = 0; c < c_len; ++c) {
      const RowVector diff = frames.row(t) - model.means.row(c);
      ll(c) = log_const(c) - 0.5 * diff.cwiseProduct(diff).cwiseProduct(precision.row(c)).sum();
    }
    const double total = LogSumExp(ll);
    st.ubm_loglik(t) = total;
    st.zeroth.row(t) = (ll.array() - total).exp().matrix().transpose();
    for (Eigen::Index c = 0; c < c_len; ++c) {
      const Vector scaled = (st.zeroth(t, c) * (frames.row(t) - model.means.row(c)).cwiseProduct(precision.row(c))).transpose();
      st.projected_first.row(t) += (model.Block(c).transpose() * scaled).transpose();
    }
  }
  return st;
}

/// Sums statistics over consecutive blocks of `block` frames (the last block
/// may be shorter).
inline FrameStatistics DownsampleStatistics(const FrameStatistics &st, int block) {
  const Eigen::Index t_len = st.zeroth.rows();
  const Eigen::Index b_len = (t_len + block - 1) / block;
  FrameStatistics out;
  out.zeroth = Matrix::Zero(b_len, st.zeroth.cols());
  out.projected_first = Matrix::Zero(b_len, st.projected_first.cols());
  out.ubm_loglik = Vector::Zero(b_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const Eigen::Index b = t / block;
    out.zeroth.row(b) += st.zeroth.row(t);
    out.projected_first.row(b) += st.projected_first.row(t);
    out.ubm_loglik(b) += st.ubm_loglik(t);
  }
  return out;
}

/// Block-averaged responsibilities.
inline Matrix DownsampleAssignment(const Matrix &gamma, int block) {
  const Eigen::Index t_len = gamma.rows();
  const Eigen::Index b_len = (t_len + block - 1) / block;
  Matrix out = Matrix::Zero(b_len, gamma.cols());
  std::vector<double> n(static_cast<std::size_t>(b_len), 0.0);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    out.row(t / block) += gamma.row(t);
    n[static_cast<std::size_t>(t / block)] += 1.0;
  }
  for (Eigen::Index b = 0; b < b_len; ++b) out.row(b) /= n[static_cast<std::size_t>(b)];
  return out;
}

/// Replicates each block row `block` times, truncated to `total_frames`.
inline Matrix UpsampleAssignment(const Matrix &blocks, int block, Eigen::Index total_frames) {
  Matrix out(total_frames, blocks.cols());
  for (Eigen::Index t = 0; t < total_frames; ++t) out.row(t) = blocks.row(t / block);
  return out;
}

/// V_c' Sigma_c^-1 V_c for every component.
inline std::vector<Matrix> ComponentPrecisions(const EigenvoiceModel &model) {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(model.components()));
  for (Eigen::Index c = 0; c < model.components(); ++c) {
    const auto block = model.Block(c);
    out.push_back(Symmetrized(block.transpose() * model.diag_covs.row(c).cwiseInverse().asDiagonal() * block));
  }
  return out;
}

/// Updates each q(y_s) from the responsibilities `gamma` (blocks x S) and
/// returns the per-block, per-speaker expected log-likelihoods.
inline Matrix EigenvoiceEmissions(const FrameStatistics &st, const Matrix &gamma, const EigenvoiceModel &model,
                                  double acoustic_scale) {
  const auto precisions = ComponentPrecisions(model);
  const Eigen::Index r = model.rank(), s_len = gamma.cols(), c_len = model.components();
  const Matrix speaker_zeroth = gamma.transpose() * st.zeroth;          // S x C
  const Matrix speaker_first = gamma.transpose() * st.projected_first;  // S x R
  Matrix emissions(gamma.rows(), s_len);
  for (Eigen::Index s = 0; s < s_len; ++s) {
    Matrix prec = Matrix::Identity(r, r);
    for (Eigen::Index c = 0; c < c_len; ++c) prec += acoustic_scale * speaker_zeroth(s, c) * precisions[static_cast<std::size_t>(c)];
    const Matrix cov = InverseSpd(Symmetrized(prec));
    const Vector mean = acoustic_scale * cov * speaker_first.row(s).transpose();
    const Matrix second = cov + mean * mean.transpose();
    Vector trace_term(c_len);
    for (Eigen::Index c = 0; c < c_len; ++c) trace_term(c) = precisions[static_cast<std::size_t>(c)].cwiseProduct(second).sum();
    emissions.col(s) = st.ubm_loglik + acoustic_scale * (st.projected_first * mean - 0.5 * st.zeroth * trace_term);
  }
  if (!emissions.allFinite()) Fail(ErrorKind::kNumerical, "non-finite frame likelihoods");
  return emissions;
}

/// Log transition matrix over S speakers, each a left-to-right chain of
/// `min_duration` states. Leaving the last state of a chain jumps to the first
/// state of speaker s' with probability (1 - loop) * prior(s').
inline Matrix ChainTransition(double loop_probability, const Vector &prior, int min_duration) {
  const Eigen::Index s_len = prior.size(), m = min_duration, n = s_len * m;
  Matrix tr = Matrix::Zero(n, n);
  for (Eigen::Index s = 0; s < s_len; ++s) {
    for (Eigen::Index k = 0; k + 1 < m; ++k) tr(s * m + k, s * m + k + 1) = 1.0;
    const Eigen::Index last = s * m + m - 1;
    tr(last, last) = loop_probability;
    for (Eigen::Index s2 = 0; s2 < s_len; ++s2) tr(last, s2 * m) += (1.0 - loop_probability) * prior(s2);
  }
  return tr.array().log().matrix();
}

/// Runs the chained-state HMM on per-speaker emissions and folds the chain
/// posteriors back to speakers.
inline Matrix MinDurationPosteriors(const Matrix &emissions, double loop_probability, const Vector &prior,
                                    int min_duration) {
  const Eigen::Index s_len = emissions.cols(), m = min_duration;
  Matrix expanded(emissions.rows(), s_len * m);
  Vector log_initial = Vector::Constant(s_len * m, -std::numeric_limits<double>::infinity());
  for (Eigen::Index s = 0; s < s_len; ++s) {
    for (Eigen::Index k = 0; k < m; ++k) expanded.col(s * m + k) = emissions.col(s);
    log_initial(s * m) = std::log(prior(s));
  }
  const auto fb = ForwardBackward(expanded, ChainTransition(loop_probability, prior, min_duration), log_initial);
  if (m == 1) return fb.posteriors;
  Matrix out(emissions.rows(), s_len);
  for (Eigen::Index s = 0; s < s_len; ++s) out.col(s) = fb.posteriors.middleCols(s * m, m).rowwise().sum();
  for (Eigen::Index t = 0; t < out.rows(); ++t) out.row(t) /= out.row(t).sum();
  return out;
}

/// Single VB pass: downsample, one speaker-model update, one forward-backward
/// with min-duration chains, upsample by block replication. The speaker set
/// and its uniform prior stay fixed.
inline SoftAssignment SingleVbPass(const Matrix &frames, const SoftAssignment &init, const EigenvoiceModel &model,
                                   const FrameVbConfig &config) {
  config.Validate();
  if (init.frames() != frames.rows()) Fail(ErrorKind::kDimension, "initial assignment rows differ from frame count");
  const Eigen::Index s_len = init.speakers();
  if (s_len < 1) Fail(ErrorKind::kDimension, "no speakers in initial assignment");
  if (frames.rows() == 0) return init;
  if (s_len == 1) return {Matrix::Ones(frames.rows(), 1)};
  const auto stats = DownsampleStatistics(ComputeFrameStatistics(frames, model), config.downsample);
  const Matrix q0 = DownsampleAssignment(init.gamma, config.downsample);
  const Matrix emissions = EigenvoiceEmissions(stats, q0, model, config.acoustic_scale);
  const Vector prior = Vector::Constant(s_len, 1.0 / static_cast<double>(s_len));
  const Matrix q = MinDurationPosteriors(emissions, config.loop_probability, prior, config.min_duration);
  return {UpsampleAssignment(q, config.downsample, frames.rows())};
}

/// File format: "eigenvoice,C,F,R", weights, C mean rows, C variance rows,
/// then C*F rows of V.
inline void SaveEigenvoice(const EigenvoiceModel &model, const std::string &path) {
  auto out = text::OpenOut(path);
  out << "eigenvoice," << model.components() << ',' << model.feature_dim() << ',' << model.rank() << '\n';
  out << text::JoinRow(model.weights) << '\n';
  text::WriteMatrixRows(out, model.means);
  text::WriteMatrixRows(out, model.diag_covs);
  text::WriteMatrixRows(out, model.v);
}

inline EigenvoiceModel LoadEigenvoice(const std::string &path) {
  text::CsvBlockReader reader(path);
  const auto header = reader.NextFields();
  if (header.size() != 4 || header[0] != "eigenvoice") {
    Fail(ErrorKind::kFormat, path + ": missing 'eigenvoice,C,F,R' header");
  }
  const long c = text::ParseInt(header[1], path, reader.line_number());
  const long f = text::ParseInt(header[2], path, reader.line_number());
  const long r = text::ParseInt(header[3], path, reader.line_number());
  if (c <= 0 || f <= 0 || r <= 0) Fail(ErrorKind::kFormat, path + ": non-positive dimension in header");
  EigenvoiceModel model;
  model.weights = reader.NextRow(c);
  model.means = reader.NextMatrix(c, f);
  model.diag_covs = reader.NextMatrix(c, f);
  model.v = reader.NextMatrix(c * f, r);
  if (!reader.AtEnd()) Fail(ErrorKind::kFormat, path + ": trailing lines after eigenvoice blocks");
  model.Validate();
  return model;
}

/// Frame feature CSV: one frame per line, F comma-separated values.
inline Matrix ReadFrameFeatures(const std::string &path) {
  std::vector<Vector> rows;
  Eigen::Index dim = -1;
  for (const auto &line : text::ReadLines(path)) {
    const auto fields = text::Split(line.text, ',');
    if (dim < 0) dim = static_cast<Eigen::Index>(fields.size());
    if (static_cast<Eigen::Index>(fields.size()) != dim) {
      Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": inconsistent feature dimension");
    }
    Vector row(dim);
    for (Eigen::Index i = 0; i < dim; ++i) row(i) = text::ParseDouble(fields[static_cast<std::size_t>(i)], path, line.number);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) Fail(ErrorKind::kEmptyInput, path + ": no frames");
  return RowsToMatrix(rows);
}

inline void WriteFrameFeatures(const Matrix &frames, const std::string &path) {
  auto out = text::OpenOut(path);
  text::WriteMatrixRows(out, frames);
}

}  // namespace vbdiar

#endif  // VBDIAR_FRAME_VB_HPP_
