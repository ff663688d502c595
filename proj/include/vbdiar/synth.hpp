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


#ifndef VBDIAR_SYNTH_HPP_
#define VBDIAR_SYNTH_HPP_

// Samplers that invert the generative assumptions of the clustering models,
// plus a small on-disk corpus builder. Everything is a pure function of the
// seed (see rng.hpp for the generator).

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "vbdiar/ahc.hpp"
#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/frame_vb.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/overlap.hpp"
#include "vbdiar/plda.hpp"
#include "vbdiar/rng.hpp"
#include "vbdiar/transforms.hpp"

namespace vbdiar {

/// Draw from N(mean, cov) using a symmetric square root of cov (so a zero
/// covariance is allowed).
inline Vector SampleGaussian(Rng &rng, const Vector &mean, const Matrix &cov_root) {
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.Normal();
  return mean + cov_root * z;
}

/// Random orthogonal matrix (QR of a Gaussian matrix, sign-fixed).
inline Matrix RandomRotation(Rng &rng, Eigen::Index dim) {
  Matrix g(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) g(i, j) = rng.Normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// PLDA with across + within = identity in a random basis and per-direction
/// across/within ratios spread evenly over [separation, 2 * separation].
inline PldaModel RandomPldaModel(Eigen::Index dim, double separation, std::uint64_t seed) {
  if (dim < 1 || !(separation > 0.0)) Fail(ErrorKind::kConfig, "need dim >= 1 and positive separation");
  Rng rng(seed);
  const Matrix q = RandomRotation(rng, dim);
  Vector across(dim), within(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double ratio = separation * (1.0 + (dim > 1 ? static_cast<double>(d) / static_cast<double>(dim - 1) : 0.0));
    across(d) = ratio / (1.0 + ratio);
    within(d) = 1.0 / (1.0 + ratio);
  }
  PldaModel model;
  model.mean = Vector::Zero(dim);
  model.across_class = Symmetrized(q * across.asDiagonal() * q.transpose());
  model.within_class = Symmetrized(q * within.asDiagonal() * q.transpose());
  return model;
}

/// Speaker sequence from a first-order chain that stays with probability
/// `loop` and otherwise jumps to a uniformly drawn different speaker.
inline std::vector<int> SampleSpeakerChain(Rng &rng, int n_speakers, Eigen::Index length, double loop) {
  std::vector<int> z(static_cast<std::size_t>(length));
  if (length == 0) return z;
  z[0] = static_cast<int>(rng.Below(static_cast<std::uint64_t>(n_speakers)));
  for (Eigen::Index t = 1; t < length; ++t) {
    int next = z[static_cast<std::size_t>(t - 1)];
    if (n_speakers > 1 && rng.Uniform() >= loop) {
      const auto step = 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(n_speakers - 1)));
      next = (next + step) % n_speakers;
    }
    z[static_cast<std::size_t>(t)] = next;
  }
  return z;
}

struct SyntheticRecording {
  RecordingEmbeddings embeddings;
  ClusterLabels truth;              // relabelled by first appearance
  std::vector<int> speaker_index;   // raw speaker index per segment
  Matrix speaker_means;             // n_speakers x D
};

/// Embeddings on a `shift` grid with `window`-second windows. Speaker means are
/// drawn from N(mean, across_class) and observations from N(mean_s, within_class).
inline SyntheticRecording SampleRecording(const PldaModel &model, int n_speakers, Eigen::Index n_segments,
                                          double loop_probability, std::uint64_t seed, double window = 1.5,
                                          double shift = 0.25) {
  if (n_speakers < 1) Fail(ErrorKind::kConfig, "need at least one speaker");
  const Eigen::Index d = model.dim();
  Rng rng(seed);
  Rng speaker_rng = rng.Split(1);
  Rng chain_rng = rng.Split(2);
  Rng noise_rng = rng.Split(3);
  const Matrix across_root = SqrtPsd(model.across_class);
  const Matrix within_root = SqrtPsd(model.within_class);
  SyntheticRecording out;
  out.speaker_means.resize(n_speakers, d);
  for (int s = 0; s < n_speakers; ++s) out.speaker_means.row(s) = SampleGaussian(speaker_rng, model.mean, across_root).transpose();
  out.speaker_index = SampleSpeakerChain(chain_rng, n_speakers, n_segments, loop_probability);
  out.embeddings.recording_id = "synth";
  out.embeddings.dim = d;
  out.embeddings.segments.resize(static_cast<std::size_t>(n_segments));
  for (Eigen::Index t = 0; t < n_segments; ++t) {
    auto &seg = out.embeddings.segments[static_cast<std::size_t>(t)];
    seg.onset = static_cast<double>(t) * shift;
    seg.duration = window;
    const int s = out.speaker_index[static_cast<std::size_t>(t)];
    seg.vector = SampleGaussian(noise_rng, out.speaker_means.row(s).transpose(), within_root);
  }
  out.truth = Relabel(out.speaker_index);
  return out;
}

/// Eigenvoice model with UBM means drawn from N(0, mean_spread^2 I),
/// variances in [0.5, 1.5) and a random subspace whose columns have norm about
/// `separation` per component.
inline EigenvoiceModel RandomEigenvoiceModel(Eigen::Index components, Eigen::Index feature_dim, Eigen::Index rank,
                                             double separation, std::uint64_t seed, double mean_spread = 10.0) {
  Rng rng(seed);
  EigenvoiceModel model;
  model.weights = Vector::Constant(components, 1.0 / static_cast<double>(components));
  model.means.resize(components, feature_dim);
  model.diag_covs.resize(components, feature_dim);
  model.v.resize(components * feature_dim, rank);
  for (Eigen::Index c = 0; c < components; ++c) {
    for (Eigen::Index f = 0; f < feature_dim; ++f) {
      model.means(c, f) = mean_spread * rng.Normal();
      model.diag_covs(c, f) = 0.5 + rng.Uniform();
    }
  }
  const double scale = separation / std::sqrt(static_cast<double>(feature_dim));
  for (Eigen::Index i = 0; i < model.v.rows(); ++i) {
    for (Eigen::Index r = 0; r < rank; ++r) model.v(i, r) = scale * rng.Normal();
  }
  return model;
}

/// Frames for a given speaker sequence; speaker s uses the GMM whose means
/// are shifted by V y_s. Negative labels give plain UBM frames.
inline Matrix SampleFramesForLabels(const EigenvoiceModel &model, const Matrix &speaker_coords,
                                    const std::vector<int> &labels, Rng &rng) {
  const Eigen::Index f = model.feature_dim();
  const auto t_len = static_cast<Eigen::Index>(labels.size());
  Matrix frames(t_len, f);
  std::vector<double> cdf(static_cast<std::size_t>(model.components()));
  double acc = 0.0;
  for (Eigen::Index c = 0; c < model.components(); ++c) cdf[static_cast<std::size_t>(c)] = (acc += model.weights(c));
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const double u = rng.Uniform() * acc;
    Eigen::Index c = 0;
    while (c + 1 < model.components() && cdf[static_cast<std::size_t>(c)] <= u) ++c;
    RowVector mean = model.means.row(c);
    const int s = labels[static_cast<std::size_t>(t)];
    if (s >= 0) mean += (model.Block(c) * speaker_coords.row(s).transpose()).transpose();
    for (Eigen::Index k = 0; k < f; ++k) frames(t, k) = mean(k) + std::sqrt(model.diag_covs(c, k)) * rng.Normal();
  }
  return frames;
}

struct SyntheticFrames {
  Matrix frames;               // T x F
  std::vector<int> labels;     // raw speaker index per frame
  Matrix speaker_coords;       // n_speakers x R
};

/// Frames from a speaker chain with y_s ~ N(0, I).
inline SyntheticFrames SampleFrameRecording(const EigenvoiceModel &model, int n_speakers, Eigen::Index n_frames,
                                            double loop_probability, std::uint64_t seed) {
  if (n_speakers < 1) Fail(ErrorKind::kConfig, "need at least one speaker");
  Rng rng(seed);
  Rng coord_rng = rng.Split(1);
  Rng chain_rng = rng.Split(2);
  Rng frame_rng = rng.Split(3);
  SyntheticFrames out;
  out.speaker_coords.resize(n_speakers, model.rank());
  for (int s = 0; s < n_speakers; ++s) {
    for (Eigen::Index r = 0; r < model.rank(); ++r) out.speaker_coords(s, r) = coord_rng.Normal();
  }
  out.labels = SampleSpeakerChain(chain_rng, n_speakers, n_frames, loop_probability);
  out.frames = SampleFramesForLabels(model, out.speaker_coords, out.labels, frame_rng);
  return out;
}

// ---------------------------------------------------------------------------
// On-disk corpus

struct SynthCorpusOptions {
  int recordings = 5;
  int min_speakers = 2;
  int max_speakers = 4;
  Eigen::Index segments = 240;      // embeddings per recording
  Eigen::Index dim = 16;
  double separation = 16.0;
  double loop_probability = 0.97;   // per 0.25 s step
  double overlap_rate = 0.5;        // fraction of speaker changes that overlap
  double overlap_seconds = 0.5;
  double overlap_signature = 3.0;   // shift of overlapped embeddings along a fixed direction
  Eigen::Index components = 4;
  Eigen::Index feature_dim = 2;
  Eigen::Index rank = 2;
  double frame_separation = 4.0;
  double frame_rate = 100.0;
  std::uint64_t seed = 1;
};

/// Writes a self-consistent corpus under `dir`:
///   emb/<rec>.csv, vad/<rec>.lab, feats/<rec>.csv, ref/<rec>.rttm, ref.rttm,
///   plda.csv, transform.csv (identity), eigenvoice.csv, overlap.csv and
///   synth.conf (pipeline settings suited to the corpus).
/// Speaker changes are optionally preceded by `overlap_seconds` in which the
/// incoming speaker already talks; embeddings owning mostly overlapped time
/// are replaced by a two-speaker mixture pushed along a fixed direction, and
/// a logistic-regression detector is trained on extra recordings generated
/// the same way. Returns the recording ids.
inline std::vector<std::string> WriteSyntheticCorpus(const SynthCorpusOptions &opt, const std::string &dir) {
  namespace fs = std::filesystem;
  if (opt.recordings < 1 || opt.min_speakers < 1 || opt.max_speakers < opt.min_speakers || opt.segments < 2) {
    Fail(ErrorKind::kConfig, "invalid synthetic corpus options");
  }
  for (const char *sub : {"emb", "vad", "feats", "ref"}) fs::create_directories(fs::path(dir) / sub);
  Rng root(opt.seed);
  const PldaModel plda = RandomPldaModel(opt.dim, opt.separation, root.Split(100).NextU64());
  const EigenvoiceModel voice =
      RandomEigenvoiceModel(opt.components, opt.feature_dim, opt.rank, opt.frame_separation, root.Split(101).NextU64());
  Rng dir_rng = root.Split(102);
  Vector signature(opt.dim);
  for (Eigen::Index d = 0; d < opt.dim; ++d) signature(d) = dir_rng.Normal();
  signature *= opt.overlap_signature / signature.norm();
  const Matrix within_root = SqrtPsd(plda.within_class);
  constexpr double kWindow = 1.5, kShift = 0.25;

  struct Built {
    RecordingEmbeddings emb;
    DiarizationHypothesis ref;
    std::vector<int> overlapped;
    std::vector<int> primary;  // truth label per embedding
    Matrix speaker_means;
  };
  auto build = [&](const std::string &id, std::uint64_t seed) {
    Rng rng(seed);
    const int span = opt.max_speakers - opt.min_speakers + 1;
    const int k = opt.min_speakers + static_cast<int>(rng.Below(static_cast<std::uint64_t>(span)));
    auto rec = SampleRecording(plda, k, opt.segments, opt.loop_probability, rng.Split(1).NextU64(), kWindow, kShift);
    Built b;
    b.emb = std::move(rec.embeddings);
    b.emb.recording_id = id;
    b.primary = rec.truth.labels;
    b.speaker_means = rec.speaker_means;
    std::vector<TimeSpan> spans;
    for (const auto &s : b.emb.segments) spans.push_back({s.onset, s.duration});
    std::vector<std::string> names;
    for (int s = 0; s < rec.truth.num_clusters(); ++s) names.push_back(id + "_spk" + std::to_string(s));
    b.ref = LabelsToHypothesis(id, spans, b.primary, names);

    // Early starts of incoming speakers.
    Rng ov_rng = rng.Split(2);
    std::vector<SpeakerSegment> extra;
    const auto turns = b.ref.segments;
    for (std::size_t i = 1; i < turns.size(); ++i) {
      if (ov_rng.Uniform() >= opt.overlap_rate) continue;
      const double start = std::max(turns[i - 1].onset, turns[i].onset - opt.overlap_seconds);
      if (turns[i].onset - start > 1e-9) extra.push_back({start, turns[i].onset - start, turns[i].speaker});
    }
    for (const auto &e : extra) {
      // Extend the incoming speaker's turn backwards rather than adding a touching segment.
      for (auto &seg : b.ref.segments) {
        if (seg.speaker == e.speaker && std::abs(seg.onset - e.end()) < 1e-9) {
          seg.duration += e.duration;
          seg.onset = e.onset;
          break;
        }
      }
    }
    SortSegments(b.ref.segments);
    b.overlapped = OverlapTrainingLabels(OwnedSpans(spans), b.ref);
    Rng mix_rng = rng.Split(3);
    for (std::size_t t = 0; t < b.emb.segments.size(); ++t) {
      if (!b.overlapped[t]) continue;
      // Second speaker: the one whose turn starts next.
      int other = b.primary[t];
      for (std::size_t u = t + 1; u < b.primary.size(); ++u) {
        if (b.primary[u] != b.primary[t]) {
          other = b.primary[u];
          break;
        }
      }
      const Vector second = SampleGaussian(mix_rng, b.speaker_means.row(other).transpose(), within_root);
      b.emb.segments[t].vector = 0.5 * (b.emb.segments[t].vector + second) + signature;
    }
    return b;
  };

  // Overlap detector trained on held-out recordings.
  {
    std::vector<Vector> xs;
    std::vector<int> ys;
    for (int i = 0; i < 3; ++i) {
      const auto b = build("train" + std::to_string(i), root.Split(200 + static_cast<std::uint64_t>(i)).NextU64());
      for (std::size_t t = 0; t < b.emb.segments.size(); ++t) {
        xs.push_back(b.emb.segments[t].vector);
        ys.push_back(b.overlapped[t]);
      }
    }
    SaveLogReg(TrainLogReg(RowsToMatrix(xs), ys, 1.0), (fs::path(dir) / "overlap.csv").string());
  }

  std::vector<std::string> ids;
  std::string all_ref;
  for (int r = 0; r < opt.recordings; ++r) {
    char name[32];
    std::snprintf(name, sizeof(name), "rec%02d", r + 1);
    const std::string id = name;
    Rng rec_rng = root.Split(300 + static_cast<std::uint64_t>(r));
    const auto b = build(id, rec_rng.NextU64());
    WriteEmbeddings(b.emb, (fs::path(dir) / "emb" / (id + ".csv")).string());
    const double end = b.emb.segments.back().onset + b.emb.segments.back().duration;
    WriteVad({{0.0, end}}, (fs::path(dir) / "vad" / (id + ".lab")).string());
    WriteRttm(b.ref, (fs::path(dir) / "ref" / (id + ".rttm")).string());
    all_ref += FormatRttm(b.ref);

    // Frame features follow the primary speaker at each frame centre.
    const auto total = static_cast<Eigen::Index>(std::ceil(end * opt.frame_rate - 1e-9));
    std::vector<TimeSpan> spans;
    for (const auto &s : b.emb.segments) spans.push_back({s.onset, s.duration});
    const auto owned = OwnedSpans(spans);
    std::vector<int> frame_labels(static_cast<std::size_t>(total), 0);
    std::size_t seg = 0;
    for (Eigen::Index t = 0; t < total; ++t) {
      const double centre = (static_cast<double>(t) + 0.5) / opt.frame_rate;
      while (seg + 1 < owned.size() && owned[seg].end() <= centre) ++seg;
      frame_labels[static_cast<std::size_t>(t)] = b.primary[seg];
    }
    const int k = *std::max_element(b.primary.begin(), b.primary.end()) + 1;
    Rng frame_rng = rec_rng.Split(7);
    Matrix coords(k, opt.rank);
    for (int s = 0; s < k; ++s) {
      for (Eigen::Index q = 0; q < opt.rank; ++q) coords(s, q) = frame_rng.Normal();
    }
    WriteFrameFeatures(SampleFramesForLabels(voice, coords, frame_labels, frame_rng),
                       (fs::path(dir) / "feats" / (id + ".csv")).string());
    ids.push_back(id);
  }
  {
    auto out = text::OpenOut((fs::path(dir) / "ref.rttm").string());
    out << all_ref;
  }
  SavePlda(plda, (fs::path(dir) / "plda.csv").string());
  SaveTransform(AffineTransform::Identity(opt.dim), (fs::path(dir) / "transform.csv").string());
  SaveEigenvoice(voice, (fs::path(dir) / "eigenvoice.csv").string());
  {
    // Speaker variance spans only K-1 directions, so keep most of it.
    auto out = text::OpenOut((fs::path(dir) / "synth.conf").string());
    out << "pca_var = 0.9\n";
  }
  return ids;
}

}  // namespace vbdiar

#endif  // VBDIAR_SYNTH_HPP_
