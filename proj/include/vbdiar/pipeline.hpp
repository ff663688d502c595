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


#ifndef VBDIAR_PIPELINE_HPP_
#define VBDIAR_PIPELINE_HPP_

// Per-recording diarization: whiten -> length-normalize -> PCA -> PLDA scoring
// -> UPGMA -> [VB-HMM on LDA-projected embeddings] -> [frame-level pass]
// -> [overlap labelling]. Presets bundle the stage settings of each system.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vbdiar/ahc.hpp"
#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/frame_vb.hpp"
#include "vbdiar/lda.hpp"
#include "vbdiar/overlap.hpp"
#include "vbdiar/plda.hpp"
#include "vbdiar/text.hpp"
#include "vbdiar/transforms.hpp"
#include "vbdiar/vbhmm.hpp"

namespace vbdiar {

enum class WhitenScope { kCorpus, kRecording, kNone };

struct PipelineConfig {
  std::string preset = "system1";
  WhitenScope whiten = WhitenScope::kCorpus;
  double pca_var = 0.35;
  bool fixed_threshold = false;
  double threshold = 0.0;        // used when fixed_threshold
  double threshold_bias = 0.0;   // added to the calibrated threshold
  double plda_weight = 0.5;      // weight of --plda when interpolating with --plda2
  bool adapt_plda = false;
  double adapt_threshold = 0.0;
  int adapt_iterations = 10;
  bool vb = true;
  int lda_dim = 220;
  VbConfig vb_config;
  bool frame_vb = true;
  FrameVbConfig frame_vb_config;
  double frame_rate = 100.0;
  bool overlap = true;
  double overlap_threshold = 0.7;
  double overlap_frame_step = 0.01;
  int workers = 1;

  void Validate() const {
    if (!(pca_var > 0.0 && pca_var <= 1.0)) Fail(ErrorKind::kConfig, "pca_var must lie in (0, 1]");
    if (!(plda_weight >= 0.0 && plda_weight <= 1.0)) Fail(ErrorKind::kConfig, "plda_weight must lie in [0, 1]");
    if (adapt_iterations < 1) Fail(ErrorKind::kConfig, "adapt.iterations must be positive");
    if (lda_dim < 1) Fail(ErrorKind::kConfig, "lda_dim must be positive");
    if (!(frame_rate > 0.0)) Fail(ErrorKind::kConfig, "frame_rate must be positive");
    if (!(overlap_threshold >= 0.0 && overlap_threshold < 1.0)) Fail(ErrorKind::kConfig, "overlap.threshold must lie in [0, 1)");
    if (!(overlap_frame_step > 0.0)) Fail(ErrorKind::kConfig, "overlap.frame_step must be positive");
    if (workers < 1) Fail(ErrorKind::kConfig, "workers must be positive");
    if (vb) vb_config.Validate();
    if (frame_vb) frame_vb_config.Validate();
  }

  /// Every setting as key = value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> KeyValues() const {
    auto num = [](double v) { return text::FormatExact(v); };
    auto flag = [](bool b) { return std::string(b ? "on" : "off"); };
    const char *scope = whiten == WhitenScope::kCorpus ? "corpus" : whiten == WhitenScope::kRecording ? "recording" : "none";
    return {
        {"preset", preset},
        {"whiten", scope},
        {"pca_var", num(pca_var)},
        {"threshold_mode", fixed_threshold ? "fixed" : "calibrated"},
        {"threshold", num(threshold)},
        {"threshold_bias", num(threshold_bias)},
        {"plda_weight", num(plda_weight)},
        {"adapt", flag(adapt_plda)},
        {"adapt.threshold", num(adapt_threshold)},
        {"adapt.iterations", std::to_string(adapt_iterations)},
        {"vb", flag(vb)},
        {"lda_dim", std::to_string(lda_dim)},
        {"vb.loop_probability", num(vb_config.loop_probability)},
        {"vb.acoustic_scale", num(vb_config.acoustic_scale)},
        {"vb.speaker_regularization", num(vb_config.speaker_regularization)},
        {"vb.init_smoothing", num(vb_config.init_smoothing)},
        {"vb.max_iterations", std::to_string(vb_config.max_iterations)},
        {"vb.elbo_tolerance", num(vb_config.elbo_tolerance)},
        {"vb.prune_threshold", num(vb_config.prune_threshold)},
        {"frame_vb", flag(frame_vb)},
        {"frame_vb.acoustic_scale", num(frame_vb_config.acoustic_scale)},
        {"frame_vb.loop_probability", num(frame_vb_config.loop_probability)},
        {"frame_vb.min_duration", std::to_string(frame_vb_config.min_duration)},
        {"frame_vb.downsample", std::to_string(frame_vb_config.downsample)},
        {"frame_rate", num(frame_rate)},
        {"overlap", flag(overlap)},
        {"overlap.threshold", num(overlap_threshold)},
        {"overlap.frame_step", num(overlap_frame_step)},
        {"workers", std::to_string(workers)},
    };
  }

  void Set(const std::string &key, const std::string &value) {
    auto as_double = [&] {
      double v = 0.0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        Fail(ErrorKind::kConfig, "'" + key + "' expects a number, got '" + value + "'");
      }
      return v;
    };
    auto as_int = [&] {
      int v = 0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
      if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        Fail(ErrorKind::kConfig, "'" + key + "' expects an integer, got '" + value + "'");
      }
      return v;
    };
    auto as_flag = [&] {
      if (value == "on" || value == "true" || value == "1") return true;
      if (value == "off" || value == "false" || value == "0") return false;
      Fail(ErrorKind::kConfig, "'" + key + "' expects on/off, got '" + value + "'");
    };
    if (key == "preset") {
      preset = value;
    } else if (key == "whiten") {
      if (value == "corpus") {
        whiten = WhitenScope::kCorpus;
      } else if (value == "recording") {
        whiten = WhitenScope::kRecording;
      } else if (value == "none") {
        whiten = WhitenScope::kNone;
      } else {
        Fail(ErrorKind::kConfig, "whiten must be corpus, recording or none");
      }
    } else if (key == "pca_var") {
      pca_var = as_double();
    } else if (key == "threshold_mode") {
      if (value != "fixed" && value != "calibrated") Fail(ErrorKind::kConfig, "threshold_mode must be fixed or calibrated");
      fixed_threshold = value == "fixed";
    } else if (key == "threshold") {
      threshold = as_double();
    } else if (key == "threshold_bias") {
      threshold_bias = as_double();
    } else if (key == "plda_weight") {
      plda_weight = as_double();
    } else if (key == "adapt") {
      adapt_plda = as_flag();
    } else if (key == "adapt.threshold") {
      adapt_threshold = as_double();
    } else if (key == "adapt.iterations") {
      adapt_iterations = as_int();
    } else if (key == "vb") {
      vb = as_flag();
    } else if (key == "lda_dim") {
      lda_dim = as_int();
    } else if (key == "vb.loop_probability") {
      vb_config.loop_probability = as_double();
    } else if (key == "vb.acoustic_scale") {
      vb_config.acoustic_scale = as_double();
    } else if (key == "vb.speaker_regularization") {
      vb_config.speaker_regularization = as_double();
    } else if (key == "vb.init_smoothing") {
      vb_config.init_smoothing = as_double();
    } else if (key == "vb.max_iterations") {
      vb_config.max_iterations = as_int();
    } else if (key == "vb.elbo_tolerance") {
      vb_config.elbo_tolerance = as_double();
    } else if (key == "vb.prune_threshold") {
      vb_config.prune_threshold = as_double();
    } else if (key == "frame_vb") {
      frame_vb = as_flag();
    } else if (key == "frame_vb.acoustic_scale") {
      frame_vb_config.acoustic_scale = as_double();
    } else if (key == "frame_vb.loop_probability") {
      frame_vb_config.loop_probability = as_double();
    } else if (key == "frame_vb.min_duration") {
      frame_vb_config.min_duration = as_int();
    } else if (key == "frame_vb.downsample") {
      frame_vb_config.downsample = as_int();
    } else if (key == "frame_rate") {
      frame_rate = as_double();
    } else if (key == "overlap") {
      overlap = as_flag();
    } else if (key == "overlap.threshold") {
      overlap_threshold = as_double();
    } else if (key == "overlap.frame_step") {
      overlap_frame_step = as_double();
    } else if (key == "workers") {
      workers = as_int();
    } else {
      Fail(ErrorKind::kConfig, "unknown configuration key '" + key + "'");
    }
  }
};

/// Named system configurations. Settings not listed for a system are those
/// of system1.
inline PipelineConfig Preset(const std::string &name) {
  PipelineConfig c;
  c.preset = name;
  if (name == "system1") return c;
  if (name == "mcclane") {
    c.pca_var = 0.22;
    c.threshold_bias = 0.2;
    c.lda_dim = 250;
    c.vb_config.loop_probability = 0.95;
    c.vb_config.speaker_regularization = 12.0;
    return c;
  }
  if (name == "system2" || name == "system2b") {
    c.pca_var = 0.30;
    c.threshold_bias = 0.2;
    c.lda_dim = 250;
    c.vb_config.loop_probability = 0.7;
    c.vb_config.speaker_regularization = 12.0;
    c.overlap_threshold = 0.8;
    c.overlap = name == "system2";
    return c;
  }
  if (name == "system3" || name == "system4") {
    c.fixed_threshold = true;
    c.threshold = name == "system3" ? 2.1 : 1.8;
    c.adapt_plda = true;
    c.vb = false;
    c.frame_vb = false;
    c.overlap = false;
    return c;
  }
  Fail(ErrorKind::kConfig, "unknown preset '" + name + "' (system1, mcclane, system2, system2b, system3, system4)");
}

/// Applies "key = value" lines ('#' starts a comment) on top of `base`. A
/// "preset" line resets everything to that preset first, so it should come
/// first.
inline PipelineConfig ApplyConfigText(const std::string &content, PipelineConfig base,
                                      const std::string &origin = "config") {
  std::istringstream in(content);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trimmed = text::Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) Fail(ErrorKind::kConfig, text::Where(origin, n) + ": expected key = value");
    const std::string key(text::Trim(trimmed.substr(0, eq)));
    const std::string value(text::Trim(trimmed.substr(eq + 1)));
    if (key == "preset") {
      base = Preset(value);
    } else {
      base.Set(key, value);
    }
  }
  return base;
}

inline std::string FormatConfig(const PipelineConfig &config) {
  std::string out;
  for (const auto &[k, v] : config.KeyValues()) out += k + " = " + v + '\n';
  return out;
}

// ---------------------------------------------------------------------------

struct RecordingInput {
  std::string id;
  std::vector<RecordingEmbeddings> channels;  // first channel drives timing, VB and overlap
  std::vector<SpeechRegion> vad;
  std::optional<Matrix> frames;               // whole-recording frame features at frame_rate
};

struct PipelineModels {
  PldaModel plda;                              // in the whitened, length-normalized space
  std::vector<AffineTransform> whiten;         // one per channel (corpus scope or loaded)
  std::optional<EigenvoiceModel> eigenvoice;
  std::optional<LogRegModel> overlap;
};

struct RecordingReport {
  std::string id;
  Eigen::Index embeddings = 0;
  Eigen::Index pca_dim = 0;
  double threshold = 0.0;
  bool calibrated = false;
  int ahc_clusters = 0;
  int vb_speakers = 0;
  int vb_iterations = 0;
  int overlap_regions = 0;
  std::size_t overlap_added = 0;
};

struct RecordingOutput {
  DiarizationHypothesis hypothesis;
  RecordingReport report;
};

/// Checks stage prerequisites before any processing starts.
inline void CheckConfigAgainstInputs(const PipelineConfig &config, bool have_frames, bool have_eigenvoice,
                                     bool have_overlap_model) {
  config.Validate();
  if (config.frame_vb && !have_eigenvoice) Fail(ErrorKind::kConfig, "frame_vb is on but no eigenvoice model was given");
  if (config.frame_vb && !have_frames) Fail(ErrorKind::kConfig, "frame_vb is on but no frame features were given");
  if (config.overlap && !have_overlap_model) Fail(ErrorKind::kConfig, "overlap is on but no overlap model was given");
}

namespace detail {

inline void CheckAligned(const RecordingInput &in) {
  if (in.channels.empty()) Fail(ErrorKind::kEmptyInput, in.id + ": no embeddings");
  const auto &ref = in.channels.front();
  for (std::size_t c = 1; c < in.channels.size(); ++c) {
    const auto &other = in.channels[c];
    if (other.size() != ref.size()) Fail(ErrorKind::kFormat, in.id + ": channels have different segment counts");
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (std::abs(other.segments[i].onset - ref.segments[i].onset) > 1e-6 ||
          std::abs(other.segments[i].duration - ref.segments[i].duration) > 1e-6) {
        Fail(ErrorKind::kFormat, in.id + ": channels are not time-aligned");
      }
    }
  }
}

inline Matrix Preprocess(const RecordingEmbeddings &channel, WhitenScope scope, const AffineTransform *corpus) {
  const Matrix raw = channel.AsMatrix();
  switch (scope) {
    case WhitenScope::kCorpus:
      return LengthNormalizeRows(corpus->ApplyRows(raw));
    case WhitenScope::kRecording:
      return LengthNormalizeRows(EstimateCenterWhiten(raw).ApplyRows(raw));
    case WhitenScope::kNone:
      return LengthNormalizeRows(raw);
  }
  return raw;
}

/// Frames whose centre lies inside a speech region.
inline std::vector<Eigen::Index> SpeechFrames(const std::vector<SpeechRegion> &vad, double frame_rate,
                                              Eigen::Index total) {
  std::vector<Eigen::Index> out;
  std::size_t r = 0;
  for (Eigen::Index t = 0; t < total; ++t) {
    const double centre = (static_cast<double>(t) + 0.5) / frame_rate;
    while (r < vad.size() && vad[r].offset <= centre) ++r;
    if (r < vad.size() && vad[r].onset <= centre) out.push_back(t);
  }
  return out;
}

/// Turns per-frame labels of the selected frames back into segments; runs
/// break at unselected frames and are clipped to the VAD region.
inline DiarizationHypothesis FramesToHypothesis(const std::string &id, const std::vector<Eigen::Index> &frames,
                                                const std::vector<int> &labels, const std::vector<std::string> &names,
                                                const std::vector<SpeechRegion> &vad, double frame_rate) {
  DiarizationHypothesis hyp;
  hyp.recording_id = id;
  auto clip = [&](double t, bool start) {
    const double centre = t + (start ? 0.5 : -0.5) / frame_rate;
    for (const auto &r : vad) {
      if (r.onset <= centre && centre < r.offset) return std::clamp(t, r.onset, r.offset);
    }
    return t;
  };
  std::size_t i = 0;
  while (i < frames.size()) {
    std::size_t j = i;
    while (j + 1 < frames.size() && frames[j + 1] == frames[j] + 1 && labels[j + 1] == labels[i]) ++j;
    const double start = clip(static_cast<double>(frames[i]) / frame_rate, true);
    const double end = clip(static_cast<double>(frames[j] + 1) / frame_rate, false);
    if (end > start) hyp.segments.push_back({start, end - start, names[static_cast<std::size_t>(labels[i])]});
    i = j + 1;
  }
  SortSegments(hyp.segments);
  return hyp;
}

}  // namespace detail

/// Corpus-scope centering/whitening, one transform per channel index, from
/// every embedding of every recording.
inline std::vector<AffineTransform> EstimateCorpusWhitening(const std::vector<RecordingInput> &inputs) {
  std::vector<std::vector<Vector>> pooled;
  for (const auto &in : inputs) {
    if (pooled.size() < in.channels.size()) pooled.resize(in.channels.size());
    for (std::size_t c = 0; c < in.channels.size(); ++c) {
      for (const auto &seg : in.channels[c].segments) pooled[c].push_back(seg.vector);
    }
  }
  std::vector<AffineTransform> out;
  for (const auto &rows : pooled) out.push_back(EstimateCenterWhiten(RowsToMatrix(rows)));
  return out;
}

/// Unsupervised adaptation: clusters each recording's first channel with
/// UPGMA at `threshold`, trains a PLDA on the cluster labels and interpolates
/// it with `base` at weight 0.5. Falls back to `base` (with a warning) when
/// the clusters cannot support training.
inline PldaModel AdaptPldaUnsupervised(const PldaModel &base, const std::vector<Matrix> &recordings, double threshold,
                                       int iterations) {
  std::vector<Vector> rows;
  std::vector<int> labels;
  int offset = 0;
  for (const auto &x : recordings) {
    if (x.rows() < 2) continue;
    const auto clusters = UpgmaCluster(LlrMatrix(base, x), threshold);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      rows.push_back(x.row(i).transpose());
      labels.push_back(offset + clusters.labels[static_cast<std::size_t>(i)]);
    }
    offset += clusters.num_clusters();
  }
  try {
    return Interpolate(base, TrainPldaEm(RowsToMatrix(rows), labels, iterations), 0.5);
  } catch (const Error &e) {
    Warn(std::string("PLDA adaptation skipped: ") + e.what());
    return base;
  }
}

/// Diarizes one recording. `models.whiten` must hold one transform per
/// channel when the whitening scope is corpus.
inline RecordingOutput DiarizeRecording(const RecordingInput &input, const PipelineModels &models,
                                        const PipelineConfig &config) {
  detail::CheckAligned(input);
  const auto &timing = input.channels.front();
  if (timing.dim != models.plda.dim()) {
    Fail(ErrorKind::kDimension, input.id + ": embedding dimension " + std::to_string(timing.dim) +
                                    " differs from PLDA dimension " + std::to_string(models.plda.dim()));
  }
  if (config.whiten == WhitenScope::kCorpus && models.whiten.size() < input.channels.size()) {
    Fail(ErrorKind::kConfig, "corpus whitening requested without a transform for every channel");
  }
  RecordingOutput out;
  out.report.id = input.id;
  out.report.embeddings = static_cast<Eigen::Index>(timing.size());
  std::vector<TimeSpan> spans;
  for (const auto &s : timing.segments) spans.push_back({s.onset, s.duration});

  std::vector<Matrix> prepared;
  for (std::size_t c = 0; c < input.channels.size(); ++c) {
    prepared.push_back(detail::Preprocess(input.channels[c], config.whiten,
                                          models.whiten.empty() ? nullptr : &models.whiten[c]));
  }

  ClusterLabels labels;
  const Eigen::Index n = out.report.embeddings;
  if (n < 2) {
    labels.labels.assign(static_cast<std::size_t>(n), 0);
  } else {
    std::vector<SimilarityMatrix> sims;
    for (const auto &x : prepared) {
      const auto pca = PerRecordingPca(x, config.pca_var);
      out.report.pca_dim = std::max(out.report.pca_dim, pca.out_dim());
      const Matrix reduced = LengthNormalizeRows(pca.ApplyRows(x));
      sims.push_back(LlrMatrix(Project(models.plda, pca), reduced));
    }
    const auto sim = sims.size() == 1 ? sims.front() : AverageSimilarities(sims);
    if (config.fixed_threshold) {
      out.report.threshold = config.threshold;
    } else {
      try {
        out.report.threshold = CalibrationThreshold(FitTwoGaussians(sim.UpperTriangle()), config.threshold_bias);
        out.report.calibrated = true;
      } catch (const Error &e) {
        if (e.kind() != ErrorKind::kInsufficientData && e.kind() != ErrorKind::kDegenerate) throw;
        out.report.threshold = config.threshold_bias;
      }
    }
    labels = UpgmaCluster(sim, out.report.threshold);
  }
  out.report.ahc_clusters = labels.num_clusters();

  if (config.vb && n >= 1) {
    const Eigen::Index dim = std::min<Eigen::Index>(config.lda_dim, models.plda.dim());
    const auto lda = LdaFromPlda(models.plda, dim);
    const Matrix obs = lda.ApplyRows(prepared.front());
    const auto result = RunVb(obs, InitSoft(labels, config.vb_config.init_smoothing), Project(models.plda, lda),
                              config.vb_config);
    labels = Relabel(result.assignment.Argmax());
    out.report.vb_speakers = result.speaker_count;
    out.report.vb_iterations = result.iterations;
  }

  std::vector<std::string> names;
  for (int s = 0; s < labels.num_clusters(); ++s) names.push_back("spk" + std::to_string(s));
  out.hypothesis = LabelsToHypothesis(input.id, spans, labels.labels, names);

  if (config.frame_vb && !out.hypothesis.segments.empty()) {
    if (!input.frames || !models.eigenvoice) Fail(ErrorKind::kConfig, input.id + ": frame_vb needs frames and a model");
    const Matrix &all = *input.frames;
    auto vad = input.vad;
    if (vad.empty()) vad.push_back({0.0, static_cast<double>(all.rows()) / config.frame_rate});
    const auto speech = detail::SpeechFrames(vad, config.frame_rate, all.rows());
    if (!speech.empty()) {
      const auto init_all = FrameInitFromSegments(out.hypothesis, config.frame_rate, all.rows());
      Matrix frames(static_cast<Eigen::Index>(speech.size()), all.cols());
      SoftAssignment init{Matrix(static_cast<Eigen::Index>(speech.size()), init_all.speakers())};
      for (std::size_t i = 0; i < speech.size(); ++i) {
        frames.row(static_cast<Eigen::Index>(i)) = all.row(speech[i]);
        init.gamma.row(static_cast<Eigen::Index>(i)) = init_all.gamma.row(speech[i]);
      }
      const auto refined = SingleVbPass(frames, init, *models.eigenvoice, config.frame_vb_config);
      out.hypothesis = detail::FramesToHypothesis(input.id, speech, refined.Argmax(), SpeakerLabels(out.hypothesis),
                                                  vad, config.frame_rate);
    }
  }

  if (config.overlap) {
    if (!models.overlap) Fail(ErrorKind::kConfig, input.id + ": overlap is on but no overlap model was given");
    const auto flags = DetectOverlap(*models.overlap, timing.AsMatrix(), config.overlap_threshold);
    const auto regions = FlaggedRegions(spans, flags);
    auto result = AssignTwoClosest(out.hypothesis, regions, config.overlap_frame_step);
    out.report.overlap_regions = static_cast<int>(regions.size());
    out.report.overlap_added = result.added.size();
    out.hypothesis = std::move(result.hypothesis);
  }
  return out;
}

}  // namespace vbdiar

#endif  // VBDIAR_PIPELINE_HPP_
