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

#ifndef VBDIAR_CORPUS_IO_HPP_
#define VBDIAR_CORPUS_IO_HPP_

// On-disk artifacts: embedding CSVs, VAD label files and RTTM.
//
//   embedding CSV   onset,duration,v0,...,v{D-1}        (one segment per line)
//   VAD lab         onset offset speech                 (whitespace separated)
//   RTTM            SPEAKER <rec> 1 <on:%.3f> <dur:%.3f> <NA> <NA> <spk> <NA> <NA>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/text.hpp"

namespace vbdiar {

struct SegmentEmbedding {
  double onset = 0.0;
  double duration = 0.0;
  Vector vector;
};

struct RecordingEmbeddings {
  std::string recording_id;
  Eigen::Index dim = 0;
  std::vector<SegmentEmbedding> segments;

  std::size_t size() const { return segments.size(); }

  /// Embeddings stacked as rows (size() x dim).
  Matrix AsMatrix() const {
    Matrix m(static_cast<Eigen::Index>(segments.size()), dim);
    for (std::size_t i = 0; i < segments.size(); ++i) {
      m.row(static_cast<Eigen::Index>(i)) = segments[i].vector.transpose();
    }
    return m;
  }
};

struct SpeechRegion {
  double onset = 0.0;
  double offset = 0.0;
  double length() const { return offset - onset; }
};

/// A time span without a label (onset, duration).
struct TimeSpan {
  double onset = 0.0;
  double duration = 0.0;
  double end() const { return onset + duration; }
};

struct SpeakerSegment {
  double onset = 0.0;
  double duration = 0.0;
  std::string speaker;
  double end() const { return onset + duration; }

  friend bool operator==(const SpeakerSegment &, const SpeakerSegment &) = default;
};

struct DiarizationHypothesis {
  std::string recording_id;
  std::vector<SpeakerSegment> segments;
};

/// Canonical segment order: onset, then speaker label, then duration.
inline void SortSegments(std::vector<SpeakerSegment> &segments) {
  std::stable_sort(segments.begin(), segments.end(), [](const auto &a, const auto &b) {
    return std::tie(a.onset, a.speaker, a.duration) < std::tie(b.onset, b.speaker, b.duration);
  });
}

/// Distinct speaker labels in lexicographic order.
inline std::vector<std::string> SpeakerLabels(const DiarizationHypothesis &hyp) {
  std::set<std::string> labels;
  for (const auto &s : hyp.segments) labels.insert(s.speaker);
  return {labels.begin(), labels.end()};
}

inline std::string RecordingIdFromPath(const std::string &path) {
  return std::filesystem::path(path).stem().string();
}

// ---------------------------------------------------------------------------
// Embeddings

inline void SortEmbeddings(RecordingEmbeddings &rec) {
  std::stable_sort(rec.segments.begin(), rec.segments.end(), [](const auto &a, const auto &b) {
    return std::tie(a.onset, a.duration) < std::tie(b.onset, b.duration);
  });
}

inline RecordingEmbeddings ReadEmbeddings(const std::string &path) {
  RecordingEmbeddings rec;
  rec.recording_id = RecordingIdFromPath(path);
  for (const auto &line : text::ReadLines(path)) {
    const auto fields = text::Split(line.text, ',');
    if (fields.size() < 3) {
      Fail(ErrorKind::kParse, text::Where(path, line.number) + ": expected onset,duration and at least one value, got " +
                                  std::to_string(fields.size()) + " fields");
    }
    const auto dim = static_cast<Eigen::Index>(fields.size() - 2);
    if (rec.dim == 0) {
      rec.dim = dim;
    } else if (rec.dim != dim) {
      Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": dimension " + std::to_string(dim) +
                                   " differs from " + std::to_string(rec.dim));
    }
    SegmentEmbedding seg;
    seg.onset = text::ParseDouble(fields[0], path, line.number);
    seg.duration = text::ParseDouble(fields[1], path, line.number);
    if (seg.onset < 0.0) Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": negative onset");
    if (seg.duration <= 0.0) Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": non-positive duration");
    seg.vector.resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) {
      seg.vector(d) = text::ParseDouble(fields[static_cast<std::size_t>(d) + 2], path, line.number);
    }
    rec.segments.push_back(std::move(seg));
  }
  if (rec.segments.empty()) Fail(ErrorKind::kEmptyInput, path + ": no embeddings");
  SortEmbeddings(rec);
  return rec;
}

inline void WriteEmbeddings(const RecordingEmbeddings &rec, const std::string &path) {
  auto out = text::OpenOut(path);
  for (const auto &seg : rec.segments) {
    out << text::FormatExact(seg.onset) << ',' << text::FormatExact(seg.duration) << ','
        << text::JoinRow(seg.vector) << '\n';
  }
  if (!out) Fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// VAD

inline constexpr double kRegionMergeGap = 1e-6;

/// Sorts and merges regions that overlap or are separated by less than 1 us.
inline std::vector<SpeechRegion> MergeRegions(std::vector<SpeechRegion> regions) {
  std::sort(regions.begin(), regions.end(),
            [](const auto &a, const auto &b) { return std::tie(a.onset, a.offset) < std::tie(b.onset, b.offset); });
  std::vector<SpeechRegion> merged;
  for (const auto &r : regions) {
    if (!merged.empty() && r.onset - merged.back().offset < kRegionMergeGap) {
      merged.back().offset = std::max(merged.back().offset, r.offset);
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

inline std::vector<SpeechRegion> ReadVad(const std::string &path) {
  std::vector<SpeechRegion> regions;
  for (const auto &line : text::ReadLines(path)) {
    const auto fields = text::SplitWhitespace(line.text);
    if (fields.size() != 3) {
      Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": expected 'onset offset speech'");
    }
    if (fields[2] != "speech") {
      Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": unknown label '" + std::string(fields[2]) + "'");
    }
    SpeechRegion r{text::ParseDouble(fields[0], path, line.number), text::ParseDouble(fields[1], path, line.number)};
    if (r.offset <= r.onset) Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": offset <= onset");
    regions.push_back(r);
  }
  return MergeRegions(std::move(regions));
}

inline void WriteVad(const std::vector<SpeechRegion> &regions, const std::string &path) {
  auto out = text::OpenOut(path);
  for (const auto &r : regions) {
    out << text::FormatExact(r.onset) << ' ' << text::FormatExact(r.offset) << " speech\n";
  }
}

/// Cuts speech regions into windows of `window` seconds every `shift` seconds.
/// Regions no longer than the window give one segment covering the region;
/// otherwise a trailing window ending exactly at the region offset is added
/// when the uncovered remainder is at least shift/2.
inline std::vector<TimeSpan> UniformSubsegmentation(const std::vector<SpeechRegion> &regions, double window,
                                                    double shift) {
  if (!(window > 0.0) || !(shift > 0.0)) Fail(ErrorKind::kConfig, "window and shift must be positive");
  constexpr double kEps = 1e-9;
  std::vector<TimeSpan> out;
  for (const auto &r : regions) {
    const double length = r.length();
    if (length <= window + kEps) {
      out.push_back({r.onset, length});
      continue;
    }
    double last_end = r.onset;
    for (long k = 0;; ++k) {
      const double onset = r.onset + static_cast<double>(k) * shift;
      if (onset + window > r.offset + kEps) break;
      out.push_back({onset, window});
      last_end = onset + window;
    }
    if (r.offset - last_end >= shift / 2.0 - kEps) out.push_back({r.offset - window, window});
  }
  return out;
}

/// The part of each window it "owns" once consecutive overlapping windows
/// are split at the midpoint of their overlap. Returned in input order.
inline std::vector<TimeSpan> OwnedSpans(const std::vector<TimeSpan> &spans) {
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(spans[a].onset, spans[a].duration) < std::tie(spans[b].onset, spans[b].duration);
  });
  std::vector<double> starts(order.size()), ends(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    starts[k] = spans[order[k]].onset;
    ends[k] = spans[order[k]].end();
  }
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    if (ends[k] > starts[k + 1]) {
      const double cut = 0.5 * (ends[k] + starts[k + 1]);
      ends[k] = cut;
      starts[k + 1] = cut;
    }
  }
  std::vector<TimeSpan> out(spans.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out[order[k]] = {starts[k], std::max(0.0, ends[k] - starts[k])};
  }
  return out;
}

/// Converts per-window labels into speaker turns: each window contributes its
/// owned span (see OwnedSpans) and touching spans with the same label merge.
/// `names[label]` gives the speaker string.
inline DiarizationHypothesis LabelsToHypothesis(const std::string &recording_id, const std::vector<TimeSpan> &spans,
                                                const std::vector<int> &labels,
                                                const std::vector<std::string> &names) {
  if (spans.size() != labels.size()) Fail(ErrorKind::kDimension, "span and label counts differ");
  const auto owned = OwnedSpans(spans);
  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(owned[a].onset, owned[a].duration) < std::tie(owned[b].onset, owned[b].duration);
  });
  DiarizationHypothesis hyp;
  hyp.recording_id = recording_id;
  std::map<int, std::size_t> open;  // label -> index of its last segment in hyp
  for (std::size_t idx : order) {
    const TimeSpan &span = owned[idx];
    if (span.duration <= 0.0) continue;
    const int label = labels[idx];
    if (label < 0 || static_cast<std::size_t>(label) >= names.size()) Fail(ErrorKind::kDimension, "label out of range");
    auto it = open.find(label);
    if (it != open.end()) {
      auto &prev = hyp.segments[it->second];
      if (std::abs(prev.end() - span.onset) < 1e-9) {
        prev.duration = span.end() - prev.onset;
        continue;
      }
    }
    hyp.segments.push_back({span.onset, span.duration, names[static_cast<std::size_t>(label)]});
    open[label] = hyp.segments.size() - 1;
  }
  SortSegments(hyp.segments);
  return hyp;
}

// ---------------------------------------------------------------------------
// RTTM

inline std::string FormatRttmLine(const std::string &recording_id, const SpeakerSegment &seg) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), " 1 %.3f %.3f <NA> <NA> ", seg.onset, seg.duration);
  return "SPEAKER " + recording_id + buf + seg.speaker + " <NA> <NA>";
}

inline std::string FormatRttm(const DiarizationHypothesis &hyp) {
  auto segments = hyp.segments;
  SortSegments(segments);
  std::string out;
  for (const auto &seg : segments) out += FormatRttmLine(hyp.recording_id, seg) + '\n';
  return out;
}

inline void WriteRttm(const DiarizationHypothesis &hyp, const std::string &path) {
  auto out = text::OpenOut(path);
  out << FormatRttm(hyp);
  if (!out) Fail(ErrorKind::kIo, "failed writing '" + path + "'");
}

/// All recordings in an RTTM file, keyed (and ordered) by recording id.
inline std::map<std::string, DiarizationHypothesis> ReadRttmAll(const std::string &path) {
  std::map<std::string, DiarizationHypothesis> out;
  for (const auto &line : text::ReadLines(path)) {
    const auto trimmed = text::Trim(line.text);
    if (trimmed.starts_with(";;")) continue;
    const auto fields = text::SplitWhitespace(trimmed);
    if (fields.size() != 10) {
      Fail(ErrorKind::kParse, text::Where(path, line.number) + ": expected 10 fields, got " +
                                  std::to_string(fields.size()));
    }
    if (fields[0] != "SPEAKER") continue;
    SpeakerSegment seg;
    seg.onset = text::ParseDouble(fields[3], path, line.number);
    seg.duration = text::ParseDouble(fields[4], path, line.number);
    seg.speaker = std::string(fields[7]);
    if (seg.duration <= 0.0) Fail(ErrorKind::kFormat, text::Where(path, line.number) + ": non-positive duration");
    const std::string rec(fields[1]);
    auto &hyp = out[rec];
    hyp.recording_id = rec;
    hyp.segments.push_back(std::move(seg));
  }
  for (auto &[id, hyp] : out) SortSegments(hyp.segments);
  return out;
}

/// Reads a single-recording RTTM file. An empty file yields an empty
/// hypothesis whose id is taken from the file name.
inline DiarizationHypothesis ReadRttm(const std::string &path) {
  auto all = ReadRttmAll(path);
  if (all.empty()) return {RecordingIdFromPath(path), {}};
  if (all.size() > 1) Fail(ErrorKind::kFormat, path + ": contains " + std::to_string(all.size()) + " recordings");
  return std::move(all.begin()->second);
}

}  // namespace vbdiar

#endif  // VBDIAR_CORPUS_IO_HPP_
