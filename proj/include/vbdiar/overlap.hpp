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

#ifndef VBDIAR_OVERLAP_HPP_
#define VBDIAR_OVERLAP_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"
#include "vbdiar/text.hpp"

namespace vbdiar {

struct LogRegModel {
  Vector weights;
  double bias = 0.0;

  double Probability(const Vector &x) const {
    const double z = weights.dot(x) + bias;
    return 1.0 / (1.0 + std::exp(-z));
  }
};

/// L2-regularized logistic regression (bias unpenalized) fitted by damped
/// Newton iterations until the gradient norm drops below 1e-8.
inline LogRegModel TrainLogReg(const Matrix &x, const std::vector<int> &labels, double l2) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) Fail(ErrorKind::kDimension, "one label per vector");
  if (!(l2 >= 0.0)) Fail(ErrorKind::kConfig, "l2 must be non-negative");
  Vector y(n);
  bool has0 = false, has1 = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) Fail(ErrorKind::kFormat, "logistic regression labels must be 0 or 1");
    y(i) = l;
    (l ? has1 : has0) = true;
  }
  if (!has0 || !has1) Fail(ErrorKind::kTraining, "logistic regression needs both classes");

  Matrix xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  Vector reg = Vector::Constant(d + 1, l2);
  reg(d) = 0.0;

  auto objective = [&](const Vector &theta) {
    const Vector z = xa * theta;
    double nll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^z) - y z, computed stably.
      const double zi = z(i);
      nll += (zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi))) - y(i) * zi;
    }
    return nll + 0.5 * theta.cwiseProduct(reg).dot(theta);
  };

  Vector theta = Vector::Zero(d + 1);
  double f = objective(theta);
  for (int it = 0; it < 200; ++it) {
    const Vector z = xa * theta;
    const Vector p = (1.0 + (-z).array().exp()).inverse().matrix();
    const Vector grad = xa.transpose() * (p - y) + reg.cwiseProduct(theta);
    if (grad.norm() < 1e-8) break;
    const Vector w = p.cwiseProduct((1.0 - p.array()).matrix());
    Matrix hess = xa.transpose() * w.asDiagonal() * xa;
    hess.diagonal() += reg;
    hess.diagonal().array() += 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
    const Vector step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Vector candidate = theta - step;
    double fc = objective(candidate);
    while (fc > f && scale > 1e-10) {
      scale *= 0.5;
      candidate = theta - scale * step;
      fc = objective(candidate);
    }
    if (fc > f) break;
    theta = candidate;
    f = fc;
  }
  return {theta.head(d), theta(d)};
}

/// Flags rows whose overlap probability exceeds `threshold`.
inline std::vector<bool> DetectOverlap(const LogRegModel &model, const Matrix &x, double threshold) {
  if (x.cols() != model.weights.size()) Fail(ErrorKind::kDimension, "detector dimension differs from input");
  std::vector<bool> flags(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    flags[static_cast<std::size_t>(i)] = model.Probability(x.row(i).transpose()) > threshold;
  }
  return flags;
}

/// Embedding-level training label: 1 when more than half of the span is
/// covered by two or more reference speakers.
inline std::vector<int> OverlapTrainingLabels(const std::vector<TimeSpan> &spans,
                                              const DiarizationHypothesis &reference) {
  // Sweep the reference once to get the regions with >= 2 active speakers.
  std::vector<std::pair<double, int>> events;
  for (const auto &s : reference.segments) {
    events.emplace_back(s.onset, +1);
    events.emplace_back(s.end(), -1);
  }
  std::sort(events.begin(), events.end());
  std::vector<SpeechRegion> overlapped;
  int active = 0;
  double start = 0.0;
  for (const auto &[time, delta] : events) {
    const int before = active;
    active += delta;
    if (before < 2 && active >= 2) start = time;
    if (before >= 2 && active < 2 && time > start) overlapped.push_back({start, time});
  }
  std::vector<int> labels;
  labels.reserve(spans.size());
  for (const auto &span : spans) {
    double covered = 0.0;
    for (const auto &r : overlapped) {
      covered += std::max(0.0, std::min(r.offset, span.end()) - std::max(r.onset, span.onset));
    }
    labels.push_back(covered > 0.5 * span.duration ? 1 : 0);
  }
  return labels;
}

struct TwoClosestResult {
  DiarizationHypothesis hypothesis;     // input segments followed by additions, canonical order
  std::vector<SpeakerSegment> added;
  int skipped_regions = 0;              // regions with no second speaker available
};

/// Labels every frame of each overlap region with a second speaker: the
/// speaker (other than the one active at the frame centre) whose nearest
/// segment edge is closest in time, ties to the smaller label. Consecutive
/// frames with the same (first, second) pair form one added segment.
inline TwoClosestResult AssignTwoClosest(const DiarizationHypothesis &hyp, const std::vector<SpeechRegion> &regions,
                                         double frame_step = 0.01) {
  if (!(frame_step > 0.0)) Fail(ErrorKind::kConfig, "frame step must be positive");
  TwoClosestResult result;
  result.hypothesis = hyp;
  const auto labels = SpeakerLabels(hyp);
  std::map<std::string, std::vector<const SpeakerSegment *>> by_speaker;
  for (const auto &s : hyp.segments) by_speaker[s.speaker].push_back(&s);

  auto current_at = [&](double t) -> const std::string * {
    const std::string *found = nullptr;
    for (const auto &label : labels) {
      for (const auto *s : by_speaker[label]) {
        if (s->onset <= t && t < s->end()) return &s->speaker;
      }
    }
    return found;
  };
  auto distance = [&](const std::string &label, double t) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto *s : by_speaker[label]) best = std::min(best, std::max({0.0, s->onset - t, t - s->end()}));
    return best;
  };

  for (const auto &region : regions) {
    if (labels.size() < 2) {
      ++result.skipped_regions;
      continue;
    }
    const auto frames = static_cast<long>(std::ceil((region.offset - region.onset) / frame_step - 1e-9));
    const std::string *run_first = nullptr;
    std::string run_second;
    double run_start = 0.0, run_end = 0.0;
    auto flush = [&]() {
      if (run_first && run_end > run_start) result.added.push_back({run_start, run_end - run_start, run_second});
      run_first = nullptr;
    };
    for (long k = 0; k < frames; ++k) {
      const double start = region.onset + static_cast<double>(k) * frame_step;
      const double end = std::min(region.onset + static_cast<double>(k + 1) * frame_step, region.offset);
      const double centre = 0.5 * (start + end);
      const std::string *first = current_at(centre);
      if (!first) {
        flush();
        continue;
      }
      const std::string *second = nullptr;
      double best = std::numeric_limits<double>::infinity();
      for (const auto &label : labels) {
        if (label == *first) continue;
        const double dist = distance(label, centre);
        if (dist < best) {
          best = dist;
          second = &label;
        }
      }
      if (run_first && *run_first == *first && run_second == *second) {
        run_end = end;
      } else {
        flush();
        run_first = first;
        run_second = *second;
        run_start = start;
        run_end = end;
      }
    }
    flush();
  }
  result.hypothesis.segments.insert(result.hypothesis.segments.end(), result.added.begin(), result.added.end());
  SortSegments(result.hypothesis.segments);
  return result;
}

/// Union of the spans (as owned after midpoint splitting of overlapping
/// windows) whose flag is set.
inline std::vector<SpeechRegion> FlaggedRegions(const std::vector<TimeSpan> &spans, const std::vector<bool> &flags) {
  if (spans.size() != flags.size()) Fail(ErrorKind::kDimension, "one flag per span");
  std::vector<std::string> names = {"0", "1"};
  std::vector<int> labels(flags.begin(), flags.end());
  const auto owned = LabelsToHypothesis("", spans, labels, names);
  std::vector<SpeechRegion> regions;
  for (const auto &s : owned.segments) {
    if (s.speaker == "1") regions.push_back({s.onset, s.end()});
  }
  return MergeRegions(std::move(regions));
}

/// One CSV line: bias, then weights.
inline void SaveLogReg(const LogRegModel &model, const std::string &path) {
  auto out = text::OpenOut(path);
  out << text::FormatExact(model.bias);
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) out << ',' << text::FormatExact(model.weights(i));
  out << '\n';
}

inline LogRegModel LoadLogReg(const std::string &path) {
  text::CsvBlockReader reader(path);
  const Vector row = reader.NextRow(-1);
  if (row.size() < 2) Fail(ErrorKind::kFormat, path + ": expected bias and at least one weight");
  if (!reader.AtEnd()) Fail(ErrorKind::kFormat, path + ": expected a single line");
  return {row.tail(row.size() - 1), row(0)};
}

}  // namespace vbdiar

#endif  // VBDIAR_OVERLAP_HPP_
