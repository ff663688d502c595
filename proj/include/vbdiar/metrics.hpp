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

#ifndef VBDIAR_METRICS_HPP_
#define VBDIAR_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vbdiar/corpus_io.hpp"
#include "vbdiar/error.hpp"
#include "vbdiar/linalg.hpp"

namespace vbdiar {

/// Maximum-weight assignment of rows to columns (Hungarian algorithm,
/// O(n^2 m)). Returns for every row its column or -1 when unassigned.
inline std::vector<int> MaxWeightAssignment(const Matrix &weights) {
  const Eigen::Index rows = weights.rows(), cols = weights.cols();
  if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  const bool transposed = rows > cols;
  const Matrix w = transposed ? Matrix(weights.transpose()) : weights;
  const auto n = static_cast<std::size_t>(w.rows()), m = static_cast<std::size_t>(w.cols());
  // Minimize cost = -weight; 1-based potentials as in the classic formulation.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = -w(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(rows), -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) {
      row_to_col[j - 1] = static_cast<int>(p[j] - 1);
    } else {
      row_to_col[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return row_to_col;
}

struct DerOptions {
  double collar = 0.0;
  bool score_overlaps = true;
};

/// Error durations (seconds) and rates for one recording.
struct DerResult {
  double reference_time = 0.0;  // total scored reference speaker time
  double miss_time = 0.0;
  double fa_time = 0.0;
  double confusion_time = 0.0;
  double jer = 0.0;
  std::map<std::string, std::string> mapping;  // reference -> hypothesis speaker

  double der() const { return (miss_time + fa_time + confusion_time) / reference_time; }
  double miss() const { return miss_time / reference_time; }
  double fa() const { return fa_time / reference_time; }
  double confusion() const { return confusion_time / reference_time; }
};

namespace detail {

struct ScoredInterval {
  double start, end;
  std::vector<int> ref;  // active reference speaker indices
  std::vector<int> hyp;
};

inline std::vector<ScoredInterval> ElementaryIntervals(const DiarizationHypothesis &ref, const std::vector<std::string> &ref_labels,
                                                       const DiarizationHypothesis &hyp, const std::vector<std::string> &hyp_labels,
                                                       const DerOptions &options) {
  std::vector<double> cuts;
  for (const auto &s : ref.segments) {
    cuts.push_back(s.onset);
    cuts.push_back(s.end());
    if (options.collar > 0.0) {
      for (double b : {s.onset, s.end()}) {
        cuts.push_back(b - options.collar);
        cuts.push_back(b + options.collar);
      }
    }
  }
  for (const auto &s : hyp.segments) {
    cuts.push_back(s.onset);
    cuts.push_back(s.end());
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  auto index_of = [](const std::vector<std::string> &labels, const std::string &l) {
    return static_cast<int>(std::lower_bound(labels.begin(), labels.end(), l) - labels.begin());
  };
  std::vector<ScoredInterval> out;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    const double mid = 0.5 * (a + b);
    if (options.collar > 0.0) {
      bool excluded = false;
      for (const auto &s : ref.segments) {
        if (std::abs(mid - s.onset) < options.collar || std::abs(mid - s.end()) < options.collar) {
          excluded = true;
          break;
        }
      }
      if (excluded) continue;
    }
    ScoredInterval iv{a, b, {}, {}};
    std::set<int> r, h;
    for (const auto &s : ref.segments) {
      if (s.onset <= mid && mid < s.end()) r.insert(index_of(ref_labels, s.speaker));
    }
    for (const auto &s : hyp.segments) {
      if (s.onset <= mid && mid < s.end()) h.insert(index_of(hyp_labels, s.speaker));
    }
    if (!options.score_overlaps && r.size() > 1) continue;
    if (r.empty() && h.empty()) continue;
    iv.ref.assign(r.begin(), r.end());
    iv.hyp.assign(h.begin(), h.end());
    out.push_back(std::move(iv));
  }
  return out;
}

}  // namespace detail

/// Diarization error rate with the optimal one-to-one speaker mapping, plus
/// the Jaccard error rate under the same mapping (unmapped reference speakers
/// score 1). Ties in matched time are broken by the total Jaccard index.
inline DerResult ScoreRecording(const DiarizationHypothesis &ref, const DiarizationHypothesis &hyp,
                                const DerOptions &options = {}) {
  const auto ref_labels = SpeakerLabels(ref);
  const auto hyp_labels = SpeakerLabels(hyp);
  const auto intervals = detail::ElementaryIntervals(ref, ref_labels, hyp, hyp_labels, options);

  const auto nr = static_cast<Eigen::Index>(ref_labels.size());
  const auto nh = static_cast<Eigen::Index>(hyp_labels.size());
  Matrix overlap = Matrix::Zero(nr, nh);
  Vector ref_time = Vector::Zero(nr), hyp_time = Vector::Zero(nh);
  DerResult result;
  for (const auto &iv : intervals) {
    const double d = iv.end - iv.start;
    for (int r : iv.ref) {
      ref_time(r) += d;
      for (int h : iv.hyp) overlap(r, h) += d;
    }
    for (int h : iv.hyp) hyp_time(h) += d;
    result.reference_time += d * static_cast<double>(iv.ref.size());
  }
  if (!(result.reference_time > 0.0)) {
    Fail(ErrorKind::kUndefinedMetric, "recording '" + ref.recording_id + "' has no scored reference speech");
  }
  // Among mappings with (numerically) equal matched time, prefer the larger
  // total Jaccard index so that JER does not depend on label order.
  Matrix weight = overlap;
  for (Eigen::Index r = 0; r < nr; ++r) {
    for (Eigen::Index h = 0; h < nh; ++h) {
      const double uni = ref_time(r) + hyp_time(h) - overlap(r, h);
      if (uni > 0.0) weight(r, h) += 1e-9 * overlap(r, h) / uni;
    }
  }
  const auto mapping = MaxWeightAssignment(weight);
  for (const auto &iv : intervals) {
    const double d = iv.end - iv.start;
    const auto n_ref = static_cast<double>(iv.ref.size()), n_hyp = static_cast<double>(iv.hyp.size());
    double correct = 0.0;
    for (int r : iv.ref) {
      const int h = mapping[static_cast<std::size_t>(r)];
      if (h >= 0 && std::binary_search(iv.hyp.begin(), iv.hyp.end(), h)) correct += 1.0;
    }
    result.miss_time += d * std::max(0.0, n_ref - n_hyp);
    result.fa_time += d * std::max(0.0, n_hyp - n_ref);
    result.confusion_time += d * (std::min(n_ref, n_hyp) - correct);
  }
  double jer_sum = 0.0;
  for (Eigen::Index r = 0; r < nr; ++r) {
    const int h = mapping[static_cast<std::size_t>(r)];
    if (h < 0) {
      jer_sum += 1.0;
      continue;
    }
    result.mapping[ref_labels[static_cast<std::size_t>(r)]] = hyp_labels[static_cast<std::size_t>(h)];
    const double inter = overlap(r, h);
    const double uni = ref_time(r) + hyp_time(h) - inter;
    jer_sum += uni > 0.0 ? 1.0 - inter / uni : 0.0;
  }
  result.jer = nr > 0 ? jer_sum / static_cast<double>(nr) : 0.0;
  return result;
}

struct ScoreRow {
  std::string recording_id;
  DerResult result;
};

struct CorpusScore {
  std::vector<ScoreRow> rows;
  std::vector<std::string> undefined;  // recordings without reference speech
  DerResult total;                     // time-weighted DER terms, macro-averaged JER
};

/// Scores every recording present in either map. A recording missing from
/// `hyp` is scored against an empty hypothesis (all miss).
inline CorpusScore ScoreCorpus(const std::map<std::string, DiarizationHypothesis> &ref,
                               const std::map<std::string, DiarizationHypothesis> &hyp,
                               const DerOptions &options = {}) {
  std::set<std::string> ids;
  for (const auto &[id, h] : ref) ids.insert(id);
  for (const auto &[id, h] : hyp) ids.insert(id);
  CorpusScore score;
  double jer_sum = 0.0;
  for (const auto &id : ids) {
    const auto r = ref.find(id);
    const auto h = hyp.find(id);
    const DiarizationHypothesis empty{id, {}};
    if (r == ref.end()) {
      score.undefined.push_back(id);
      continue;
    }
    try {
      auto res = ScoreRecording(r->second, h == hyp.end() ? empty : h->second, options);
      score.total.reference_time += res.reference_time;
      score.total.miss_time += res.miss_time;
      score.total.fa_time += res.fa_time;
      score.total.confusion_time += res.confusion_time;
      jer_sum += res.jer;
      score.rows.push_back({id, std::move(res)});
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::kUndefinedMetric) throw;
      score.undefined.push_back(id);
    }
  }
  score.total.jer = score.rows.empty() ? 0.0 : jer_sum / static_cast<double>(score.rows.size());
  return score;
}

/// CSV report, rates in percent with three decimals.
inline std::string FormatScoreReport(const CorpusScore &score) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", 100.0 * v);
    return std::string(buf);
  };
  std::string out = "# rates in percent; TOTAL DER terms are time-weighted, TOTAL JER is the mean over recordings\n";
  out += "recording_id,der,miss,fa,confusion,jer\n";
  for (const auto &row : score.rows) {
    const auto &r = row.result;
    out += row.recording_id + ',' + pct(r.der()) + ',' + pct(r.miss()) + ',' + pct(r.fa()) + ',' +
           pct(r.confusion()) + ',' + pct(r.jer) + '\n';
  }
  for (const auto &id : score.undefined) out += id + ",nan,nan,nan,nan,nan\n";
  if (score.total.reference_time > 0.0) {
    const auto &t = score.total;
    out += "TOTAL," + pct(t.der()) + ',' + pct(t.miss()) + ',' + pct(t.fa()) + ',' + pct(t.confusion()) + ',' +
           pct(t.jer) + '\n';
  } else {
    out += "TOTAL,nan,nan,nan,nan,nan\n";
  }
  return out;
}

}  // namespace vbdiar

#endif  // VBDIAR_METRICS_HPP_
