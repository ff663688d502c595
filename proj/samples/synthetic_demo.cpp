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


// Samples a four-speaker recording from a random PLDA model, diarizes it with
// AHC followed by VB-HMM and scores the result against the sampled truth.

#include <cstdio>
#include <string>
#include <vector>

#include "vbdiar/vbdiar.hpp"

int main(int argc, char **argv) {
  using namespace vbdiar;
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 7;
  const PldaModel plda = RandomPldaModel(24, 16.0, seed);
  auto rec = SampleRecording(plda, 4, 600, 0.97, seed + 1);
  rec.embeddings.recording_id = "demo";

  RecordingInput input;
  input.id = "demo";
  input.channels.push_back(rec.embeddings);

  PipelineConfig config = Preset("system1");
  config.whiten = WhitenScope::kNone;
  config.pca_var = 0.9;
  config.frame_vb = false;
  config.overlap = false;

  PipelineModels models;
  models.plda = plda;
  const auto out = DiarizeRecording(input, models, config);

  std::vector<TimeSpan> spans;
  for (const auto &s : rec.embeddings.segments) spans.push_back({s.onset, s.duration});
  const auto truth = LabelsToHypothesis("demo", spans, rec.truth.labels, {"A", "B", "C", "D"});
  const auto score = ScoreRecording(truth, out.hypothesis);

  std::printf("embeddings %ld, PCA dim %ld, AHC threshold %.3f\n", static_cast<long>(out.report.embeddings),
              static_cast<long>(out.report.pca_dim), out.report.threshold);
  std::printf("AHC clusters %d -> VB speakers %d after %d iterations\n", out.report.ahc_clusters,
              out.report.vb_speakers, out.report.vb_iterations);
  std::printf("DER %.2f%% (miss %.2f, fa %.2f, confusion %.2f), JER %.2f%%\n", 100 * score.der(),
              100 * score.miss(), 100 * score.fa(), 100 * score.confusion(), 100 * score.jer);
  std::fputs(FormatRttm(out.hypothesis).c_str(), stdout);
  return 0;
}
