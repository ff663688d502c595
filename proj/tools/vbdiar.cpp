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


// Command-line front end: diarize, score, synth.

#include <fnmatch.h>

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "vbdiar/vbdiar.hpp"

namespace fs = std::filesystem;
using namespace vbdiar;

namespace {

/// Files matching a shell pattern in the last path component, sorted.
std::vector<std::string> ExpandGlob(const std::string &pattern) {
  const fs::path p(pattern);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  const std::string name = p.filename().string();
  std::vector<std::string> out;
  if (!fs::is_directory(dir)) Fail(ErrorKind::kIo, "no such directory '" + dir.string() + "'");
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0) out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct DiarizeArgs {
  std::string preset = "system1";
  std::string config_file;
  std::vector<std::string> settings;
  std::vector<std::string> embeddings;
  std::string vad_dir;
  std::string plda;
  std::string plda2;
  std::string eigenvoice;
  std::string features_dir;
  std::string overlap_model;
  std::string transform;
  int workers = 0;
  std::string out_dir;
};

PipelineConfig BuildConfig(const DiarizeArgs &args) {
  PipelineConfig config = Preset(args.preset);
  if (!args.config_file.empty()) {
    std::ifstream in(args.config_file);
    if (!in) Fail(ErrorKind::kConfig, "cannot read config file '" + args.config_file + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    config = ApplyConfigText(buf.str(), config, args.config_file);
  }
  for (const auto &kv : args.settings) config = ApplyConfigText(kv, config, "--set");
  if (args.workers > 0) config.workers = args.workers;
  if (!args.transform.empty() && config.whiten == WhitenScope::kRecording) {
    Fail(ErrorKind::kConfig, "--transform contradicts whiten = recording");
  }
  CheckConfigAgainstInputs(config, !args.features_dir.empty(), !args.eigenvoice.empty(), !args.overlap_model.empty());
  return config;
}

int RunDiarize(const DiarizeArgs &args) {
  const PipelineConfig config = BuildConfig(args);

  // Channel c of recording i is the i-th file of the c-th pattern.
  std::vector<std::vector<std::string>> channel_files;
  for (const auto &pattern : args.embeddings) {
    channel_files.push_back(ExpandGlob(pattern));
    if (channel_files.back().empty()) Fail(ErrorKind::kIo, "no files match '" + pattern + "'");
    if (channel_files.back().size() != channel_files.front().size()) {
      Fail(ErrorKind::kFormat, "embedding patterns match different numbers of recordings");
    }
  }
  std::vector<RecordingInput> inputs;
  for (std::size_t i = 0; i < channel_files.front().size(); ++i) {
    RecordingInput in;
    for (const auto &files : channel_files) in.channels.push_back(ReadEmbeddings(files[i]));
    in.id = in.channels.front().recording_id;
    in.vad = ReadVad((fs::path(args.vad_dir) / (in.id + ".lab")).string());
    if (config.frame_vb) in.frames = ReadFrameFeatures((fs::path(args.features_dir) / (in.id + ".csv")).string());
    inputs.push_back(std::move(in));
  }

  PipelineModels models;
  models.plda = LoadPlda(args.plda);
  if (!args.plda2.empty()) models.plda = Interpolate(models.plda, LoadPlda(args.plda2), config.plda_weight);
  if (!args.transform.empty()) {
    const auto t = LoadTransform(args.transform);
    models.whiten.assign(args.embeddings.size(), t);
  } else if (config.whiten == WhitenScope::kCorpus) {
    models.whiten = EstimateCorpusWhitening(inputs);
  }
  PipelineConfig run_config = config;
  if (!args.transform.empty()) run_config.whiten = WhitenScope::kCorpus;
  if (config.frame_vb) models.eigenvoice = LoadEigenvoice(args.eigenvoice);
  if (config.overlap) models.overlap = LoadLogReg(args.overlap_model);
  if (config.adapt_plda) {
    std::vector<Matrix> prepared;
    for (const auto &in : inputs) {
      const Matrix raw = in.channels.front().AsMatrix();
      prepared.push_back(LengthNormalizeRows(
          run_config.whiten == WhitenScope::kCorpus ? models.whiten.front().ApplyRows(raw)
          : run_config.whiten == WhitenScope::kRecording ? EstimateCenterWhiten(raw).ApplyRows(raw)
                                                           : raw));
    }
    models.plda = AdaptPldaUnsupervised(models.plda, prepared, config.adapt_threshold, config.adapt_iterations);
  }

  std::vector<std::optional<RecordingOutput>> results(inputs.size());
  std::vector<std::exception_ptr> errors(inputs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      try {
        results[i] = DiarizeRecording(inputs[i], models, run_config);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::max(1, config.workers));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < std::min(n_workers, inputs.size()); ++w) pool.emplace_back(work);
  work();
  for (auto &t : pool) t.join();
  for (const auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }

  fs::create_directories(args.out_dir);
  std::string all;
  std::string report = "# vbdiar diarize\n" + FormatConfig(run_config);
  report += "# recording,embeddings,pca_dim,threshold,calibrated,ahc_clusters,vb_speakers,vb_iterations,"
            "overlap_regions,overlap_added,segments\n";
  for (const auto &r : results) {
    WriteRttm(r->hypothesis, (fs::path(args.out_dir) / (r->hypothesis.recording_id + ".rttm")).string());
    all += FormatRttm(r->hypothesis);
    const auto &rep = r->report;
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%ld,%ld,%.6f,%d,%d,%d,%d,%d,%zu,%zu\n", rep.id.c_str(),
                  static_cast<long>(rep.embeddings), static_cast<long>(rep.pca_dim), rep.threshold,
                  rep.calibrated ? 1 : 0, rep.ahc_clusters, rep.vb_speakers, rep.vb_iterations, rep.overlap_regions,
                  rep.overlap_added, r->hypothesis.segments.size());
    report += line;
  }
  text::OpenOut((fs::path(args.out_dir) / "all.rttm").string()) << all;
  text::OpenOut((fs::path(args.out_dir) / "report.txt").string()) << report;
  std::cout << report;
  return 0;
}

int RunScore(const std::string &ref_path, const std::string &hyp_path, double collar, bool no_overlaps,
             const std::string &out_path) {
  const auto ref = ReadRttmAll(ref_path);
  const auto hyp = ReadRttmAll(hyp_path);
  DerOptions opts;
  opts.collar = collar;
  opts.score_overlaps = !no_overlaps;
  const auto score = ScoreCorpus(ref, hyp, opts);
  const auto report = FormatScoreReport(score);
  std::cout << report;
  if (!out_path.empty()) text::OpenOut(out_path) << report;
  for (const auto &id : score.undefined) std::cerr << "undefined DER for '" << id << "' (no reference speech)\n";
  return score.undefined.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Speaker diarization by PLDA/AHC and Bayesian HMM clustering of embeddings"};
  app.require_subcommand(1);

  DiarizeArgs d;
  auto *diarize = app.add_subcommand("diarize", "Cluster embeddings into speaker-labelled RTTM");
  diarize->add_option("--preset", d.preset, "system1, mcclane, system2, system2b, system3, system4")
      ->capture_default_str();
  diarize->add_option("--config", d.config_file, "key = value file applied on top of the preset");
  diarize->add_option("--set", d.settings, "single key=value override (repeatable)");
  diarize->add_option("--embeddings", d.embeddings, "embedding CSV pattern; repeat once per channel")->required();
  diarize->add_option("--vad", d.vad_dir, "directory of <recording>.lab files")->required();
  diarize->add_option("--plda", d.plda, "PLDA model")->required();
  diarize->add_option("--plda2", d.plda2, "second PLDA model to interpolate with");
  diarize->add_option("--eigenvoice", d.eigenvoice, "eigenvoice model for the frame-level pass");
  diarize->add_option("--features", d.features_dir, "directory of <recording>.csv frame features");
  diarize->add_option("--overlap-model", d.overlap_model, "logistic-regression overlap detector");
  diarize->add_option("--transform", d.transform, "fixed centering/whitening transform instead of estimating one");
  diarize->add_option("--workers", d.workers, "parallel recordings");
  diarize->add_option("--out", d.out_dir, "output directory")->required();

  std::string ref, hyp, score_out;
  double collar = 0.0;
  bool no_overlaps = false;
  auto *score = app.add_subcommand("score", "DER/JER of a hypothesis RTTM against a reference RTTM");
  score->add_option("--ref", ref, "reference RTTM")->required();
  score->add_option("--hyp", hyp, "hypothesis RTTM")->required();
  score->add_option("--collar", collar, "seconds excluded around reference boundaries")->capture_default_str();
  score->add_flag("--no-overlaps", no_overlaps, "skip regions with overlapping reference speech");
  score->add_option("--out", score_out, "also write the report here");

  SynthCorpusOptions so;
  std::string synth_dir;
  auto *synth = app.add_subcommand("synth", "Write a synthetic corpus with models and references");
  synth->add_option("--out", synth_dir, "output directory")->required();
  synth->add_option("--recordings", so.recordings)->capture_default_str();
  synth->add_option("--min-speakers", so.min_speakers)->capture_default_str();
  synth->add_option("--max-speakers", so.max_speakers)->capture_default_str();
  synth->add_option("--segments", so.segments, "embeddings per recording")->capture_default_str();
  synth->add_option("--dim", so.dim)->capture_default_str();
  synth->add_option("--separation", so.separation, "across/within variance ratio")->capture_default_str();
  synth->add_option("--overlap-rate", so.overlap_rate)->capture_default_str();
  synth->add_option("--seed", so.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*diarize) return RunDiarize(d);
    if (*score) return RunScore(ref, hyp, collar, no_overlaps, score_out);
    if (*synth) {
      for (const auto &id : WriteSyntheticCorpus(so, synth_dir)) std::cout << id << '\n';
      return 0;
    }
  } catch (const Error &e) {
    std::cerr << "vbdiar: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception &e) {
    std::cerr << "vbdiar: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
