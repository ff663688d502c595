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


#include "vbdiar/synth.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vbdiar/pipeline.hpp"

namespace vbdiar {
namespace {

using testing::TempDir;

Matrix SampleCovariance(const Matrix &rows) {
  const Matrix centered = rows.rowwise() - rows.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
}

TEST(RandomPldaModel, TotalIsIdentityAndRatiosInRange) {
  const auto m = RandomPldaModel(6, 16.0, 3);
  EXPECT_LT((m.across_class + m.within_class - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(m.across_class, m.within_class);
  EXPECT_GE(es.eigenvalues().minCoeff(), 16.0 - 1e-8);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 32.0 + 1e-8);
}

TEST(SampleRecording, DeterministicPerSeed) {
  const auto m = RandomPldaModel(4, 8.0, 1);
  const auto a = SampleRecording(m, 3, 50, 0.9, 17);
  const auto b = SampleRecording(m, 3, 50, 0.9, 17);
  const auto c = SampleRecording(m, 3, 50, 0.9, 18);
  EXPECT_EQ(a.embeddings.AsMatrix(), b.embeddings.AsMatrix());
  EXPECT_EQ(a.truth.labels, b.truth.labels);
  EXPECT_NE(a.embeddings.AsMatrix(), c.embeddings.AsMatrix());
}

TEST(SampleRecording, GridAndSingleSpeaker) {
  const auto m = RandomPldaModel(4, 8.0, 1);
  const auto r = SampleRecording(m, 1, 20, 0.5, 2);
  ASSERT_EQ(r.embeddings.size(), 20u);
  EXPECT_EQ(r.truth.num_clusters(), 1);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_DOUBLE_EQ(r.embeddings.segments[i].onset, 0.25 * static_cast<double>(i));
    EXPECT_DOUBLE_EQ(r.embeddings.segments[i].duration, 1.5);
  }
}

TEST(SampleRecording, CovariancesMatchTheModel) {
  const auto m = RandomPldaModel(3, 4.0, 5);
  const auto r = SampleRecording(m, 6000, 20000, 0.5, 9);
  const Matrix across = SampleCovariance(r.speaker_means);
  EXPECT_LT((across - m.across_class).norm() / m.across_class.norm(), 0.06);
  Matrix residual(static_cast<Eigen::Index>(r.embeddings.size()), 3);
  for (std::size_t i = 0; i < r.embeddings.size(); ++i) {
    residual.row(static_cast<Eigen::Index>(i)) =
        r.embeddings.segments[i].vector.transpose() - r.speaker_means.row(r.speaker_index[i]);
  }
  EXPECT_LT((SampleCovariance(residual) - m.within_class).norm() / m.within_class.norm(), 0.06);
}

TEST(SampleRecording, ZeroWithinClassGivesExactSpeakerMeans) {
  auto m = RandomPldaModel(3, 4.0, 5);
  m.within_class.setZero();
  const auto r = SampleRecording(m, 2, 30, 0.8, 1);
  for (std::size_t i = 0; i < r.embeddings.size(); ++i) {
    EXPECT_LT((r.embeddings.segments[i].vector.transpose() - r.speaker_means.row(r.speaker_index[i])).cwiseAbs().maxCoeff(),
              1e-12);
  }
}

TEST(SampleSpeakerChain, SwitchRateAndNoSelfJumps) {
  Rng rng(4);
  const auto z = SampleSpeakerChain(rng, 3, 100000, 0.9);
  int switches = 0;
  for (std::size_t t = 1; t < z.size(); ++t) switches += z[t] != z[t - 1];
  EXPECT_NEAR(switches / 99999.0, 0.1, 0.005);
  Rng stuck(5);
  const auto one = SampleSpeakerChain(stuck, 1, 100, 0.0);
  EXPECT_TRUE(std::all_of(one.begin(), one.end(), [](int s) { return s == 0; }));
}

TEST(SampleFramesForLabels, NegativeLabelsFollowTheUbm) {
  const auto model = RandomEigenvoiceModel(3, 2, 2, 4.0, 8);
  Rng rng(1);
  const std::vector<int> labels(60000, -1);
  const Matrix frames = SampleFramesForLabels(model, Matrix::Zero(1, 2), labels, rng);
  const RowVector expected = model.weights.transpose() * model.means;
  const RowVector got = frames.colwise().mean();
  // Standard error of the mixture mean is well below 0.05 here.
  EXPECT_LT((got - expected).cwiseAbs().maxCoeff(), 0.1);
}

TEST(SampleFrameRecording, Deterministic) {
  const auto model = RandomEigenvoiceModel(2, 2, 1, 4.0, 8);
  const auto a = SampleFrameRecording(model, 2, 100, 0.95, 3);
  const auto b = SampleFrameRecording(model, 2, 100, 0.95, 3);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(WriteSyntheticCorpus, ProducesAReadableCorpus) {
  TempDir dir;
  SynthCorpusOptions opt;
  opt.recordings = 2;
  opt.segments = 60;
  opt.dim = 6;
  const auto ids = WriteSyntheticCorpus(opt, dir.path().string());
  EXPECT_EQ(ids, (std::vector<std::string>{"rec01", "rec02"}));
  for (const auto &id : ids) {
    const auto emb = ReadEmbeddings(dir.File("emb/" + id + ".csv"));
    EXPECT_EQ(emb.size(), 60u);
    EXPECT_EQ(emb.dim, 6);
    const auto ref = ReadRttm(dir.File("ref/" + id + ".rttm"));
    EXPECT_EQ(ref.recording_id, id);
    EXPECT_GE(SpeakerLabels(ref).size(), 2u);
    const auto vad = ReadVad(dir.File("vad/" + id + ".lab"));
    ASSERT_EQ(vad.size(), 1u);
    const Matrix feats = ReadFrameFeatures(dir.File("feats/" + id + ".csv"));
    EXPECT_EQ(feats.rows(), static_cast<Eigen::Index>(std::ceil(vad[0].offset * 100.0 - 1e-9)));
  }
  EXPECT_EQ(ReadRttmAll(dir.File("ref.rttm")).size(), 2u);
  EXPECT_EQ(LoadPlda(dir.File("plda.csv")).dim(), 6);
  EXPECT_EQ(LoadLogReg(dir.File("overlap.csv")).weights.size(), 6);
  EXPECT_EQ(LoadEigenvoice(dir.File("eigenvoice.csv")).rank(), 2);
  std::ifstream conf(dir.File("synth.conf"));
  const std::string text((std::istreambuf_iterator<char>(conf)), std::istreambuf_iterator<char>());
  EXPECT_EQ(ApplyConfigText(text, Preset("system1")).pca_var, 0.9);
}

TEST(WriteSyntheticCorpus, SameSeedSameFiles) {
  TempDir dir;
  SynthCorpusOptions opt;
  opt.recordings = 1;
  opt.segments = 80;
  opt.dim = 4;
  WriteSyntheticCorpus(opt, (dir.path() / "a").string());
  WriteSyntheticCorpus(opt, (dir.path() / "b").string());
  auto slurp = [](const std::filesystem::path &p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  for (const char *f : {"emb/rec01.csv", "ref.rttm", "plda.csv", "feats/rec01.csv", "overlap.csv"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
  }
}

}  // namespace
}  // namespace vbdiar
