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


#include "vbdiar/corpus_io.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "vbdiar/rng.hpp"

namespace vbdiar {
namespace {

using testing::KindOf;
using testing::TempDir;

TEST(ReadEmbeddings, ParsesTwoSegments) {
  TempDir dir;
  const auto rec = ReadEmbeddings(dir.Write("r1.csv", "0.0,1.5,1.0,0.0\n0.25,1.5,0.0,1.0\n"));
  EXPECT_EQ(rec.recording_id, "r1");
  EXPECT_EQ(rec.dim, 2);
  ASSERT_EQ(rec.size(), 2u);
  EXPECT_DOUBLE_EQ(rec.segments[1].onset, 0.25);
  EXPECT_DOUBLE_EQ(rec.segments[1].vector(1), 1.0);
}

TEST(ReadEmbeddings, SingleValue) {
  TempDir dir;
  const auto rec = ReadEmbeddings(dir.Write("r.csv", "0.0,1.5,0.5\n"));
  EXPECT_EQ(rec.dim, 1);
  EXPECT_DOUBLE_EQ(rec.segments[0].vector(0), 0.5);
}

TEST(ReadEmbeddings, SortsByOnsetThenDuration) {
  TempDir dir;
  const auto rec = ReadEmbeddings(dir.Write("r.csv", "0.5,1.5,1\n0.0,1.5,2\n0.0,1.0,3\n"));
  EXPECT_DOUBLE_EQ(rec.segments[0].vector(0), 3.0);
  EXPECT_DOUBLE_EQ(rec.segments[1].vector(0), 2.0);
  EXPECT_DOUBLE_EQ(rec.segments[2].vector(0), 1.0);
}

TEST(ReadEmbeddings, Errors) {
  TempDir dir;
  EXPECT_EQ(KindOf([&] { ReadEmbeddings(dir.Write("a.csv", "0,1.5,1,2\n0.25,1.5,1,2,3\n")); }), ErrorKind::kFormat);
  EXPECT_EQ(KindOf([&] { ReadEmbeddings(dir.Write("b.csv", "0,1.5,1\n0,1.5,abc\n")); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([&] { ReadEmbeddings(dir.Write("c.csv", "0,1.5\n")); }), ErrorKind::kParse);
  EXPECT_EQ(KindOf([&] { ReadEmbeddings(dir.Write("d.csv", "")); }), ErrorKind::kEmptyInput);
  try {
    ReadEmbeddings(dir.Write("e.csv", "0,1.5,1\n\n0,1.5,x\n"));
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("e.csv:3"), std::string::npos) << e.what();
  }
}

TEST(ReadVad, SingleRegion) {
  TempDir dir;
  const auto r = ReadVad(dir.Write("a.lab", "0.00 5.00 speech\n"));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r[0].onset, 0.0);
  EXPECT_DOUBLE_EQ(r[0].offset, 5.0);
}

TEST(ReadVad, MergesAdjacentAndOverlapping) {
  TempDir dir;
  const auto r = ReadVad(dir.Write("a.lab", "0.0 2.0 speech\n2.0 4.0 speech\n6 8 speech\n5 6.5 speech\n"));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0].offset, 4.0);
  EXPECT_DOUBLE_EQ(r[1].onset, 5.0);
  EXPECT_DOUBLE_EQ(r[1].offset, 8.0);
}

TEST(ReadVad, Errors) {
  TempDir dir;
  EXPECT_EQ(KindOf([&] { ReadVad(dir.Write("a.lab", "3.0 1.0 speech\n")); }), ErrorKind::kFormat);
  EXPECT_EQ(KindOf([&] { ReadVad(dir.Write("b.lab", "0 1 music\n")); }), ErrorKind::kFormat);
}

TEST(ReadVad, MergeIsIdempotent) {
  TempDir dir;
  Rng rng(5);
  std::string content;
  for (int i = 0; i < 40; ++i) {
    const double on = 20.0 * rng.Uniform();
    content += std::to_string(on) + " " + std::to_string(on + 0.1 + 2.0 * rng.Uniform()) + " speech\n";
  }
  const auto once = ReadVad(dir.Write("a.lab", content));
  WriteVad(once, dir.File("b.lab"));
  const auto twice = ReadVad(dir.File("b.lab"));
  ASSERT_EQ(once.size(), twice.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(once[i].onset, twice[i].onset);
    EXPECT_EQ(once[i].offset, twice[i].offset);
  }
}

TEST(UniformSubsegmentation, ThreeSecondRegion) {
  const auto segs = UniformSubsegmentation({{0.0, 3.0}}, 1.5, 0.25);
  std::vector<double> expected;
  for (int k = 0; k * 0.25 + 1.5 <= 3.0 + 1e-12; ++k) expected.push_back(k * 0.25);
  ASSERT_EQ(segs.size(), expected.size());
  ASSERT_EQ(segs.size(), 7u);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    EXPECT_NEAR(segs[i].onset, expected[i], 1e-12);
    EXPECT_DOUBLE_EQ(segs[i].duration, 1.5);
  }
}

TEST(UniformSubsegmentation, ShortRegionAndEmpty) {
  const auto segs = UniformSubsegmentation({{0.0, 1.0}}, 1.5, 0.25);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_DOUBLE_EQ(segs[0].duration, 1.0);
  EXPECT_TRUE(UniformSubsegmentation({}, 1.5, 0.25).empty());
}

TEST(UniformSubsegmentation, TrailingRemainder) {
  // Regular windows end at 3.0; 0.1 s left is below shift/2, 0.2 s is not.
  EXPECT_EQ(UniformSubsegmentation({{0.0, 3.1}}, 1.5, 0.25).size(), 7u);
  const auto segs = UniformSubsegmentation({{0.0, 3.2}}, 1.5, 0.25);
  ASSERT_EQ(segs.size(), 8u);
  EXPECT_NEAR(segs.back().onset, 1.7, 1e-12);
  EXPECT_NEAR(segs.back().end(), 3.2, 1e-12);
}

TEST(UniformSubsegmentation, StaysInsideRegionsAndCoversThem) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SpeechRegion> regions;
    double t = 0.0;
    for (int i = 0; i < 5; ++i) {
      t += 0.1 + rng.Uniform();
      const double len = 0.05 + 6.0 * rng.Uniform();
      regions.push_back({t, t + len});
      t += len;
    }
    const auto segs = UniformSubsegmentation(regions, 1.5, 0.25);
    for (const auto &r : regions) {
      double covered_to = r.onset;
      for (const auto &s : segs) {
        if (s.onset >= r.onset - 1e-9 && s.onset < r.offset) {
          EXPECT_LE(s.end(), r.offset + 1e-9);
          EXPECT_LE(s.onset, covered_to + 1e-9);  // no holes
          covered_to = std::max(covered_to, s.end());
        }
      }
      EXPECT_GT(covered_to, r.offset - 0.125 - 1e-9);
    }
  }
}

TEST(Rttm, LineFormat) {
  DiarizationHypothesis h{"r1", {{0.0, 2.5, "spk0"}}};
  EXPECT_EQ(FormatRttm(h), "SPEAKER r1 1 0.000 2.500 <NA> <NA> spk0 <NA> <NA>\n");
}

TEST(Rttm, EmptyAndOverlapping) {
  TempDir dir;
  WriteRttm({"r", {}}, dir.File("e.rttm"));
  EXPECT_TRUE(ReadRttm(dir.File("e.rttm")).segments.empty());
  DiarizationHypothesis h{"r", {{0.0, 2.0, "A"}, {1.0, 2.0, "B"}}};
  WriteRttm(h, dir.File("o.rttm"));
  EXPECT_EQ(ReadRttm(dir.File("o.rttm")).segments.size(), 2u);
}

TEST(Rttm, RoundTripRandom) {
  TempDir dir;
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    DiarizationHypothesis h{"rec", {}};
    for (int s = 0; s < 3; ++s) {
      double t = rng.Uniform();
      for (int i = 0; i < 5; ++i) {
        const double d = 0.01 + 3.0 * rng.Uniform();
        h.segments.push_back({t, d, "s" + std::to_string(s)});
        t += d + 0.01 + rng.Uniform();
      }
    }
    WriteRttm(h, dir.File("r.rttm"));
    auto back = ReadRttm(dir.File("r.rttm"));
    SortSegments(h.segments);
    ASSERT_EQ(back.segments.size(), h.segments.size());
    for (std::size_t i = 0; i < h.segments.size(); ++i) {
      EXPECT_NEAR(back.segments[i].onset, h.segments[i].onset, 5e-4 + 1e-12);
      EXPECT_NEAR(back.segments[i].duration, h.segments[i].duration, 5e-4 + 1e-12);
      EXPECT_EQ(back.segments[i].speaker, h.segments[i].speaker);
    }
  }
}

TEST(Rttm, NineFieldsIsAParseError) {
  TempDir dir;
  EXPECT_EQ(KindOf([&] { ReadRttm(dir.Write("a.rttm", "SPEAKER r 1 0.0 1.0 <NA> <NA> A <NA>\n")); }),
            ErrorKind::kParse);
}

TEST(Rttm, OutOfOrderLinesAreSorted) {
  TempDir dir;
  const auto h = ReadRttm(dir.Write("a.rttm",
                                    "SPEAKER r 1 5.000 1.000 <NA> <NA> B <NA> <NA>\n"
                                    "SPEAKER r 1 1.000 1.000 <NA> <NA> A <NA> <NA>\n"));
  ASSERT_EQ(h.segments.size(), 2u);
  EXPECT_EQ(h.segments[0].speaker, "A");
}

TEST(LabelsToHypothesis, MidpointSplitAndMerge) {
  // Windows of 1.5 s every 0.25 s; the first four belong to A, the rest to B.
  std::vector<TimeSpan> spans;
  for (int k = 0; k < 8; ++k) spans.push_back({0.25 * k, 1.5});
  const auto h = LabelsToHypothesis("r", spans, {0, 0, 0, 0, 1, 1, 1, 1}, {"A", "B"});
  ASSERT_EQ(h.segments.size(), 2u);
  // Owned span of window k (interior) is [0.25k + 0.625, 0.25k + 0.875).
  EXPECT_NEAR(h.segments[0].onset, 0.0, 1e-12);
  EXPECT_NEAR(h.segments[0].end(), 0.75 + 0.875, 1e-12);
  EXPECT_NEAR(h.segments[1].onset, 0.75 + 0.875, 1e-12);
  EXPECT_NEAR(h.segments[1].end(), 1.75 + 1.5, 1e-12);
}

TEST(OwnedSpans, PartitionTheUnion) {
  std::vector<TimeSpan> spans = {{0.0, 1.5}, {0.25, 1.5}, {5.0, 1.0}};
  const auto owned = OwnedSpans(spans);
  EXPECT_NEAR(owned[0].end(), 0.875, 1e-12);
  EXPECT_NEAR(owned[1].onset, 0.875, 1e-12);
  EXPECT_NEAR(owned[1].end(), 1.75, 1e-12);
  EXPECT_NEAR(owned[2].onset, 5.0, 1e-12);
  EXPECT_NEAR(owned[2].duration, 1.0, 1e-12);
}

}  // namespace
}  // namespace vbdiar
