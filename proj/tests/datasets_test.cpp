// Copyright 2026 The qsit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsit/datasets.hpp"
#include "qsit/mixopt.hpp"

namespace qsit {
namespace {

const LevelScale kHundred(0.0, 100.0);

TEST(IngestMos, ReadsRecordsAndStats) {
  std::istringstream in("image_id,mos,extra\na.jpg,10,x\nb.jpg,20,y\nc.jpg,60,z\n");
  const auto r = ingest_mos(in, kHundred);
  ASSERT_EQ(r.records.size(), 3u);
  EXPECT_EQ(r.records[1].image_id, "b.jpg");
  EXPECT_DOUBLE_EQ(r.stats.mean, 30.0);
  EXPECT_NEAR(r.stats.stddev, std::sqrt((400.0 + 100.0 + 900.0) / 3.0), 1e-12);
}

TEST(IngestMos, SingleRowHasZeroSpread) {
  std::istringstream in("mos;image_id\n55;\"x;y.png\"\n");
  const auto r = ingest_mos(in, kHundred, {';', true});
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].image_id, "x;y.png");
  EXPECT_DOUBLE_EQ(r.stats.stddev, 0.0);
}

TEST(IngestMos, OutOfScaleStrictNamesRow) {
  std::istringstream in("image_id,mos\na,50\nb,120\n");
  try {
    ingest_mos(in, kHundred);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("120"), std::string::npos) << e.what();
  }
  std::istringstream lenient("image_id,mos\na,50\nb,120\n");
  const auto r = ingest_mos(lenient, kHundred, {',', false});
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.diagnostics.size(), 1u);
}

TEST(IngestMos, MissingColumnsAndEmptyFile) {
  std::istringstream no_mos("image_id,score\na,1\n");
  EXPECT_THROW(ingest_mos(no_mos, kHundred), ParseError);
  std::istringstream empty("");
  EXPECT_THROW(ingest_mos(empty, kHundred), ParseError);
}

std::vector<MosRecord> make_records(const std::vector<double>& mos) {
  std::vector<MosRecord> out;
  for (std::size_t i = 0; i < mos.size(); ++i) out.push_back({"img" + std::to_string(i), mos[i]});
  return out;
}

TEST(Subsample, UniformInputGivesFlatBins) {
  std::vector<double> mos;
  for (int i = 0; i < 1000; ++i) mos.push_back(i / 10.0);
  const auto recs = make_records(mos);
  const auto out = subsample_balanced(recs, 100, 10, 1);
  ASSERT_EQ(out.size(), 100u);
  std::vector<int> per(10, 0);
  for (const auto& r : out) ++per[std::min(9, static_cast<int>((r.mos - 0.0) / 99.9 * 10))];
  for (int c : per) EXPECT_NEAR(c, 10, 1);
}

TEST(Subsample, SubMultisetInInputOrder) {
  Rng rng(4);
  std::vector<double> mos;
  for (int i = 0; i < 500; ++i) mos.push_back(100 - std::min(99.0, std::abs(rng.normal()) * 20));
  const auto recs = make_records(mos);
  const auto out = subsample_balanced(recs, 137, 10, 99);
  ASSERT_EQ(out.size(), 137u);
  std::size_t cursor = 0;
  for (const auto& r : out) {
    while (cursor < recs.size() && recs[cursor] != r) ++cursor;
    ASSERT_LT(cursor, recs.size()) << "record not in input order: " << r.image_id;
    ++cursor;
  }
}

TEST(Subsample, SkewedInputMovesTowardCentre) {
  Rng rng(21);
  std::vector<double> mos;
  for (int i = 0; i < 5000; ++i) {
    double g = 0;
    for (int k = 0; k < 4; ++k) g -= std::log(1.0 - rng.uniform());
    mos.push_back(std::clamp(100.0 - (16.0 + 3.0 * g), 0.0, 100.0));
  }
  const auto recs = make_records(mos);
  const auto before = pool_stats(recs);
  const auto out = subsample_balanced(recs, 800, 10, 3);
  const auto after = pool_stats(out);
  EXPECT_GT(after.stddev, before.stddev);
  EXPECT_LT(std::abs(after.mean - 50), std::abs(before.mean - 50));
}

TEST(Subsample, EdgeCases) {
  const auto recs = make_records({1, 2, 3, 4});
  EXPECT_EQ(subsample_balanced(recs, 4, 10, 0), recs);
  EXPECT_TRUE(subsample_balanced(recs, 0, 10, 0).empty());
  EXPECT_THROW(subsample_balanced(recs, 5, 10, 0), DataError);
  EXPECT_THROW(subsample_balanced(recs, 2, 1, 0), ConfigError);
  const auto same = make_records({7, 7, 7, 7});
  EXPECT_EQ(subsample_balanced(same, 2, 10, 0).size(), 2u);
}

TEST(Subsample, DeterministicPerSeed) {
  std::vector<double> mos;
  for (int i = 0; i < 300; ++i) mos.push_back((i * 37) % 100);
  const auto recs = make_records(mos);
  EXPECT_EQ(subsample_balanced(recs, 50, 10, 8), subsample_balanced(recs, 50, 10, 8));
  EXPECT_NE(subsample_balanced(recs, 50, 10, 8), subsample_balanced(recs, 50, 10, 9));
}

TEST(EmitD1, AnswersCarryLevelLabel) {
  const auto pairs = emit_d1_pairs(make_records({85, 0, 50}), kHundred);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].answer, "The quality of the image is excellent.");
  EXPECT_EQ(pairs[1].answer, "The quality of the image is bad.");
  EXPECT_EQ(pairs[2].answer, "The quality of the image is fair.");
  for (const auto& p : pairs) {
    EXPECT_EQ(p.system, std::string(kScoringSystemPrefix));
    int hits = 0;
    for (auto l : kItuLabels) {
      for (std::size_t pos = p.answer.find(l); pos != std::string::npos; pos = p.answer.find(l, pos + 1)) ++hits;
    }
    EXPECT_EQ(hits, 1) << p.answer;
  }
  EXPECT_THROW(emit_d1_pairs(make_records({101}), kHundred), OutOfRangeError);
}

TEST(EmitD1, SerializationRoundTrip) {
  const auto pairs = emit_d1_pairs(make_records({12.5, 99, 40}), kHundred);
  for (bool inline_system : {false, true}) {
    std::ostringstream first;
    write_pairs(first, pairs, inline_system);
    std::istringstream in(first.str());
    const auto load = load_pool(in, PoolTag::kD1);
    EXPECT_EQ(load.pairs, pairs);
    std::ostringstream second;
    write_pairs(second, load.pairs, inline_system);
    EXPECT_EQ(first.str(), second.str());
  }
}

TEST(LoadPool, EmptyPoolWarnsAndMalformedLineFails) {
  std::istringstream empty("");
  const auto load = load_pool(empty, PoolTag::kD2);
  EXPECT_TRUE(load.pairs.empty());
  EXPECT_EQ(load.warnings.size(), 1u);

  std::istringstream bad(
      "{\"id\":\"a\",\"conversations\":[{\"from\":\"human\",\"value\":\"q\"},{\"from\":\"gpt\",\"value\":\"a\"}]}\n"
      "{\"id\":\"b\",\"conversations\":[]}\n");
  try {
    load_pool(bad, PoolTag::kD2);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line, 2u);
  }
}

TEST(LoadPool, D1RequiresSystemPrefix) {
  std::istringstream in(
      "{\"id\":\"a\",\"conversations\":[{\"from\":\"human\",\"value\":\"q\"},{\"from\":\"gpt\",\"value\":\"a\"}]}\n");
  EXPECT_THROW(load_pool(in, PoolTag::kD1), ParseError);
}

std::array<Pool, 3> full_pools() {
  return {Pool::synthetic(PoolTag::kD1, 16000), Pool::synthetic(PoolTag::kD2, 150000),
          Pool::synthetic(PoolTag::kD3, 150000)};
}

PoolCounts count_manifest(const Manifest& m) {
  PoolCounts c{};
  for (const auto& e : m.entries) ++c[static_cast<std::size_t>(e.pool)];
  return c;
}

TEST(SampleMixture, ExactPerPoolCounts) {
  const auto pools = full_pools();
  const PoolCounts want{16000, 35000, 14600};
  const auto m = sample_mixture(pools, want, 5);
  EXPECT_EQ(m.entries.size(), 65600u);
  EXPECT_EQ(count_manifest(m), want);
  std::set<std::string> ids;
  for (const auto& e : m.entries) ids.insert(e.id);
  EXPECT_EQ(ids.size(), 65600u);
}

TEST(SampleMixture, RatioScaledToBase) {
  const auto pools = full_pools();
  PoolCounts c{};
  const double w[3] = {1.00, 2.50, 1.04};
  for (int i = 0; i < 3; ++i) c[i] = round_half_up(16000 * w[i]);
  EXPECT_EQ(c, (PoolCounts{16000, 40000, 16640}));
  EXPECT_EQ(count_manifest(sample_mixture(pools, c, 1)), c);
}

TEST(SampleMixture, DeterministicAndSeedSensitive) {
  const auto pools = full_pools();
  const PoolCounts c{100, 200, 50};
  std::ostringstream a, b, d;
  write_manifest(a, sample_mixture(pools, c, 77));
  write_manifest(b, sample_mixture(pools, c, 77));
  const auto other = sample_mixture(pools, c, 78);
  write_manifest(d, other);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), d.str());
  EXPECT_EQ(count_manifest(other), c);
}

TEST(SampleMixture, ZeroCountOmitsPool) {
  const auto pools = full_pools();
  const auto m = sample_mixture(pools, {0, 10, 10}, 2);
  for (const auto& e : m.entries) EXPECT_NE(e.pool, PoolTag::kD1);
}

TEST(SampleMixture, ReplacementOnlyWhenAllowed) {
  const std::array<Pool, 3> pools{Pool::synthetic(PoolTag::kD1, 10), Pool::synthetic(PoolTag::kD2, 10),
                                  Pool::synthetic(PoolTag::kD3, 10)};
  EXPECT_THROW(sample_mixture(pools, {11, 0, 0}, 1), DataError);
  const auto m = sample_mixture(pools, {25, 0, 0}, 1, true);
  EXPECT_TRUE(m.with_replacement[0]);
  EXPECT_EQ(m.entries.size(), 25u);
}

TEST(Manifest, RoundTripAndSummary) {
  const auto pools = full_pools();
  const auto m = sample_mixture(pools, {30, 20, 10}, 4);
  std::ostringstream out;
  write_manifest(out, m);
  std::istringstream in(out.str());
  const auto back = read_manifest(in);
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.counts, m.counts);
  EXPECT_EQ(back.seed, m.seed);
}

}  // namespace
}  // namespace qsit
