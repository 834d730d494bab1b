// Copyright 2026 The sentsimp Authors
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

#include "sentsimp/corpus.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "scratch.h"
#include "sentsimp/error.h"
#include "sentsimp/tokenizer.h"

namespace sentsimp {
namespace {

using testing_support::scratch_dir;
using testing_support::write_file;

std::vector<TokenizedPair> synthetic_pairs(std::size_t n) {
  std::vector<TokenizedPair> out;
  for (std::size_t i = 0; i < n; ++i) {
    TokenizedPair p;
    p.source = {kBosId};
    for (std::size_t j = 0; j < 1 + i % 5; ++j) p.source.push_back(static_cast<TokenId>(4 + i + j));
    p.source.push_back(kEosId);
    p.target = {kBosId, static_cast<TokenId>(100 + i), kEosId};
    out.push_back(p);
  }
  return out;
}

TEST(LoadParallel, AlignsLines) {
  const auto dir = scratch_dir();
  const auto src = write_file(dir / "s", "a1\na2\na3\n");
  const auto tgt = write_file(dir / "t", "b1\nb2\nb3\n");
  const auto ex = load_parallel(src, tgt);
  ASSERT_EQ(ex.size(), 3u);
  EXPECT_EQ(ex[0], (ParallelExample{"a1", "b1"}));
  EXPECT_EQ(ex[2], (ParallelExample{"a3", "b3"}));
}

TEST(LoadParallel, DropsEmptyPairWithWarning) {
  const auto dir = scratch_dir();
  const auto src = write_file(dir / "s", "a1\n   \na3\n");
  const auto tgt = write_file(dir / "t", "b1\nb2\nb3\n");
  std::vector<std::string> warnings;
  const auto ex = load_parallel(src, tgt, [&](std::string_view w) { warnings.emplace_back(w); });
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[1].source, "a3");
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("line 2"), std::string::npos);
}

TEST(LoadParallel, StripsTrailingWhitespace) {
  const auto dir = scratch_dir();
  const auto ex = load_parallel(write_file(dir / "s", "a b \t\r\n"), write_file(dir / "t", "c  \n"));
  EXPECT_EQ(ex[0], (ParallelExample{"a b", "c"}));
}

TEST(LoadParallel, CountMismatchNamesBothCounts) {
  const auto dir = scratch_dir();
  const auto src = write_file(dir / "s", "a\nb\nc\n");
  const auto tgt = write_file(dir / "t", "a\nb\n");
  try {
    load_parallel(src, tgt);
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3"), std::string::npos);
    EXPECT_NE(msg.find("2"), std::string::npos);
  }
}

TEST(LoadParallel, MissingFileIsIoError) {
  const auto dir = scratch_dir();
  EXPECT_THROW(load_parallel((dir / "nope").string(), (dir / "nope2").string()), IoError);
}

TEST(LoadParallel, RoundTrip) {
  const auto dir = scratch_dir();
  const std::vector<ParallelExample> ex = {{"a b", "c"}, {"d", "e f g"}, {"caf\xc3\xa9", "x"}};
  save_parallel(ex, (dir / "s").string(), (dir / "t").string());
  EXPECT_EQ(load_parallel((dir / "s").string(), (dir / "t").string()), ex);
}

TEST(LoadEval, EightReferences) {
  const auto dir = scratch_dir();
  std::string src, ref;
  for (int i = 0; i < 359; ++i) {
    src += "complex " + std::to_string(i) + "\n";
    ref += "simple " + std::to_string(i) + "\n";
  }
  write_file(dir / "turk.src", src);
  for (int r = 0; r < 8; ++r) write_file(dir / ("turk.ref." + std::to_string(r)), ref);
  const auto ex = load_eval_stem((dir / "turk").string());
  ASSERT_EQ(ex.size(), 359u);
  EXPECT_EQ(ex[0].references.size(), 8u);
  EXPECT_EQ(corpus_stats(ex).num_pairs, 359u);
  EXPECT_EQ(corpus_stats(ex).num_refs, 8u);
}

TEST(LoadEval, SingleReference) {
  const auto dir = scratch_dir();
  const auto ex = load_eval(write_file(dir / "s", "a\nb\n"), {write_file(dir / "r", "x\ny\n")});
  ASSERT_EQ(ex.size(), 2u);
  EXPECT_EQ(ex[1], (EvalExample{"b", {"y"}}));
}

TEST(LoadEval, MismatchNamesOffendingFile) {
  const auto dir = scratch_dir();
  const auto src = write_file(dir / "s", "a\nb\nc\n");
  const auto good = write_file(dir / "good.ref", "a\nb\nc\n");
  const auto bad = write_file(dir / "short.ref", "a\nb\n");
  try {
    load_eval(src, {good, bad});
    FAIL() << "expected an error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("short.ref"), std::string::npos);
  }
}

TEST(CorpusStats, JsonObject) {
  const std::vector<ParallelExample> ex = {{"a b c", "a"}, {"a", "b c"}};
  const auto s = corpus_stats(ex);
  EXPECT_EQ(s.max_src_tokens, 3u);
  EXPECT_EQ(s.max_tgt_tokens, 2u);
  EXPECT_EQ(s.to_json(), R"({"num_pairs":2,"num_refs":1,"max_src_tokens":3,"max_tgt_tokens":2})");
}

TEST(MakeBatches, Sizes) {
  const auto b = make_batches(synthetic_pairs(10), 4, kPadId, 80);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size(), 4u);
  EXPECT_EQ(b[1].size(), 4u);
  EXPECT_EQ(b[2].size(), 2u);
}

TEST(MakeBatches, EmptyInput) { EXPECT_TRUE(make_batches({}, 4, kPadId, 80).empty()); }

TEST(MakeBatches, FileOrderWithoutSeed) {
  const auto pairs = synthetic_pairs(5);
  const auto b = make_batches(pairs, 5, kPadId, 80);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_EQ(b[0].target_in_ids(r, 1), pairs[r].target[1]);
}

TEST(MakeBatches, Padding) {
  std::vector<TokenizedPair> pairs(2);
  pairs[0].source = {kBosId, 4, kEosId};
  pairs[1].source = {kBosId, 4, 5, 6, 7, 8, kEosId};
  pairs[0].target = pairs[1].target = {kBosId, 9, kEosId};
  const auto b = make_batches(pairs, 2, kPadId, 80);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].source_ids.cols, 7u);
  std::size_t pads = 0;
  for (std::size_t c = 0; c < 7; ++c) {
    if (!b[0].source_pad_mask(0, c)) {
      ++pads;
      EXPECT_EQ(b[0].source_ids(0, c), kPadId);
    }
  }
  EXPECT_EQ(pads, 4u);
}

TEST(MakeBatches, TargetShift) {
  std::vector<TokenizedPair> pairs(2);
  pairs[0].source = pairs[1].source = {kBosId, 4, kEosId};
  pairs[0].target = {kBosId, 10, 11, 12, kEosId};
  pairs[1].target = {kBosId, 13, kEosId};
  const auto b = make_batches(pairs, 2, kPadId, 80)[0];
  ASSERT_EQ(b.target_in_ids.cols, 4u);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& t = pairs[r].target;
    EXPECT_EQ(b.target_in_ids(r, 0), kBosId);
    for (std::size_t c = 0; c + 1 < t.size(); ++c) {
      EXPECT_EQ(b.target_in_ids(r, c), t[c]);
      EXPECT_EQ(b.target_out_ids(r, c), t[c + 1]);
      EXPECT_TRUE(b.target_pad_mask(r, c));
    }
    EXPECT_EQ(b.target_out_ids(r, t.size() - 2), kEosId);
    for (std::size_t c = t.size() - 1; c < 4; ++c) {
      EXPECT_FALSE(b.target_pad_mask(r, c));
      EXPECT_EQ(b.target_in_ids(r, c), kPadId);
      EXPECT_EQ(b.target_out_ids(r, c), kPadId);
    }
  }
}

TEST(MakeBatches, SeededIsDeterministic) {
  const auto pairs = synthetic_pairs(23);
  EXPECT_EQ(make_batches(pairs, 4, kPadId, 80, 11), make_batches(pairs, 4, kPadId, 80, 11));
  EXPECT_NE(make_batches(pairs, 4, kPadId, 80, 11), make_batches(pairs, 4, kPadId, 80, 12));
}

TEST(MakeBatches, PartitionsInput) {
  const auto pairs = synthetic_pairs(23);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    std::multiset<TokenId> seen;
    for (const auto& b : make_batches(pairs, 5, kPadId, 80, seed)) {
      for (std::size_t r = 0; r < b.size(); ++r) seen.insert(b.target_in_ids(r, 1));
    }
    std::multiset<TokenId> want;
    for (const auto& p : pairs) want.insert(p.target[1]);
    EXPECT_EQ(seen, want);
  }
}

TEST(MakeBatches, RejectsOverlong) {
  EXPECT_THROW(make_batches(synthetic_pairs(6), 2, kPadId, 4), ContractError);
  EXPECT_THROW(make_batches(synthetic_pairs(2), 0, kPadId, 80), ContractError);
}

}  // namespace
}  // namespace sentsimp
