/* Copyright 2026 The RePrompt Lab Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace reprompt {
namespace {

using testing::col;
using testing::obj;
using testing::toks;

TEST(Synthesizer, RelationWordsAreIgnored) {
  const Scene s = synthesize(toks("a dog above a cow"));
  ASSERT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.objects[0].cls, obj("dog"));
  EXPECT_EQ(s.objects[0].cell, (Cell{0, 0}));
  EXPECT_EQ(s.objects[1].cls, obj("cow"));
  EXPECT_EQ(s.objects[1].cell, (Cell{0, 1}));
}

TEST(Synthesizer, LayoutTokensOverrideCells) {
  const Scene s = synthesize(toks("a dog at-top-left , a cow at-bottom-left"));
  ASSERT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.objects[0].cell, (Cell{0, 0}));
  EXPECT_EQ(s.objects[1].cell, (Cell{2, 0}));
}

TEST(Synthesizer, EdgeLayoutTokensMoveOneCoordinate) {
  // cow defaults to (0,1); at-bottom keeps the column, at-left keeps the row.
  EXPECT_EQ(synthesize(toks("dog cow at-bottom")).objects[1].cell, (Cell{2, 1}));
  EXPECT_EQ(synthesize(toks("dog cow at-left")).objects[1].cell, (Cell{0, 0}));
  EXPECT_EQ(synthesize(toks("dog cow at-right")).objects[1].cell, (Cell{0, 2}));
  EXPECT_EQ(synthesize(toks("dog cat cow bird at-top")).objects[3].cell, (Cell{0, 0}));
}

TEST(Synthesizer, LayoutOnlyAppliesRightAfterANoun) {
  const Scene s = synthesize(toks("a dog , at-bottom-right"));
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.objects[0].cell, (Cell{0, 0}));
}

TEST(Synthesizer, NumeralsCapAtTwoCopies) {
  EXPECT_EQ(synthesize(toks("three cat")).count_class(obj("cat")), 2);
  EXPECT_EQ(synthesize(toks("four cat")).count_class(obj("cat")), 2);
  EXPECT_EQ(synthesize(toks("two cat")).count_class(obj("cat")), 2);
  EXPECT_EQ(synthesize(toks("one cat")).count_class(obj("cat")), 1);
  EXPECT_EQ(synthesize(toks("cat , cat , cat")).count_class(obj("cat")), 3);
}

TEST(Synthesizer, EmptyPromptGivesEmptyScene) {
  const Scene s = synthesize(TokenSeq{});
  EXPECT_TRUE(s.objects.empty());
  EXPECT_EQ(s.detail_level, 0);
}

TEST(Synthesizer, ColorBindingWindow) {
  // "red cube": distance 1, bound.
  EXPECT_EQ(synthesize(toks("a red cube")).objects[0].color, std::optional<int>(col("red")));
  // "red bright cube": distance 2, bound.
  EXPECT_EQ(synthesize(toks("red bright cube")).objects[0].color,
            std::optional<int>(col("red")));
  // "red bright sharp cube": distance 3, dropped.
  EXPECT_FALSE(synthesize(toks("red bright sharp cube")).objects[0].color.has_value());
  // Postnominal colors never bind.
  EXPECT_FALSE(synthesize(toks("a cube in white")).objects[0].color.has_value());
  // A color binds to the first noun only.
  const Scene s = synthesize(toks("red cube ball"));
  EXPECT_EQ(s.objects[0].color, std::optional<int>(col("red")));
  EXPECT_FALSE(s.objects[1].color.has_value());
}

TEST(Synthesizer, DetailLevelCountsDistinctTokensCappedAtFive) {
  EXPECT_EQ(synthesize(toks("bright bright bright")).detail_level, 1);
  EXPECT_EQ(synthesize(toks("a photo of bright detailed")).detail_level, 5);
  EXPECT_EQ(synthesize(toks("a photo of and in bright detailed sharp")).detail_level, 5);
}

TEST(Synthesizer, MoreThanNineObjectsWrapAndCollide) {
  const Scene s = synthesize(toks("cat cat cat cat cat cat cat cat cat dog"));
  ASSERT_EQ(s.objects.size(), 10u);
  EXPECT_EQ(s.objects[8].cell, (Cell{2, 2}));
  EXPECT_EQ(s.objects[9].cell, (Cell{0, 0}));
  EXPECT_EQ(s.collisions(), 1);
}

TEST(Synthesizer, StructureTokensAreRejected) {
  EXPECT_THROW(synthesize(toks("a dog </prompt>")), PreconditionError);
}

TEST(Synthesizer, PropertiesOnRandomPrompts) {
  const Vocabulary v;
  std::vector<TokenId> pool;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const TokenId t{static_cast<std::uint16_t>(i)};
    if (!v.is(t, TokenClass::kStructure)) pool.push_back(t);
  }
  Rng rng(5);
  for (int trial = 0; trial < 2000; ++trial) {
    TokenSeq seq(rng.index(30));
    for (auto& t : seq) t = pool[rng.index(pool.size())];
    const Scene a = synthesize(seq);
    ASSERT_EQ(a, synthesize(seq));

    int nouns = 0;
    for (auto t : seq) nouns += v.is(t, TokenClass::kObject);
    ASSERT_GE(static_cast<int>(a.objects.size()), nouns);
    ASSERT_LE(static_cast<int>(a.objects.size()), 2 * nouns);
    for (const auto& o : a.objects) {
      ASSERT_TRUE(o.cell.row >= 0 && o.cell.row < kGridSize);
      ASSERT_TRUE(o.cell.col >= 0 && o.cell.col < kGridSize);
    }
    ASSERT_TRUE(a.detail_level >= 0 && a.detail_level <= kMaxDetailLevel);

    // Without layout tokens every object sits at its default cell, and the
    // objects themselves are unchanged.
    TokenSeq stripped;
    for (auto t : seq) {
      if (!v.is(t, TokenClass::kLayout)) stripped.push_back(t);
    }
    const Scene b = synthesize(stripped);
    ASSERT_EQ(a.objects.size(), b.objects.size());
    for (std::size_t i = 0; i < b.objects.size(); ++i) {
      ASSERT_EQ(b.objects[i].cell, default_cell(static_cast<int>(i)));
      ASSERT_EQ(a.objects[i].cls, b.objects[i].cls);
      ASSERT_EQ(a.objects[i].color, b.objects[i].color);
    }
  }
}

}  // namespace
}  // namespace reprompt
