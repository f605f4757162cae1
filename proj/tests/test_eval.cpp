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

std::vector<UserPrompt> all_prompts(TaskCategory c) {
  std::vector<UserPrompt> out;
  for (const auto& s : enumerate_specs(c)) out.push_back(make_user_prompt(s));
  return out;
}

TEST(Eval, OracleSolvesColors) {
  const auto r = evaluate(Pathway::oracle(), all_prompts(TaskCategory::kColors));
  const auto& c = r.categories[static_cast<int>(TaskCategory::kColors)];
  EXPECT_EQ(c.n, 48);
  EXPECT_EQ(c.accuracy, 1.0);
  EXPECT_EQ(r.overall, 1.0);
  EXPECT_EQ(r.malformed, 0);
}

TEST(Eval, PassThroughPositionIsExactlyAQuarter) {
  // The user prompt carries no layout tokens, so the two objects land at the
  // default cells (0,0) and (0,1): only left-of can hold.
  const auto prompts = all_prompts(TaskCategory::kPosition);
  const auto r = evaluate(Pathway::pass_through(), prompts);
  EXPECT_EQ(r.categories[static_cast<int>(TaskCategory::kPosition)].accuracy, 0.25);
  for (const auto& p : prompts) {
    const bool ok = strictly_satisfied(synthesize(p.tokens), p.spec);
    ASSERT_EQ(ok, *p.spec.relation == Relation::kLeftOf) << p.spec.id;
  }
}

TEST(Eval, StrictAccuracyNeverExceedsMeanSemantic) {
  DatasetOptions o;
  o.seed = 3;
  for (auto c : kAllCategories) o.per_category[c] = 40;
  const auto ds = generate_dataset(o);
  for (const auto& path : {Pathway::pass_through(), Pathway::oracle()}) {
    const auto r = evaluate(path, ds.eval);
    for (const auto& c : r.categories) {
      ASSERT_GT(c.n, 0);
      EXPECT_LE(c.accuracy, c.mean_semantic + 1e-12) << path.label;
    }
  }
}

TEST(Eval, MalformedPolicyOutputsCountAsFailures) {
  // Every output is a lone <end>.
  auto params = PolicyParams::zeros();
  for (int c = 0; c < kNumCategories; ++c) {
    params.tables[static_cast<int>(Feature::kCategory)][c * kVocabSize + Vocabulary::end().value] = 10.0;
  }
  const auto prompts = all_prompts(TaskCategory::kSingleObject);
  const auto r = evaluate(Pathway::policy("broken", params), prompts);
  EXPECT_EQ(r.malformed, static_cast<int>(prompts.size()));
  EXPECT_EQ(r.overall, 0.0);
}

TEST(Eval, EmptySetThrows) {
  EXPECT_THROW(evaluate(Pathway::pass_through(), {}), PreconditionError);
}

TEST(Eval, Deterministic) {
  Rng init(1);
  const auto params = testing::random_params(init, 1.0);
  const auto prompts = all_prompts(TaskCategory::kTwoObject);
  const auto a = evaluate(Pathway::policy("p", params), prompts, 5);
  const auto b = evaluate(Pathway::policy("p", params), prompts, 5);
  EXPECT_EQ(a.overall, b.overall);
  EXPECT_EQ(a.malformed, b.malformed);
  EXPECT_EQ(a.eval_set_hash, b.eval_set_hash);
}

EvalReport report(const std::string& name, double acc, const std::string& hash = "h") {
  EvalReport r;
  r.pathway = name;
  r.eval_set_hash = hash;
  for (auto& c : r.categories) {
    c.n = 10;
    c.accuracy = acc;
  }
  r.overall = acc;
  return r;
}

TEST(Compare, IdenticalReportsGiveZeroDeltas) {
  const auto rows = compare({report("a", 0.4), report("b", 0.4)});
  ASSERT_EQ(rows.size(), 1u);
  for (int c = 0; c < kNumCategories; ++c) {
    EXPECT_EQ(rows[0].delta[c], 0.0);
    EXPECT_EQ(rows[0].relative[c], std::optional<double>(0.0));
  }
}

TEST(Compare, RelativeChangeInPercent) {
  const auto rows = compare({report("base", 0.35), report("ours", 0.62)});
  EXPECT_NEAR(rows[0].overall_delta, 0.27, 1e-12);
  ASSERT_TRUE(rows[0].overall_relative.has_value());
  EXPECT_NEAR(*rows[0].overall_relative, 100.0 * 0.27 / 0.35, 1e-9);
  EXPECT_NEAR(*rows[0].overall_relative, 77.1, 0.05);
  EXPECT_FALSE(compare({report("zero", 0.0), report("x", 0.5)})[0].overall_relative.has_value());
}

TEST(Compare, RejectsBadInputs) {
  EXPECT_THROW(compare({report("a", 0.4)}), PreconditionError);
  EXPECT_THROW(compare({report("a", 0.4, "h1"), report("b", 0.5, "h2")}), PreconditionError);
}

TEST(Eval, FingerprintTracksTheSet) {
  auto prompts = all_prompts(TaskCategory::kCounting);
  const auto h = eval_set_fingerprint(prompts);
  EXPECT_EQ(h.size(), 16u);
  prompts.pop_back();
  EXPECT_NE(eval_set_fingerprint(prompts), h);
}

}  // namespace
}  // namespace reprompt
