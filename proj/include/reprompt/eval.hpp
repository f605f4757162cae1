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

#ifndef REPROMPT_EVAL_HPP_
#define REPROMPT_EVAL_HPP_

// GenEval-style strict accuracy for a prompt pathway.

#include <array>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/sft.hpp"
#include "reprompt/synthesizer.hpp"

namespace reprompt {

// True only if every constraint of the spec holds in the scene.
inline bool strictly_satisfied(const Scene& scene, const PromptSpec& spec) {
  const auto& objs = spec.objects;
  auto has = [&scene](int cls) { return scene.first_of(cls) != nullptr; };
  switch (spec.category) {
    case TaskCategory::kSingleObject:
      return has(objs[0].cls);
    case TaskCategory::kTwoObject:
      return has(objs[0].cls) && has(objs[1].cls);
    case TaskCategory::kCounting:
      return scene.count_class(objs[0].cls) == *spec.count;
    case TaskCategory::kColors:
      return detail::color_score(scene, objs[0]) == 1.0;
    case TaskCategory::kPosition: {
      const auto* a = scene.first_of(objs[0].cls);
      const auto* b = scene.first_of(objs[1].cls);
      return a && b && relation_holds(*spec.relation, a->cell, b->cell);
    }
    case TaskCategory::kAttributeBinding:
      return detail::color_score(scene, objs[0]) == 1.0 &&
             detail::color_score(scene, objs[1]) == 1.0;
  }
  return false;
}

enum class PathwayKind : std::uint8_t { kPassThrough, kPolicy, kOracle };

struct Pathway {
  PathwayKind kind = PathwayKind::kPassThrough;
  std::string label;
  const PolicyParams* params = nullptr;  // kPolicy only
  RewardConfig reward_config;            // kOracle padding bounds
  int max_len = kDefaultMaxLen;

  static Pathway pass_through() {
    return {PathwayKind::kPassThrough, "pass_through", nullptr, {}, kDefaultMaxLen};
  }
  static Pathway oracle(const RewardConfig& cfg = {}) {
    return {PathwayKind::kOracle, "oracle", nullptr, cfg, kDefaultMaxLen};
  }
  static Pathway policy(std::string label, const PolicyParams& p, int max_len = kDefaultMaxLen) {
    return {PathwayKind::kPolicy, std::move(label), &p, {}, max_len};
  }
};

// P' for one prompt, or nullopt if the pathway produced a malformed output.
inline std::optional<TokenSeq> enhanced_prompt(const Pathway& path, const UserPrompt& prompt) {
  switch (path.kind) {
    case PathwayKind::kPassThrough:
      return prompt.tokens;
    case PathwayKind::kOracle:
      return parse_structured_output(oracle_trace(prompt.spec, path.reward_config).target_tokens)
          .prompt_tokens;
    case PathwayKind::kPolicy: {
      const auto out = greedy_decode(*path.params, prompt.spec, {}, path.max_len);
      auto parsed = parse_structured_output(out);
      if (!parsed.well_formed) return std::nullopt;
      return std::move(parsed.prompt_tokens);
    }
  }
  return std::nullopt;
}

struct CategoryScore {
  int n = 0;
  int correct = 0;
  double accuracy = 0.0;
  double mean_semantic = 0.0;  // graded rubric, for comparison with strict
};

struct EvalReport {
  std::string pathway;
  std::array<CategoryScore, kNumCategories> categories{};
  double overall = 0.0;  // unweighted mean over categories with n > 0
  std::uint64_t seed = 0;
  std::string eval_set_hash;
  int malformed = 0;
};

inline std::string eval_set_fingerprint(const std::vector<UserPrompt>& prompts) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& p : prompts) {
    mix(static_cast<std::uint64_t>(p.spec.id));
    for (TokenId t : p.tokens) mix(t.value);
    mix(0xffff);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Greedy decoding makes this deterministic; `seed` is recorded only.
inline EvalReport evaluate(const Pathway& path, const std::vector<UserPrompt>& prompts,
                           std::uint64_t seed = 0) {
  if (prompts.empty()) throw PreconditionError("evaluation set is empty");
  if (path.kind == PathwayKind::kPolicy && !path.params) {
    throw PreconditionError("policy pathway without parameters");
  }
  EvalReport r;
  r.pathway = path.label;
  r.seed = seed;
  r.eval_set_hash = eval_set_fingerprint(prompts);
  for (const auto& p : prompts) {
    auto& c = r.categories[static_cast<int>(p.spec.category)];
    ++c.n;
    const auto enhanced = enhanced_prompt(path, p);
    if (!enhanced) {
      ++r.malformed;
      continue;
    }
    const Scene scene = synthesize(*enhanced);
    if (strictly_satisfied(scene, p.spec)) ++c.correct;
    c.mean_semantic += semantic_reward(scene, p.spec);
  }
  int present = 0;
  for (auto& c : r.categories) {
    if (c.n == 0) continue;
    c.accuracy = static_cast<double>(c.correct) / c.n;
    c.mean_semantic /= c.n;
    r.overall += c.accuracy;
    ++present;
  }
  r.overall /= present;
  return r;
}

struct ComparisonRow {
  std::string baseline;
  std::string pathway;
  std::array<double, kNumCategories> delta{};
  // Relative change in percent; nullopt where the baseline is zero.
  std::array<std::optional<double>, kNumCategories> relative{};
  double overall_delta = 0.0;
  std::optional<double> overall_relative;
};

inline std::optional<double> relative_change(double base, double ours) {
  if (base == 0.0) return std::nullopt;
  return 100.0 * (ours - base) / base;
}

// Every report against the first one.
inline std::vector<ComparisonRow> compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw PreconditionError("compare needs at least two reports");
  const auto& base = reports.front();
  for (const auto& r : reports) {
    if (r.eval_set_hash != base.eval_set_hash) {
      throw PreconditionError("reports '" + base.pathway + "' and '" + r.pathway +
                              "' were computed on different evaluation sets");
    }
  }
  std::vector<ComparisonRow> rows;
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const auto& r = reports[k];
    ComparisonRow row;
    row.baseline = base.pathway;
    row.pathway = r.pathway;
    for (int c = 0; c < kNumCategories; ++c) {
      row.delta[c] = r.categories[c].accuracy - base.categories[c].accuracy;
      row.relative[c] = relative_change(base.categories[c].accuracy, r.categories[c].accuracy);
    }
    row.overall_delta = r.overall - base.overall;
    row.overall_relative = relative_change(base.overall, r.overall);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace reprompt

#endif  // REPROMPT_EVAL_HPP_
