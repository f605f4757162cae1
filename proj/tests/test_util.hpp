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

#ifndef REPROMPT_TESTS_TEST_UTIL_HPP_
#define REPROMPT_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <string_view>

#include "reprompt/reprompt.hpp"

namespace reprompt::testing {

inline TokenSeq toks(std::string_view text) { return Vocabulary{}.tokenize(text); }

inline PromptSpec spec_of(TaskCategory c, std::vector<ObjectSlot> objs,
                          std::optional<int> count = std::nullopt,
                          std::optional<Relation> rel = std::nullopt) {
  return PromptSpec{c, std::move(objs), count, rel, 0};
}

inline int obj(std::string_view s) { return Vocabulary{}.object_index(Vocabulary{}.id(s)); }
inline int col(std::string_view s) { return Vocabulary{}.color_index(Vocabulary{}.id(s)); }

// Params with every weight drawn uniformly from [-scale, scale].
inline PolicyParams random_params(Rng& rng, double scale) {
  PolicyParams p = PolicyParams::zeros();
  for (auto& t : p.tables)
    for (auto& x : t) x = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

// Central difference of f along flat coordinate k.
inline double central_difference(PolicyParams& p, std::size_t k, double h,
                                 const std::function<double(const PolicyParams&)>& f) {
  const double x = p.at(k);
  p.at(k) = x + h;
  const double up = f(p);
  p.at(k) = x - h;
  const double down = f(p);
  p.at(k) = x;
  return (up - down) / (2.0 * h);
}

// |a - b| / max(|a|, |b|, floor); the floor keeps near-zero coordinates from
// turning rounding noise into a large relative error.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Flat indices of every weight in a row some context of `tokens` reads.
inline std::vector<std::size_t> active_coordinates(const PromptSpec& spec, const TokenSeq& tokens) {
  std::vector<std::size_t> offsets(kNumFeatures, 0);
  for (int f = 1; f < kNumFeatures; ++f) {
    offsets[f] = offsets[f - 1] + static_cast<std::size_t>(kFeatureSpecs[f - 1].rows) * kVocabSize;
  }
  std::set<std::size_t> rows;
  for_each_context(spec, tokens, [&](std::size_t, const FeatureContext& ctx, TokenId) {
    for (const auto& r : ctx.rows()) {
      rows.insert(offsets[r.table] + static_cast<std::size_t>(r.row) * kVocabSize);
    }
  });
  std::vector<std::size_t> out;
  for (auto base : rows)
    for (int k = 0; k < kVocabSize; ++k) out.push_back(base + k);
  return out;
}

// Groups sampled from params_old with advantages drawn uniformly from
// [-1.5, 1.5], so the surrogate carries gradient even where every sampled
// output would score the same.
inline std::vector<GroupSample> synthetic_groups(const PolicyParams& params_old, Rng& rng,
                                                 int n_groups, int group_size, int max_len) {
  const auto specs = enumerate_specs(TaskCategory::kPosition);
  std::vector<GroupSample> groups(n_groups);
  for (auto& g : groups) {
    g.prompt = make_user_prompt(specs[rng.index(specs.size())]);
    for (int i = 0; i < group_size; ++i) {
      g.trajectories.push_back(sample(params_old, g.prompt, rng, max_len));
      g.advantages.push_back(3.0 * rng.uniform() - 1.5);
    }
  }
  return groups;
}

// Union of active_coordinates over every trajectory of every group.
inline std::vector<std::size_t> active_coordinates(const std::vector<GroupSample>& groups) {
  std::set<std::size_t> all;
  for (const auto& g : groups) {
    for (const auto& tr : g.trajectories) {
      for (auto k : active_coordinates(tr.spec, tr.tokens)) all.insert(k);
    }
  }
  return {all.begin(), all.end()};
}

// A fresh scratch directory under the current working directory.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::current_path() / "test_scratch" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace reprompt::testing

#endif  // REPROMPT_TESTS_TEST_UTIL_HPP_
