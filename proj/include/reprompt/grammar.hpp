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

#ifndef REPROMPT_GRAMMAR_HPP_
#define REPROMPT_GRAMMAR_HPP_

// Prompt templates and dataset generation.
//
// Six object-centric categories in the style of GenEval. A PromptSpec is the
// ground-truth constraint set behind one user prompt; render_user_prompt turns
// it into tokens. Train/eval disjointness is defined on spec content.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/rng.hpp"
#include "reprompt/vocabulary.hpp"

namespace reprompt {

enum class TaskCategory : std::uint8_t {
  kSingleObject,
  kTwoObject,
  kCounting,
  kColors,
  kPosition,
  kAttributeBinding,
};
inline constexpr int kNumCategories = 6;

inline constexpr std::array<TaskCategory, kNumCategories> kAllCategories{
    TaskCategory::kSingleObject, TaskCategory::kTwoObject,
    TaskCategory::kCounting,     TaskCategory::kColors,
    TaskCategory::kPosition,     TaskCategory::kAttributeBinding,
};

inline std::string_view category_name(TaskCategory c) {
  switch (c) {
    case TaskCategory::kSingleObject: return "single_object";
    case TaskCategory::kTwoObject: return "two_object";
    case TaskCategory::kCounting: return "counting";
    case TaskCategory::kColors: return "colors";
    case TaskCategory::kPosition: return "position";
    case TaskCategory::kAttributeBinding: return "attribute_binding";
  }
  return "?";
}

inline TaskCategory parse_category(std::string_view name) {
  for (auto c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  throw PreconditionError("unknown task category '" + std::string(name) + "'");
}

inline std::string_view relation_name(Relation r) {
  return Vocabulary{}.surface(Vocabulary{}.relation(r));
}

struct ObjectSlot {
  int cls = 0;                 // object index, 0..kNumObjects-1
  std::optional<int> color;    // color index, 0..kNumColors-1
  friend bool operator==(const ObjectSlot&, const ObjectSlot&) = default;
  friend auto operator<=>(const ObjectSlot&, const ObjectSlot&) = default;
};

struct PromptSpec {
  TaskCategory category = TaskCategory::kSingleObject;
  std::vector<ObjectSlot> objects;
  std::optional<int> count;
  std::optional<Relation> relation;
  std::int64_t id = 0;

  // Content identity; the id is a label and does not take part.
  auto key() const { return std::tie(category, objects, count, relation); }
  bool same_constraints(const PromptSpec& o) const { return key() == o.key(); }
};

struct UserPrompt {
  PromptSpec spec;
  TokenSeq tokens;
};

// Throws PreconditionError when slots do not match the category.
inline void validate(const PromptSpec& s) {
  auto fail = [&s](const std::string& why) {
    throw PreconditionError("invalid " + std::string(category_name(s.category)) +
                            " spec: " + why);
  };
  const bool two = s.category == TaskCategory::kTwoObject ||
                   s.category == TaskCategory::kPosition ||
                   s.category == TaskCategory::kAttributeBinding;
  if (s.objects.size() != (two ? 2u : 1u)) fail("wrong number of objects");
  for (const auto& o : s.objects) {
    if (o.cls < 0 || o.cls >= kNumObjects) fail("object class out of range");
    if (o.color && (*o.color < 0 || *o.color >= kNumColors)) {
      fail("color out of range");
    }
  }
  if (two && s.objects[0].cls == s.objects[1].cls) fail("objects must differ");
  const bool colored = s.category == TaskCategory::kColors ||
                       s.category == TaskCategory::kAttributeBinding;
  for (const auto& o : s.objects) {
    if (o.color.has_value() != colored) fail("color slot mismatch");
  }
  const bool counting = s.category == TaskCategory::kCounting;
  if (s.count.has_value() != counting) fail("count slot mismatch");
  if (s.count && (*s.count < 1 || *s.count > kMaxCount)) {
    fail("count out of range");
  }
  if (s.relation.has_value() != (s.category == TaskCategory::kPosition)) {
    fail("relation slot mismatch");
  }
}

namespace detail {

// White is written after the noun ("a cube in white"). The synthesizer only
// binds colors that precede their noun, so these prompts under-specify the
// binding and a rewrite can fix them.
inline constexpr int kPostnominalColor = 5;

inline void append_noun_phrase(const Vocabulary& v, TokenSeq& out,
                               const ObjectSlot& o) {
  out.push_back(v.id("a"));
  if (o.color && *o.color == kPostnominalColor) {
    out.push_back(v.object(o.cls));
    out.push_back(v.id("in"));
    out.push_back(v.color(*o.color));
    return;
  }
  if (o.color) out.push_back(v.color(*o.color));
  out.push_back(v.object(o.cls));
}

}  // namespace detail

inline TokenSeq render_user_prompt(const PromptSpec& spec) {
  validate(spec);
  const Vocabulary v;
  TokenSeq out{v.id("a"), v.id("photo"), v.id("of")};
  switch (spec.category) {
    case TaskCategory::kSingleObject:
    case TaskCategory::kColors:
      detail::append_noun_phrase(v, out, spec.objects[0]);
      break;
    case TaskCategory::kTwoObject:
    case TaskCategory::kAttributeBinding:
      detail::append_noun_phrase(v, out, spec.objects[0]);
      out.push_back(v.id("and"));
      detail::append_noun_phrase(v, out, spec.objects[1]);
      break;
    case TaskCategory::kCounting:
      out.push_back(v.numeral(*spec.count));
      out.push_back(v.object(spec.objects[0].cls));
      break;
    case TaskCategory::kPosition:
      detail::append_noun_phrase(v, out, spec.objects[0]);
      out.push_back(v.relation(*spec.relation));
      detail::append_noun_phrase(v, out, spec.objects[1]);
      break;
  }
  return out;
}

inline UserPrompt make_user_prompt(PromptSpec spec) {
  TokenSeq tokens = render_user_prompt(spec);
  return {std::move(spec), std::move(tokens)};
}

// Every valid spec of a category, in a fixed canonical order.
inline std::vector<PromptSpec> enumerate_specs(TaskCategory c) {
  std::vector<PromptSpec> out;
  auto add = [&](std::vector<ObjectSlot> objs, std::optional<int> count,
                 std::optional<Relation> rel) {
    out.push_back(PromptSpec{c, std::move(objs), count, rel, 0});
  };
  switch (c) {
    case TaskCategory::kSingleObject:
      for (int a = 0; a < kNumObjects; ++a) add({{a, {}}}, {}, {});
      break;
    case TaskCategory::kTwoObject:
      for (int a = 0; a < kNumObjects; ++a)
        for (int b = 0; b < kNumObjects; ++b)
          if (a != b) add({{a, {}}, {b, {}}}, {}, {});
      break;
    case TaskCategory::kCounting:
      for (int a = 0; a < kNumObjects; ++a)
        for (int n = 1; n <= kMaxCount; ++n) add({{a, {}}}, n, {});
      break;
    case TaskCategory::kColors:
      for (int a = 0; a < kNumObjects; ++a)
        for (int k = 0; k < kNumColors; ++k) add({{a, k}}, {}, {});
      break;
    case TaskCategory::kPosition:
      for (int a = 0; a < kNumObjects; ++a)
        for (int b = 0; b < kNumObjects; ++b)
          for (int r = 0; r < kNumRelations; ++r)
            if (a != b)
              add({{a, {}}, {b, {}}}, {}, static_cast<Relation>(r));
      break;
    case TaskCategory::kAttributeBinding:
      for (int a = 0; a < kNumObjects; ++a)
        for (int ka = 0; ka < kNumColors; ++ka)
          for (int b = 0; b < kNumObjects; ++b)
            for (int kb = 0; kb < kNumColors; ++kb)
              if (a != b) add({{a, ka}, {b, kb}}, {}, {});
      break;
  }
  return out;
}

// Inverse of render_user_prompt. Templates are injective, so a brute-force
// search over the (small) spec space is exact.
inline std::optional<PromptSpec> parse_user_prompt(const TokenSeq& tokens) {
  for (auto c : kAllCategories) {
    for (auto& s : enumerate_specs(c)) {
      if (render_user_prompt(s) == tokens) return s;
    }
  }
  return std::nullopt;
}

enum class Split : std::uint8_t { kTrain, kEval };

// Training prompts are further divided between the supervised stage and the
// RL stage.
enum class Stage : std::uint8_t { kSft, kRl };

struct Dataset {
  std::vector<UserPrompt> sft;
  std::vector<UserPrompt> rl;
  std::vector<UserPrompt> eval;
};

struct DatasetOptions {
  std::uint64_t seed = 0;
  std::map<TaskCategory, int> per_category;
  double split_ratio = 0.8;
  // Once a category's distinct specs run out, keep drawing (with
  // replacement) from the split's own pool instead of failing.
  bool allow_replacement = true;
  // Fraction of each category's training prompts given to the supervised
  // stage; the rest go to RL.
  double sft_share = 8.0 / 9.0;
};

// Samples prompts per category without replacement; train and eval never
// share a spec. Deterministic given the options.
inline Dataset generate_dataset(const DatasetOptions& opt) {
  if (!(opt.split_ratio > 0.0 && opt.split_ratio < 1.0)) {
    throw PreconditionError("split_ratio must lie in (0, 1)");
  }
  if (!(opt.sft_share > 0.0 && opt.sft_share < 1.0)) {
    throw PreconditionError("sft_share must lie in (0, 1)");
  }
  Dataset ds;
  std::int64_t next_id = 0;
  std::vector<PromptSpec> sft_specs, rl_specs, eval_specs;
  std::vector<PromptSpec> train_specs;
  for (auto c : kAllCategories) {
    auto it = opt.per_category.find(c);
    const int n = it == opt.per_category.end() ? 0 : it->second;
    if (n < 0) throw PreconditionError("negative count for category");
    if (n == 0) continue;
    Rng rng(opt.seed, {0x6461746173657400ull, static_cast<std::uint64_t>(c)});
    auto pool = enumerate_specs(c);
    rng.shuffle(pool);
    const auto space = static_cast<int>(pool.size());
    const int n_train = static_cast<int>(std::llround(n * opt.split_ratio));
    const int n_eval = n - n_train;
    const int n_sft = static_cast<int>(std::llround(n_train * opt.sft_share));
    // Draw order is already random, so a prefix split is a random split.
    auto split_train = [&] {
      sft_specs.insert(sft_specs.end(), train_specs.begin(), train_specs.begin() + n_sft);
      rl_specs.insert(rl_specs.end(), train_specs.begin() + n_sft, train_specs.end());
      train_specs.clear();
    };
    if (n <= space) {
      train_specs.assign(pool.begin(), pool.begin() + n_train);
      eval_specs.insert(eval_specs.end(), pool.begin() + n_train, pool.begin() + n);
      split_train();
      continue;
    }
    if (!opt.allow_replacement) {
      throw PreconditionError(
          "category " + std::string(category_name(c)) + " has only " +
          std::to_string(space) + " distinct specs, " + std::to_string(n) +
          " requested");
    }
    int pool_train = static_cast<int>(std::llround(space * opt.split_ratio));
    pool_train = std::clamp(pool_train, 1, space - 1);
    auto draw = [&rng](std::vector<PromptSpec>& dst, const PromptSpec* first,
                       int size, int count) {
      for (int i = 0; i < count; ++i) {
        const int k = i < size ? i : static_cast<int>(rng.index(size));
        dst.push_back(first[k]);
      }
    };
    draw(train_specs, pool.data(), pool_train, n_train);
    draw(eval_specs, pool.data() + pool_train, space - pool_train, n_eval);
    split_train();
  }
  for (auto& s : sft_specs) {
    s.id = next_id++;
    ds.sft.push_back(make_user_prompt(s));
  }
  for (auto& s : rl_specs) {
    s.id = next_id++;
    ds.rl.push_back(make_user_prompt(s));
  }
  for (auto& s : eval_specs) {
    s.id = next_id++;
    ds.eval.push_back(make_user_prompt(s));
  }
  return ds;
}

}  // namespace reprompt

#endif  // REPROMPT_GRAMMAR_HPP_
