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

#ifndef REPROMPT_REWARDS_HPP_
#define REPROMPT_REWARDS_HPP_

// Reprompt reward model.
//
//   r_vis   = alpha * r_pref + gamma * r_sem
//   r_struc = +1 if the output is <reason>..</reason><prompt>..</prompt>, else -1
//   r_len   = +1 if l_min <= |P'| <= l_max, else -1
//   r_total = r_vis / s_vis + r_struc / s_struc + r_len / s_len
//
// where s_* are running standard deviations (variance scaling only, no mean
// subtraction). r_pref and r_sem are rule-based proxies for a preference model
// and a vision-language judge, scored on the synthesized scene.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/synthesizer.hpp"
#include "reprompt/vocabulary.hpp"

namespace reprompt {

struct RewardConfig {
  double alpha = 0.5;
  double gamma = 0.5;
  int l_min = 15;
  int l_max = 77;
  std::int64_t warmup = 100;
  double sigma_floor = 0.1;
  // Scale the binary structure/length components too, not only r_vis.
  bool normalize_binary = true;

  void validate() const {
    if (!(alpha >= 0 && gamma >= 0)) throw ConfigError("alpha and gamma must be >= 0");
    if (!(l_min > 0 && l_min <= l_max)) throw ConfigError("need 0 < l_min <= l_max");
    if (warmup < 1) throw ConfigError("warmup must be >= 1");
    if (!(sigma_floor > 0)) throw ConfigError("sigma_floor must be > 0");
  }
};

struct ParsedOutput {
  TokenSeq reason_tokens;
  TokenSeq prompt_tokens;
  bool well_formed = false;
};

// Accepts exactly
//   <reason> x* </reason> <prompt> y* </prompt> [<end>]
// with x, y non-structure tokens. Anything else is malformed and yields empty
// segments.
inline ParsedOutput parse_structured_output(std::span<const TokenId> out) {
  const Vocabulary v;
  ParsedOutput p;
  std::size_t n = out.size();
  if (n > 0 && out[n - 1] == v.end()) --n;
  std::size_t i = 0;
  auto expect = [&](TokenId t) {
    if (i < n && out[i] == t) {
      ++i;
      return true;
    }
    return false;
  };
  auto body = [&](TokenSeq& dst) {
    while (i < n && !v.is(out[i], TokenClass::kStructure)) {
      if (out[i] == v.end()) return false;
      dst.push_back(out[i++]);
    }
    return true;
  };
  const bool ok = expect(v.reason_open()) && body(p.reason_tokens) &&
                  expect(v.reason_close()) && expect(v.prompt_open()) &&
                  body(p.prompt_tokens) && expect(v.prompt_close()) && i == n;
  if (!ok) return ParsedOutput{};
  p.well_formed = true;
  return p;
}

inline double structure_reward(const ParsedOutput& parsed) {
  return parsed.well_formed ? 1.0 : -1.0;
}

inline double length_reward(std::span<const TokenId> prompt,
                            const RewardConfig& cfg) {
  const auto len = static_cast<long>(prompt.size());
  return (len >= cfg.l_min && len <= cfg.l_max) ? 1.0 : -1.0;
}

// Plausibility proxy: collisions hurt, a little detail helps.
inline double preference_reward(const Scene& scene) {
  const double raw = 1.0 - 0.25 * scene.collisions() +
                     0.1 * std::min(scene.detail_level, 3);
  return std::clamp(raw, 0.0, 1.0);
}

inline bool relation_holds(Relation r, Cell a, Cell b) {
  switch (r) {
    case Relation::kLeftOf: return a.col < b.col;
    case Relation::kRightOf: return a.col > b.col;
    case Relation::kAbove: return a.row < b.row;
    case Relation::kBelow: return a.row > b.row;
  }
  return false;
}

namespace detail {

// 1 if some instance carries the color, 0.5 if present without it, else 0.
inline double color_score(const Scene& scene, const ObjectSlot& o) {
  bool present = false;
  for (const auto& so : scene.objects) {
    if (so.cls != o.cls) continue;
    present = true;
    if (so.color == o.color) return 1.0;
  }
  return present ? 0.5 : 0.0;
}

}  // namespace detail

// Graded semantic rubric against the ground-truth spec.
inline double semantic_reward(const Scene& scene, const PromptSpec& spec) {
  const auto& objs = spec.objects;
  auto present = [&scene](int cls) { return scene.first_of(cls) != nullptr; };
  switch (spec.category) {
    case TaskCategory::kSingleObject:
      return present(objs[0].cls) ? 1.0 : 0.0;
    case TaskCategory::kTwoObject:
      return 0.5 * (present(objs[0].cls) + present(objs[1].cls));
    case TaskCategory::kCounting: {
      const double n = *spec.count;
      const double got = scene.count_class(objs[0].cls);
      return std::max(0.0, 1.0 - std::abs(got - n) / n);
    }
    case TaskCategory::kColors:
      return detail::color_score(scene, objs[0]);
    case TaskCategory::kPosition: {
      const auto* a = scene.first_of(objs[0].cls);
      const auto* b = scene.first_of(objs[1].cls);
      if (!a || !b) return 0.0;
      return 0.5 + (relation_holds(*spec.relation, a->cell, b->cell) ? 0.5 : 0.0);
    }
    case TaskCategory::kAttributeBinding:
      return 0.5 * (detail::color_score(scene, objs[0]) +
                    detail::color_score(scene, objs[1]));
  }
  return 0.0;
}

inline double visual_reward(double r_pref, double r_sem, const RewardConfig& cfg) {
  return cfg.alpha * r_pref + cfg.gamma * r_sem;
}

enum class RewardComponent : std::uint8_t { kVis, kStruc, kLen };

// Welford accumulator. Mergeable, so sharded scoring can be combined in a
// fixed order.
struct RunningMoments {
  std::int64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }

  void merge(const RunningMoments& o) {
    if (o.count == 0) return;
    if (count == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(count + o.count);
    const double d = o.mean - mean;
    mean += d * static_cast<double>(o.count) / n;
    m2 += o.m2 + d * d * static_cast<double>(count) * static_cast<double>(o.count) / n;
    count += o.count;
  }

  // Population variance.
  double variance() const {
    return count > 0 ? std::max(0.0, m2 / static_cast<double>(count)) : 0.0;
  }
};

class RewardNormalizer {
 public:
  RewardNormalizer() = default;
  explicit RewardNormalizer(const RewardConfig& cfg)
      : warmup_(cfg.warmup),
        sigma_floor_(cfg.sigma_floor),
        normalize_binary_(cfg.normalize_binary) {}

  void update(double vis, double struc, double len) {
    stats_[0].add(vis);
    stats_[1].add(struc);
    stats_[2].add(len);
  }

  void merge(const RewardNormalizer& o) {
    for (int i = 0; i < 3; ++i) stats_[i].merge(o.stats_[i]);
  }

  double divisor(RewardComponent c) const {
    const auto& s = stats_[static_cast<int>(c)];
    if (s.count < warmup_) return 1.0;
    if (c != RewardComponent::kVis && !normalize_binary_) return 1.0;
    return std::max(std::sqrt(s.variance()), sigma_floor_);
  }

  double normalize(RewardComponent c, double raw) const { return raw / divisor(c); }

  const RunningMoments& moments(RewardComponent c) const {
    return stats_[static_cast<int>(c)];
  }
  RunningMoments& moments(RewardComponent c) { return stats_[static_cast<int>(c)]; }

  std::int64_t warmup() const { return warmup_; }

  friend bool operator==(const RewardNormalizer& a, const RewardNormalizer& b) {
    for (int i = 0; i < 3; ++i) {
      if (a.stats_[i].count != b.stats_[i].count ||
          a.stats_[i].mean != b.stats_[i].mean || a.stats_[i].m2 != b.stats_[i].m2) {
        return false;
      }
    }
    return true;
  }

 private:
  std::array<RunningMoments, 3> stats_{};
  std::int64_t warmup_ = 100;
  double sigma_floor_ = 0.1;
  bool normalize_binary_ = true;
};

struct RewardBreakdown {
  double r_pref = 0.0;
  double r_sem = 0.0;
  double r_vis = 0.0;
  double r_struc = -1.0;
  double r_len = -1.0;
  double r_vis_n = 0.0;
  double r_struc_n = 0.0;
  double r_len_n = 0.0;
  double r_total = 0.0;
  bool well_formed = false;
  int prompt_length = 0;
};

namespace detail {

inline RewardBreakdown raw_breakdown(std::span<const TokenId> output,
                                     const PromptSpec& spec,
                                     const RewardConfig& cfg) {
  RewardBreakdown b;
  const ParsedOutput parsed = parse_structured_output(output);
  b.well_formed = parsed.well_formed;
  b.prompt_length = static_cast<int>(parsed.prompt_tokens.size());
  if (parsed.well_formed) {
    const Scene scene = synthesize(parsed.prompt_tokens);
    b.r_pref = preference_reward(scene);
    b.r_sem = semantic_reward(scene, spec);
    b.r_vis = visual_reward(b.r_pref, b.r_sem, cfg);
  }
  b.r_struc = structure_reward(parsed);
  b.r_len = length_reward(parsed.prompt_tokens, cfg);
  return b;
}

inline void apply_normalizer(RewardBreakdown& b, const RewardNormalizer& norm) {
  b.r_vis_n = norm.normalize(RewardComponent::kVis, b.r_vis);
  b.r_struc_n = norm.normalize(RewardComponent::kStruc, b.r_struc);
  b.r_len_n = norm.normalize(RewardComponent::kLen, b.r_len);
  b.r_total = b.r_vis_n + b.r_struc_n + b.r_len_n;
}

}  // namespace detail

// Full scoring pipeline: parse, synthesize P' (well-formed outputs only),
// score, fold the raw components into the normalizer, then normalize.
inline RewardBreakdown total_reward(std::span<const TokenId> output,
                                    const PromptSpec& spec,
                                    const RewardConfig& cfg,
                                    RewardNormalizer& norm) {
  RewardBreakdown b = detail::raw_breakdown(output, spec, cfg);
  norm.update(b.r_vis, b.r_struc, b.r_len);
  detail::apply_normalizer(b, norm);
  return b;
}

// Same pipeline against a frozen normalizer, for analyses that need r to be a
// fixed function of the output.
inline RewardBreakdown frozen_reward(std::span<const TokenId> output,
                                     const PromptSpec& spec,
                                     const RewardConfig& cfg,
                                     const RewardNormalizer& norm) {
  RewardBreakdown b = detail::raw_breakdown(output, spec, cfg);
  detail::apply_normalizer(b, norm);
  return b;
}

}  // namespace reprompt

#endif  // REPROMPT_REWARDS_HPP_
