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

#ifndef REPROMPT_SFT_HPP_
#define REPROMPT_SFT_HPP_

// Supervised warm start.
//
// A rule-based oracle writes a well-formed (reasoning, prompt) pair for every
// spec. It binds colors correctly but keeps numerals and relation words, both
// of which the synthesizer mishandles, so fitting it leaves headroom for RL.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/rng.hpp"

namespace reprompt {

struct OracleTrace {
  PromptSpec spec;
  TokenSeq target_tokens;
};

namespace detail {

inline void append_oracle_object(const Vocabulary& v, TokenSeq& out, const ObjectSlot& o,
                                 bool article) {
  if (article) out.push_back(v.id("a"));
  if (o.color) out.push_back(v.color(*o.color));
  out.push_back(v.object(o.cls));
}

}  // namespace detail

// <reason> H </reason> <prompt> P' </prompt> <end>, with P' padded by detail
// tokens to one past l_min so it always closes in the 16+ position bucket at
// the default bounds.
inline OracleTrace oracle_trace(const PromptSpec& spec, const RewardConfig& cfg) {
  validate(spec);
  const Vocabulary v;
  const auto& objs = spec.objects;

  TokenSeq reason;
  switch (spec.category) {
    case TaskCategory::kSingleObject:
    case TaskCategory::kColors:
      detail::append_oracle_object(v, reason, objs[0], false);
      break;
    case TaskCategory::kTwoObject:
    case TaskCategory::kAttributeBinding:
      detail::append_oracle_object(v, reason, objs[0], false);
      reason.push_back(v.id("and"));
      detail::append_oracle_object(v, reason, objs[1], false);
      break;
    case TaskCategory::kCounting:
      reason.push_back(v.numeral(*spec.count));
      reason.push_back(v.object(objs[0].cls));
      break;
    case TaskCategory::kPosition:
      reason.push_back(v.object(objs[0].cls));
      reason.push_back(v.relation(*spec.relation));
      reason.push_back(v.object(objs[1].cls));
      break;
  }

  TokenSeq prompt{v.id("a"), v.id("photo"), v.id("of")};
  switch (spec.category) {
    case TaskCategory::kSingleObject:
    case TaskCategory::kColors:
      detail::append_oracle_object(v, prompt, objs[0], true);
      break;
    case TaskCategory::kTwoObject:
    case TaskCategory::kAttributeBinding:
      detail::append_oracle_object(v, prompt, objs[0], true);
      prompt.push_back(v.id("and"));
      detail::append_oracle_object(v, prompt, objs[1], true);
      break;
    case TaskCategory::kCounting:
      prompt.push_back(v.numeral(*spec.count));
      prompt.push_back(v.object(objs[0].cls));
      break;
    case TaskCategory::kPosition:
      detail::append_oracle_object(v, prompt, objs[0], true);
      prompt.push_back(v.relation(*spec.relation));
      detail::append_oracle_object(v, prompt, objs[1], true);
      break;
  }
  prompt.push_back(v.comma());
  const TokenSeq padding{v.id("bright"), v.id("detailed"), v.id("realistic"),
                         v.id("sharp"), v.id("vivid")};
  const std::size_t target = static_cast<std::size_t>(
      std::min(cfg.l_min + 1, cfg.l_max));
  for (std::size_t k = 0; prompt.size() < target; ++k) {
    prompt.push_back(padding[k % padding.size()]);
  }

  OracleTrace trace{spec, {v.reason_open()}};
  auto& out = trace.target_tokens;
  out.insert(out.end(), reason.begin(), reason.end());
  out.push_back(v.reason_close());
  out.push_back(v.prompt_open());
  out.insert(out.end(), prompt.begin(), prompt.end());
  out.push_back(v.prompt_close());
  out.push_back(v.end());
  return trace;
}

// After each object mention in P', insert a uniformly random layout token
// with probability `rate`. The placement ignores the spec, so the augmented
// corpus still teaches nothing about relations; it only keeps layout tokens
// in the support of the fitted policy.
inline OracleTrace augment_layout(OracleTrace trace, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw PreconditionError("layout rate must lie in [0, 1]");
  if (rate == 0.0) return trace;
  const Vocabulary v;
  const auto layouts = v.members(TokenClass::kLayout);
  TokenSeq out;
  bool in_prompt = false;
  for (TokenId t : trace.target_tokens) {
    out.push_back(t);
    if (t == v.prompt_open()) in_prompt = true;
    if (t == v.prompt_close()) in_prompt = false;
    if (in_prompt && v.is(t, TokenClass::kObject) && rng.bernoulli(rate)) {
      out.push_back(layouts[rng.index(layouts.size())]);
    }
  }
  trace.target_tokens = std::move(out);
  return trace;
}

struct SftConfig {
  int epochs = 8;
  double lr = 0.5;
  int batch_size = 16;
  double layout_augment = 0.2;

  void validate() const {
    if (epochs < 0) throw ConfigError("sft.epochs must be >= 0");
    if (!(lr > 0)) throw ConfigError("sft.lr must be > 0");
    if (batch_size < 1) throw ConfigError("sft.batch_size must be >= 1");
    if (!(layout_augment >= 0 && layout_augment <= 1)) {
      throw ConfigError("sft.layout_augment must lie in [0, 1]");
    }
  }
};

// Oracle traces for a prompt set, augmented per `cfg`. Deterministic given seed.
inline std::vector<OracleTrace> build_traces(const std::vector<UserPrompt>& prompts,
                                             const RewardConfig& rewards, const SftConfig& cfg,
                                             std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed, {0x6175676dull});
  std::vector<OracleTrace> out;
  out.reserve(prompts.size());
  for (const auto& p : prompts) {
    out.push_back(augment_layout(oracle_trace(p.spec, rewards), cfg.layout_augment, rng));
  }
  return out;
}

struct SftResult {
  PolicyParams params;
  // Mean per-trace negative log-likelihood on the training traces, before
  // fitting and after every epoch.
  std::vector<double> nll;
};

inline double mean_nll(const PolicyParams& params, const std::vector<OracleTrace>& traces) {
  if (traces.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : traces) s -= log_prob(params, t.spec, t.target_tokens);
  return s / static_cast<double>(traces.size());
}

// Mini-batch gradient ascent on the mean log-likelihood of the targets.
inline SftResult sft_fit(PolicyParams params, const std::vector<OracleTrace>& traces,
                         const SftConfig& cfg, Rng& rng) {
  cfg.validate();
  SftResult result;
  result.nll.push_back(mean_nll(params, traces));
  if (traces.empty() || cfg.epochs == 0) {
    result.params = std::move(params);
    return result;
  }
  std::vector<std::size_t> order(traces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Gradient grad = Gradient::zeros();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto& t : grad.tables) std::fill(t.begin(), t.end(), 0.0);
      const double w = 1.0 / static_cast<double>(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& tr = traces[order[i]];
        accumulate_log_prob_grad(params, tr.spec, tr.target_tokens, w, grad);
      }
      params.add_scaled(grad, cfg.lr);
    }
    result.nll.push_back(mean_nll(params, traces));
  }
  result.params = std::move(params);
  return result;
}

}  // namespace reprompt

#endif  // REPROMPT_SFT_HPP_
