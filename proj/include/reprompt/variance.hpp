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

#ifndef REPROMPT_VARIANCE_HPP_
#define REPROMPT_VARIANCE_HPP_

// Two-stage Monte Carlo estimate of the law of total variance, conditioned on
// the reasoning prefix.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/rng.hpp"

namespace reprompt {

// A source draws a conditioning value H, then rewards given H.
template <typename S>
concept TwoStageSource = requires(S& s, Rng& rng) {
  typename S::Prefix;
  { s.sample_prefix(rng) } -> std::convertible_to<typename S::Prefix>;
  { s.sample_reward(std::declval<const typename S::Prefix&>(), rng) } -> std::convertible_to<double>;
};

// ceil(variance / (eps_acc^2 * delta)). A relative slack of 1e-9 absorbs
// rounding so that exact quotients are not pushed to the next integer.
inline std::int64_t chebyshev_n(double variance, double eps_acc, double delta) {
  if (!(variance >= 0.0)) throw PreconditionError("variance must be >= 0");
  if (!(eps_acc > 0.0)) throw PreconditionError("eps_acc must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("delta must be in (0, 1)");
  const double q = variance / (eps_acc * eps_acc * delta);
  const double r = std::round(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(q));
}

struct VarianceEstimate {
  double value = 0.0;
  double se = 0.0;  // grouped-jackknife standard error
};

struct VarianceReport {
  int n_outer = 0;
  int n_inner = 0;
  int batches = 0;
  double mean = 0.0;
  VarianceEstimate total;    // pooled, n - 1
  VarianceEstimate within;   // E_H[Var[r|H]]
  VarianceEstimate between;  // Var_H[E[r|H]], clamped at zero
  double between_unclamped = 0.0;
  VarianceEstimate residual;  // total - (within + between_unclamped)
  VarianceEstimate gap;       // total - within
  double eps_acc = 0.1;
  double delta = 0.05;
  std::int64_t implied_n_bare = 0;       // from total
  std::int64_t implied_n_reasoning = 0;  // from within

  // sqrt(se_total^2 + se_within^2 + se_between^2).
  double combined_se() const {
    return std::sqrt(total.se * total.se + within.se * within.se + between.se * between.se);
  }
  // The pooled total carries an O(1/n) bias of -(n_inner - 1) Var_H[E[r|H]] / (n - 1),
  // so the residual is compared with the error of the estimates, not its own.
  bool identity_holds(double k = 3.0) const {
    return std::abs(residual.value) <= k * combined_se();
  }
  bool within_le_total(double k = 3.0) const {
    return within.value <= total.value + k * gap.se;
  }
};

namespace detail {

struct RawComponents {
  double mean = 0.0;
  double total = 0.0;
  double within = 0.0;
  double between_unclamped = 0.0;
};

// rewards[h * n_inner + j] for every outer index h outside [skip_lo, skip_hi).
inline RawComponents components(const std::vector<double>& rewards, int n_inner,
                                int skip_lo = 0, int skip_hi = 0) {
  const int n_outer = static_cast<int>(rewards.size()) / n_inner;
  std::vector<int> keep;
  for (int h = 0; h < n_outer; ++h) {
    if (h < skip_lo || h >= skip_hi) keep.push_back(h);
  }
  const int m = static_cast<int>(keep.size());
  const double n = static_cast<double>(m) * n_inner;
  RawComponents c;
  for (int h : keep) {
    for (int j = 0; j < n_inner; ++j) c.mean += rewards[h * n_inner + j];
  }
  c.mean /= n;
  double ss_total = 0.0;
  double sum_within = 0.0;
  std::vector<double> means;
  means.reserve(m);
  for (int h : keep) {
    double mh = 0.0;
    for (int j = 0; j < n_inner; ++j) mh += rewards[h * n_inner + j];
    mh /= n_inner;
    double ss = 0.0;
    for (int j = 0; j < n_inner; ++j) {
      const double r = rewards[h * n_inner + j];
      ss += (r - mh) * (r - mh);
      ss_total += (r - c.mean) * (r - c.mean);
    }
    sum_within += ss / (n_inner - 1);
    means.push_back(mh);
  }
  c.total = ss_total / (n - 1.0);
  c.within = sum_within / m;
  double ss_means = 0.0;
  for (double mh : means) ss_means += (mh - c.mean) * (mh - c.mean);
  // The variance of the group means overstates Var_H[E[r|H]] by within / n_inner.
  c.between_unclamped = ss_means / (m - 1) - c.within / n_inner;
  return c;
}

// Grouped jackknife from the leave-one-batch-out replicates.
inline double jackknife_stderr(const std::vector<double>& replicates) {
  const double b = static_cast<double>(replicates.size());
  double mean = 0.0;
  for (double x : replicates) mean += x;
  mean /= b;
  double ss = 0.0;
  for (double x : replicates) ss += (x - mean) * (x - mean);
  return std::sqrt((b - 1.0) / b * ss);
}

}  // namespace detail

// Draw n_outer prefixes and n_inner rewards per prefix. Standard errors come
// from a jackknife that drops one of `batches` contiguous batches of outer
// draws at a time.
template <TwoStageSource Source>
VarianceReport variance_decomposition(Source& src, int n_outer, int n_inner, Rng& rng,
                                      int batches = 10, double eps_acc = 0.1,
                                      double delta = 0.05) {
  if (n_outer < 2 || n_inner < 2) throw PreconditionError("n_outer and n_inner must be >= 2");
  if (batches < 2 || n_outer / batches < 2) {
    throw PreconditionError("need at least two batches of at least two outer draws");
  }
  std::vector<double> rewards;
  rewards.reserve(static_cast<std::size_t>(n_outer) * n_inner);
  for (int h = 0; h < n_outer; ++h) {
    const auto prefix = src.sample_prefix(rng);
    for (int j = 0; j < n_inner; ++j) rewards.push_back(src.sample_reward(prefix, rng));
  }

  const auto all = detail::components(rewards, n_inner);
  std::vector<double> bt, bw, bb, br, bg;
  for (int b = 0; b < batches; ++b) {
    const int lo = static_cast<int>(static_cast<std::int64_t>(n_outer) * b / batches);
    const int hi = static_cast<int>(static_cast<std::int64_t>(n_outer) * (b + 1) / batches);
    const auto c = detail::components(rewards, n_inner, lo, hi);  // batch b left out
    bt.push_back(c.total);
    bw.push_back(c.within);
    bb.push_back(c.between_unclamped);
    br.push_back(c.total - c.within - c.between_unclamped);
    bg.push_back(c.total - c.within);
  }

  VarianceReport r;
  r.n_outer = n_outer;
  r.n_inner = n_inner;
  r.batches = batches;
  r.mean = all.mean;
  r.total = {all.total, detail::jackknife_stderr(bt)};
  r.within = {all.within, detail::jackknife_stderr(bw)};
  r.between_unclamped = all.between_unclamped;
  r.between = {std::max(0.0, all.between_unclamped), detail::jackknife_stderr(bb)};
  r.residual = {all.total - all.within - all.between_unclamped, detail::jackknife_stderr(br)};
  r.gap = {all.total - all.within, detail::jackknife_stderr(bg)};
  r.eps_acc = eps_acc;
  r.delta = delta;
  r.implied_n_bare = chebyshev_n(std::max(0.0, r.total.value), eps_acc, delta);
  r.implied_n_reasoning = chebyshev_n(std::max(0.0, r.within.value), eps_acc, delta);
  return r;
}

// H in {0, 1} equiprobable; r | H ~ Bernoulli(p[H]).
struct TwoValuedSource {
  using Prefix = int;
  double p0 = 0.2;
  double p1 = 0.8;

  int sample_prefix(Rng& rng) const { return rng.bernoulli(0.5) ? 1 : 0; }
  double sample_reward(int h, Rng& rng) const {
    return rng.bernoulli(h ? p1 : p0) ? 1.0 : 0.0;
  }
};

// Constant reward; every component is zero.
struct ConstantSource {
  using Prefix = int;
  double value = 1.0;
  int sample_prefix(Rng&) const { return 0; }
  double sample_reward(int, Rng&) const { return value; }
};

// H is the policy's reasoning segment, sampled up to and including
// </reason>; rewards come from fresh continuations of that prefix, scored
// with the normalizer frozen. A forced prefix replaces H sampling.
struct PolicySource {
  using Prefix = TokenSeq;
  const PolicyParams* params = nullptr;
  UserPrompt prompt;
  RewardConfig config;
  const RewardNormalizer* normalizer = nullptr;
  int max_len = kDefaultMaxLen;
  std::optional<TokenSeq> forced_prefix;

  TokenSeq sample_prefix(Rng& rng) const {
    if (forced_prefix) return *forced_prefix;
    return sample_continuation(*params, prompt.spec, {}, rng, max_len,
                               Vocabulary::reason_close())
        .tokens;
  }

  double sample_reward(const TokenSeq& prefix, Rng& rng) const {
    // A prefix that already ended is its own completion.
    const bool done = (!prefix.empty() && prefix.back() == Vocabulary::end()) ||
                      static_cast<int>(prefix.size()) >= max_len;
    const TokenSeq out =
        done ? prefix : sample_continuation(*params, prompt.spec, prefix, rng, max_len).tokens;
    return frozen_reward(out, prompt.spec, config, *normalizer).r_total;
  }
};

inline PolicySource reasoning_source(const PolicyParams& params, const UserPrompt& prompt,
                                     const RewardConfig& cfg, const RewardNormalizer& norm,
                                     int max_len = kDefaultMaxLen) {
  return {&params, prompt, cfg, &norm, max_len, std::nullopt};
}

// The reason segment is forced empty.
inline PolicySource direct_source(const PolicyParams& params, const UserPrompt& prompt,
                                  const RewardConfig& cfg, const RewardNormalizer& norm,
                                  int max_len = kDefaultMaxLen) {
  return {&params, prompt, cfg, &norm, max_len,
          TokenSeq{Vocabulary::reason_open(), Vocabulary::reason_close()}};
}

inline VarianceReport variance_decomposition(const PolicyParams& params,
                                             const UserPrompt& prompt, const RewardConfig& cfg,
                                             const RewardNormalizer& norm, int n_outer,
                                             int n_inner, Rng& rng,
                                             int max_len = kDefaultMaxLen) {
  auto src = reasoning_source(params, prompt, cfg, norm, max_len);
  return variance_decomposition(src, n_outer, n_inner, rng);
}

struct VarianceOptions {
  int n_outer = 200;
  int n_inner = 10;
  int batches = 10;
  double eps_acc = 0.1;
  double delta = 0.05;
  int max_len = kDefaultMaxLen;

  void validate() const {
    if (n_outer < 2 || n_inner < 2) throw ConfigError("variance.n_outer and n_inner must be >= 2");
    if (batches < 2 || n_outer / batches < 2) {
      throw ConfigError("variance.batches must be >= 2 with >= 2 outer draws per batch");
    }
    if (!(eps_acc > 0)) throw ConfigError("variance.eps_acc must be > 0");
    if (!(delta > 0 && delta < 1)) throw ConfigError("variance.delta must be in (0, 1)");
  }
};

struct ReasoningVsDirectRow {
  std::int64_t prompt_id = 0;
  TaskCategory category = TaskCategory::kSingleObject;
  VarianceReport reasoning;
  VarianceReport direct;
  // Two readings of the reasoning pipeline's variance: the within component
  // and the joint total. Both are compared against the direct total.
  std::int64_t implied_n_reasoning_within = 0;
  std::int64_t implied_n_reasoning_total = 0;
  std::int64_t implied_n_direct = 0;
};

struct ReasoningVsDirect {
  std::vector<ReasoningVsDirectRow> rows;
  double mean_reasoning_within = 0.0;
  double mean_reasoning_total = 0.0;
  double mean_direct_total = 0.0;
  int within_le_total = 0;  // prompts with within <= total + 3 se
  int identity_holds = 0;
};

// Each prompt gets its own stream so rows do not depend on prompt order.
inline ReasoningVsDirect reasoning_vs_direct(const PolicyParams& params,
                                             const std::vector<UserPrompt>& prompts,
                                             const RewardConfig& cfg,
                                             const RewardNormalizer& norm,
                                             const VarianceOptions& opt, std::uint64_t seed) {
  opt.validate();
  if (prompts.empty()) throw PreconditionError("no prompts for the variance comparison");
  ReasoningVsDirect out;
  for (const auto& p : prompts) {
    ReasoningVsDirectRow row;
    row.prompt_id = p.spec.id;
    row.category = p.spec.category;
    auto rs = reasoning_source(params, p, cfg, norm, opt.max_len);
    auto ds = direct_source(params, p, cfg, norm, opt.max_len);
    Rng r1(seed, {0x7265u, static_cast<std::uint64_t>(p.spec.id)});
    Rng r2(seed, {0x6469u, static_cast<std::uint64_t>(p.spec.id)});
    row.reasoning = variance_decomposition(rs, opt.n_outer, opt.n_inner, r1, opt.batches,
                                           opt.eps_acc, opt.delta);
    row.direct = variance_decomposition(ds, opt.n_outer, opt.n_inner, r2, opt.batches,
                                        opt.eps_acc, opt.delta);
    row.implied_n_reasoning_within = row.reasoning.implied_n_reasoning;
    row.implied_n_reasoning_total = row.reasoning.implied_n_bare;
    row.implied_n_direct = row.direct.implied_n_bare;
    out.mean_reasoning_within += row.reasoning.within.value;
    out.mean_reasoning_total += row.reasoning.total.value;
    out.mean_direct_total += row.direct.total.value;
    if (row.reasoning.within_le_total()) ++out.within_le_total;
    if (row.reasoning.identity_holds()) ++out.identity_holds;
    out.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(out.rows.size());
  out.mean_reasoning_within /= n;
  out.mean_reasoning_total /= n;
  out.mean_direct_total /= n;
  return out;
}

}  // namespace reprompt

#endif  // REPROMPT_VARIANCE_HPP_
