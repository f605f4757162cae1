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

#ifndef REPROMPT_GRPO_HPP_
#define REPROMPT_GRPO_HPP_

// Group relative policy optimization.
//
// For each prompt, G outputs are sampled from the frozen snapshot theta_old and
// scored. Advantages are within-group z-scores (population std). The
// objective, averaged over groups, is
//
//   J(theta) = 1/G sum_i min(rho_i A_i, clip(rho_i, 1-eps, 1+eps) A_i)
//              - beta * 1/G sum_i KL_i(theta || ref)
//
// with rho_i = pi_theta(y_i|P) / pi_old(y_i|P) (or per token, see RatioMode)
// and KL_i the exact per-context KL summed along y_i.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/rng.hpp"

namespace reprompt {

enum class RatioMode : std::uint8_t { kSequence, kPerToken };

struct GrpoConfig {
  int group_size = 4;
  double clip_eps = 0.2;
  double kl_coef = 0.04;
  double lr = 2.0;
  int steps = 300;
  int prompts_per_step = 32;
  RatioMode ratio_mode = RatioMode::kSequence;
  std::uint64_t seed = 0;
  int max_len = kDefaultMaxLen;
  // Global gradient-norm clip; <= 0 disables it.
  double grad_clip = 10.0;
  // Checkpoint cadence in steps; <= 0 writes only the final checkpoint.
  int checkpoint_every = 100;

  void validate() const {
    if (group_size < 2) throw ConfigError("grpo.group_size must be >= 2");
    if (!(clip_eps > 0 && clip_eps < 1)) throw ConfigError("grpo.clip_eps must lie in (0, 1)");
    if (!(kl_coef >= 0)) throw ConfigError("grpo.kl_coef must be >= 0");
    if (!(lr > 0)) throw ConfigError("grpo.lr must be > 0");
    if (steps < 0) throw ConfigError("grpo.steps must be >= 0");
    if (prompts_per_step < 1) throw ConfigError("grpo.prompts_per_step must be >= 1");
    if (max_len < 1) throw ConfigError("grpo.max_len must be >= 1");
  }
};

// Scoring state threaded through a run. The normalizer is owned by the
// training loop and updated in a fixed order.
struct RewardContext {
  RewardConfig config;
  RewardNormalizer normalizer;

  explicit RewardContext(const RewardConfig& cfg) : config(cfg), normalizer(cfg) {}
};

struct GroupSample {
  UserPrompt prompt;
  std::vector<Trajectory> trajectories;
  std::vector<RewardBreakdown> breakdowns;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// A_i = (r_i - mean) / std with the population std. A constant group (std 0,
// or spread at rounding level) gets all-zero advantages.
inline std::vector<double> advantages(const std::vector<double>& rewards) {
  const auto g = rewards.size();
  if (g < 2) throw PreconditionError("advantages need a group of at least 2");
  std::vector<double> out(g, 0.0);
  if (std::all_of(rewards.begin(), rewards.end(),
                  [&](double r) { return r == rewards[0]; })) {
    return out;
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(g);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(g);
  const double sd = std::sqrt(var);
  double scale = 0.0;
  for (double r : rewards) scale = std::max(scale, std::abs(r));
  if (sd <= 1e-12 * std::max(1.0, scale)) return out;
  for (std::size_t i = 0; i < g; ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

// Samples G trajectories from theta_old and scores each end to end.
inline GroupSample collect_group(const UserPrompt& prompt, const PolicyParams& params_old,
                                 const GrpoConfig& cfg, Rng& rng, RewardContext& rewards) {
  GroupSample g;
  g.prompt = prompt;
  for (int i = 0; i < cfg.group_size; ++i) {
    g.trajectories.push_back(sample(params_old, prompt, rng, cfg.max_len));
    g.breakdowns.push_back(total_reward(g.trajectories.back().tokens, prompt.spec,
                                        rewards.config, rewards.normalizer));
    g.rewards.push_back(g.breakdowns.back().r_total);
  }
  g.advantages = advantages(g.rewards);
  return g;
}

namespace detail {

inline double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// min(rho A, clip(rho) A) and whether the unclipped branch is the one taken
// (only then does the term carry gradient).
inline std::pair<double, bool> clipped_term(double rho, double adv, double eps) {
  const double unclipped = rho * adv;
  const double clipped = clip(rho, 1.0 - eps, 1.0 + eps) * adv;
  return {std::min(unclipped, clipped), unclipped <= clipped};
}

inline void check_ratio(double rho, std::size_t group, std::size_t member) {
  if (!std::isfinite(rho)) {
    throw NumericError("non-finite importance ratio for trajectory " +
                       std::to_string(member) + " of group " + std::to_string(group));
  }
}

}  // namespace detail

struct GrpoObjective {
  double value = 0.0;      // J
  double surrogate = 0.0;  // clipped-surrogate part
  double kl = 0.0;         // mean per-trajectory KL (before beta)
};

// Evaluates J and, if grad is non-null, adds dJ/dtheta into it.
inline GrpoObjective grpo_objective(const PolicyParams& params, const PolicyParams& params_old,
                                    const PolicyParams& ref,
                                    const std::vector<GroupSample>& groups,
                                    const GrpoConfig& cfg, Gradient* grad = nullptr) {
  if (groups.empty()) throw PreconditionError("grpo needs at least one group");
  GrpoObjective obj;
  const double n_groups = static_cast<double>(groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double w = 1.0 / (n_groups * static_cast<double>(g.trajectories.size()));
    for (std::size_t i = 0; i < g.trajectories.size(); ++i) {
      const auto& tr = g.trajectories[i];
      const double adv = g.advantages[i];
      if (cfg.ratio_mode == RatioMode::kSequence) {
        const double lp = log_prob(params, tr);
        const double lp_old = log_prob(params_old, tr);
        const double rho = std::exp(lp - lp_old);
        detail::check_ratio(rho, gi, i);
        const auto [term, active] = detail::clipped_term(rho, adv, cfg.clip_eps);
        obj.surrogate += w * term;
        if (grad && active && adv != 0.0) {
          accumulate_log_prob_grad(params, tr.spec, tr.tokens, w * adv * rho, *grad,
                                   tr.prefix_length);
        }
      } else {
        const std::size_t len = tr.tokens.size() - tr.prefix_length;
        if (len == 0) continue;
        const double wt = w / static_cast<double>(len);
        for_each_context(tr.spec, tr.tokens,
                         [&](std::size_t t, const FeatureContext& ctx, TokenId y) {
          if (t < tr.prefix_length) return;
          const Logits lp = log_softmax(logits(params, ctx));
          const Logits lp_old = log_softmax(logits(params_old, ctx));
          const double rho = std::exp(lp[y.value] - lp_old[y.value]);
          detail::check_ratio(rho, gi, i);
          const auto [term, active] = detail::clipped_term(rho, adv, cfg.clip_eps);
          obj.surrogate += wt * term;
          if (!grad || !active || adv == 0.0) return;
          const double s = wt * adv * rho;
          for (const FeatureRef f : ctx.rows()) {
            double* row = grad->row(f);
            for (int k = 0; k < kVocabSize; ++k) row[k] -= s * std::exp(lp[k]);
            row[y.value] += s;
          }
        });
      }
      const double kl = exact_kl(params, ref, tr.spec, tr.tokens, grad, -cfg.kl_coef * w,
                                 tr.prefix_length);
      obj.kl += w * kl;
    }
  }
  obj.value = obj.surrogate - cfg.kl_coef * obj.kl;
  return obj;
}

inline Gradient grpo_grad(const PolicyParams& params, const PolicyParams& params_old,
                          const PolicyParams& ref, const std::vector<GroupSample>& groups,
                          const GrpoConfig& cfg) {
  Gradient g = Gradient::zeros();
  grpo_objective(params, params_old, ref, groups, cfg, &g);
  return g;
}

struct TrainLogRecord {
  int step = 0;
  double mean_r_total = 0.0;
  double mean_r_vis = 0.0;
  double mean_r_struc = 0.0;
  double mean_r_len = 0.0;
  double mean_kl = 0.0;
  double grad_norm = 0.0;
  double well_formed = 0.0;
  double wall_time = 0.0;  // seconds since the run started; not deterministic
};

struct TrainHooks {
  std::function<void(const TrainLogRecord&)> on_record;
  std::function<void(const PolicyParams&, int step)> on_checkpoint;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainLogRecord> log;
  RewardNormalizer normalizer;
};

// On-policy GRPO: each step snapshots theta_old, collects prompts_per_step
// groups, and takes one gradient-ascent step on J.
inline TrainResult train(const GrpoConfig& cfg, const std::vector<UserPrompt>& prompts,
                         PolicyParams init, const PolicyParams& ref, RewardContext rewards,
                         const TrainHooks& hooks = {},
                         const std::function<double()>& clock = {}) {
  cfg.validate();
  if (prompts.empty()) throw PreconditionError("training needs at least one prompt");
  if (!init.all_finite()) throw PreconditionError("initial parameters are not finite");
  TrainResult result;
  PolicyParams params = std::move(init);

  std::vector<std::size_t> order(prompts.size());
  std::size_t cursor = order.size();
  std::uint64_t pass = 0;
  auto next_prompt = [&]() -> const UserPrompt& {
    if (cursor == order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng shuffle_rng(cfg.seed, {0x6f72646572ull, pass++});
      shuffle_rng.shuffle(order);
      cursor = 0;
    }
    return prompts[order[cursor++]];
  };

  for (int step = 1; step <= cfg.steps; ++step) {
    const PolicyParams params_old = params;
    std::vector<GroupSample> groups;
    groups.reserve(cfg.prompts_per_step);
    for (int j = 0; j < cfg.prompts_per_step; ++j) {
      Rng rng(cfg.seed, {0x67726f7570ull, static_cast<std::uint64_t>(step),
                         static_cast<std::uint64_t>(j)});
      groups.push_back(collect_group(next_prompt(), params_old, cfg, rng, rewards));
    }

    Gradient grad = Gradient::zeros();
    const GrpoObjective obj = grpo_objective(params, params_old, ref, groups, cfg, &grad);
    const double norm = std::sqrt(grad.squared_norm());
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient at step " + std::to_string(step));
    double scale = cfg.lr;
    if (cfg.grad_clip > 0 && norm > cfg.grad_clip) scale *= cfg.grad_clip / norm;
    params.add_scaled(grad, scale);

    TrainLogRecord rec;
    rec.step = step;
    double n = 0.0;
    for (const auto& g : groups) {
      for (const auto& b : g.breakdowns) {
        rec.mean_r_total += b.r_total;
        rec.mean_r_vis += b.r_vis;
        rec.mean_r_struc += b.r_struc;
        rec.mean_r_len += b.r_len;
        rec.well_formed += b.well_formed ? 1.0 : 0.0;
        n += 1.0;
      }
    }
    rec.mean_r_total /= n;
    rec.mean_r_vis /= n;
    rec.mean_r_struc /= n;
    rec.mean_r_len /= n;
    rec.well_formed /= n;
    rec.mean_kl = obj.kl;
    rec.grad_norm = norm;
    rec.wall_time = clock ? clock() : 0.0;
    result.log.push_back(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 &&
        step != cfg.steps) {
      hooks.on_checkpoint(params, step);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(params, cfg.steps);
  result.params = std::move(params);
  result.normalizer = rewards.normalizer;
  return result;
}

}  // namespace reprompt

#endif  // REPROMPT_GRPO_HPP_
