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

#include <cmath>
#include <set>

#include "test_util.hpp"

namespace reprompt {
namespace {

using testing::active_coordinates;
using testing::central_difference;
using testing::obj;
using testing::random_params;
using testing::rel_err;
using testing::spec_of;

UserPrompt dog_above_cow() {
  return make_user_prompt(spec_of(TaskCategory::kPosition, {{obj("dog"), {}}, {obj("cow"), {}}},
                                  std::nullopt, Relation::kAbove));
}

TEST(Policy, ZeroParamsSampleUniformly) {
  // Pearson chi-square over V = 51 cells, 50 degrees of freedom; the 0.999
  // quantile of chi2(50) is 86.661.
  const auto params = PolicyParams::zeros();
  const auto prompt = dog_above_cow();
  Rng rng(21);
  const int n = 10000;
  for (int step : {0, 3}) {
    std::vector<int> counts(kVocabSize, 0);
    for (int i = 0; i < n; ++i) {
      const auto tr = sample(params, prompt, rng, step + 1);
      if (static_cast<int>(tr.tokens.size()) <= step) {
        --i;  // stopped early at <end>; redraw
        continue;
      }
      ++counts[tr.tokens[step].value];
    }
    const double expected = static_cast<double>(n) / kVocabSize;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 86.661) << "step " << step;
  }
}

TEST(Policy, LogitBiasOnReasonDominatesFirstStep) {
  auto params = PolicyParams::zeros();
  const auto prompt = dog_above_cow();
  ContextTracker tracker(prompt.spec);
  params.row(tracker.context().rows()[0])[Vocabulary::reason_open().value] += 10.0;
  // Lower bound on P(<reason>): e^10 / (e^10 + 50) = 0.99773.
  Rng rng(4);
  int hits = 0;
  for (int i = 0; i < 1000; ++i) hits += sample(params, prompt, rng, 1).tokens[0] == Vocabulary::reason_open();
  EXPECT_GT(hits, 990);
}

TEST(Policy, SamplingIsReproducible) {
  Rng init(1);
  const auto params = random_params(init, 0.5);
  const auto prompt = dog_above_cow();
  Rng a(77), b(77);
  const auto x = sample(params, prompt, a);
  const auto y = sample(params, prompt, b);
  EXPECT_EQ(x.tokens, y.tokens);
  EXPECT_EQ(x.per_step_logprob, y.per_step_logprob);
}

TEST(Policy, LogProbMatchesSampledValue) {
  Rng init(2);
  const auto params = random_params(init, 0.7);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto tr = sample(params, dog_above_cow(), rng);
    double sum = 0.0;
    for (double lp : tr.per_step_logprob) sum += lp;
    EXPECT_NEAR(tr.total_logprob, sum, 1e-12);
    EXPECT_NEAR(log_prob(params, tr), tr.total_logprob, 1e-12);
    EXPECT_LE(static_cast<int>(tr.tokens.size()), kDefaultMaxLen);
    EXPECT_EQ(tr.terminated == Termination::kEndToken, tr.tokens.back() == Vocabulary::end());
  }
}

TEST(Policy, ZeroParamsLogProbIsUniform) {
  const auto params = PolicyParams::zeros();
  const auto prompt = dog_above_cow();
  const TokenSeq seq = testing::toks("<reason> dog above cow </reason> <prompt> a dog");
  EXPECT_NEAR(log_prob(params, prompt.spec, seq),
              static_cast<double>(seq.size()) * std::log(1.0 / kVocabSize), 1e-12);
}

TEST(Policy, RaisingAnEmittedLogitRaisesLogProb) {
  Rng init(5);
  auto params = random_params(init, 0.5);
  const auto prompt = dog_above_cow();
  const TokenSeq seq{Vocabulary::reason_open()};
  ContextTracker tracker(prompt.spec);
  const double before = log_prob(params, prompt.spec, seq);
  params.row(tracker.context().rows()[0])[seq[0].value] += 1e-3;
  EXPECT_GT(log_prob(params, prompt.spec, seq), before);
}

TEST(Policy, ProbabilitiesSumToOne) {
  Rng init(6);
  const auto params = random_params(init, 2.0);
  Rng rng(7);
  const auto tr = sample(params, dog_above_cow(), rng);
  for_each_context(tr.spec, tr.tokens, [&](std::size_t, const FeatureContext& ctx, TokenId) {
    const auto p = softmax(logits(params, ctx));
    double s = 0.0;
    for (double x : p) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  });
}

void check_log_prob_grad(const PolicyParams& base, const Trajectory& tr, Rng& pick) {
  auto params = base;
  const Gradient g = log_prob_grad(params, tr);
  const auto active = active_coordinates(tr.spec, tr.tokens);
  auto f = [&tr](const PolicyParams& p) { return log_prob(p, tr); };
  for (int i = 0; i < 50; ++i) {
    // Mostly coordinates the trajectory reads; some anywhere in the tables.
    const std::size_t k =
        i < 40 ? active[pick.index(active.size())] : pick.index(params.num_params());
    const double fd = central_difference(params, k, 1e-5, f);
    ASSERT_LE(rel_err(g.at(k), fd, 1e-3), 1e-5) << "coordinate " << k << ": " << g.at(k) << " vs " << fd;
  }
}

TEST(Policy, LogProbGradMatchesFiniteDifferences) {
  Rng init(8), rng(9), pick(10);
  for (int instance = 0; instance < 5; ++instance) {
    const auto params = random_params(init, 0.5);
    const auto tr = sample(params, dog_above_cow(), rng, 24);
    check_log_prob_grad(params, tr, pick);
    // Perturbed parameters, same trajectory.
    auto moved = params;
    moved.add_scaled(random_params(init, 0.3), 1.0);
    check_log_prob_grad(moved, tr, pick);
  }
}

TEST(Policy, EmptyTrajectoryHasZeroGradient) {
  Rng init(11);
  const auto params = random_params(init, 0.5);
  Trajectory tr;
  tr.spec = dog_above_cow().spec;
  EXPECT_EQ(log_prob_grad(params, tr).squared_norm(), 0.0);
}

TEST(Policy, InactiveRowsHaveZeroGradient) {
  Rng init(12), rng(13);
  const auto params = random_params(init, 0.5);
  const auto tr = sample(params, dog_above_cow(), rng, 30);
  const auto active = active_coordinates(tr.spec, tr.tokens);
  const std::set<std::size_t> on(active.begin(), active.end());
  const Gradient g = log_prob_grad(params, tr);
  for (std::size_t k = 0; k < g.num_params(); ++k) {
    if (!on.count(k)) {
      ASSERT_EQ(g.at(k), 0.0) << k;
    }
  }
}

TEST(Policy, ExactKlOfIdenticalParamsIsZero) {
  Rng init(14), rng(15);
  const auto params = random_params(init, 1.0);
  const auto tr = sample(params, dog_above_cow(), rng);
  EXPECT_EQ(exact_kl(params, params, tr), 0.0);
}

TEST(Policy, ExactKlIsNonNegative) {
  Rng init(16), rng(17);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_params(init, 1.0);
    const auto q = random_params(init, 1.0);
    EXPECT_GE(exact_kl(p, q, sample(p, dog_above_cow(), rng, 20)), 0.0);
  }
}

TEST(Policy, ExactKlMatchesMonteCarloLogRatio) {
  // Both the summed per-context KL and the plain log-ratio log p(y) - log q(y)
  // are unbiased for the sequence KL under y ~ p. Compare their means over the
  // same 10k draws against the standard error of the paired difference.
  Rng init(18), rng(19);
  const auto p = random_params(init, 0.3);
  const auto q = random_params(init, 0.3);
  const auto prompt = dog_above_cow();
  const int n = 10000;
  double sum_d = 0.0, sum_d2 = 0.0, sum_mc = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto tr = sample(p, prompt, rng, 12);
    const double mc = tr.total_logprob - log_prob(q, tr);
    const double d = mc - exact_kl(p, q, tr);
    sum_mc += mc;
    sum_d += d;
    sum_d2 += d * d;
  }
  const double mean_d = sum_d / n;
  const double se = std::sqrt((sum_d2 / n - mean_d * mean_d) / (n - 1));
  EXPECT_GT(sum_mc / n, 0.0);
  EXPECT_LE(std::abs(mean_d), 3.0 * se) << "mean difference " << mean_d << ", se " << se;
}

TEST(Policy, ExactKlGradientMatchesFiniteDifferences) {
  Rng init(20), rng(21), pick(22);
  const auto p = random_params(init, 0.5);
  const auto q = random_params(init, 0.5);
  const auto tr = sample(p, dog_above_cow(), rng, 20);
  Gradient g = Gradient::zeros();
  exact_kl(p, q, tr.spec, tr.tokens, &g);
  auto params = p;
  const auto active = active_coordinates(tr.spec, tr.tokens);
  auto f = [&](const PolicyParams& x) { return exact_kl(x, q, tr); };
  for (int i = 0; i < 50; ++i) {
    const std::size_t k = active[pick.index(active.size())];
    const double fd = central_difference(params, k, 1e-5, f);
    ASSERT_LE(rel_err(g.at(k), fd, 1e-3), 1e-5) << k;
  }
}

TEST(Policy, StopAfterAndPrefix) {
  Rng init(23), rng(24);
  auto params = random_params(init, 0.3);
  const auto prompt = dog_above_cow();
  const TokenSeq prefix{Vocabulary::reason_open()};
  // Make </reason> likely so the stop is reached quickly.
  for_each_context(prompt.spec, TokenSeq{Vocabulary::reason_open(), Vocabulary::reason_open()},
                   [&](std::size_t, const FeatureContext& ctx, TokenId) {
                     params.row(ctx.rows()[0])[Vocabulary::reason_close().value] += 3.0;
                   });
  const auto tr = sample_continuation(params, prompt.spec, prefix, rng, kDefaultMaxLen,
                                      Vocabulary::reason_close());
  EXPECT_EQ(tr.prefix_length, 1u);
  EXPECT_EQ(tr.tokens.front(), Vocabulary::reason_open());
  EXPECT_TRUE(tr.tokens.back() == Vocabulary::reason_close() ||
              tr.tokens.back() == Vocabulary::end() ||
              static_cast<int>(tr.tokens.size()) == kDefaultMaxLen);
  EXPECT_EQ(tr.per_step_logprob.size(), tr.tokens.size() - 1);
  EXPECT_NEAR(log_prob(params, tr), tr.total_logprob, 1e-12);
}

TEST(Policy, GreedyDecodeIsDeterministic) {
  Rng init(25);
  const auto params = random_params(init, 1.0);
  const auto spec = dog_above_cow().spec;
  EXPECT_EQ(greedy_decode(params, spec), greedy_decode(params, spec));
  EXPECT_THROW(sample(params, dog_above_cow(), init, 0), PreconditionError);
}

}  // namespace
}  // namespace reprompt
