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

#ifndef REPROMPT_POLICY_HPP_
#define REPROMPT_POLICY_HPP_

// Autoregressive log-linear reprompting policy.
//
// At every step the policy looks at a FeatureContext derived from the user
// prompt's spec and the prefix generated so far. Each feature template owns a
// dense (rows x vocabulary) weight table; a context activates one row per
// applicable template and
//
//   logits(context) = sum of the active rows,
//   pi(token | context) = softmax(logits)[token].
//
// Because the model is additive in the active rows, the gradient of
// log pi(y_t | context) with respect to every active row is
// onehot(y_t) - softmax(logits), and zero elsewhere.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/rng.hpp"
#include "reprompt/synthesizer.hpp"
#include "reprompt/vocabulary.hpp"

namespace reprompt {

inline constexpr int kVocabSize = static_cast<int>(detail::kTokenDefs.size());
static_assert(kVocabSize <= static_cast<int>(kMaxVocabulary));

inline constexpr int kDefaultMaxLen = 96;

// Position of the output in the <reason>..</reason><prompt>..</prompt> grammar.
enum class Segment : std::uint8_t {
  kStart,        // expecting <reason>
  kReason,       // inside the reasoning trace
  kBetween,      // expecting <prompt>
  kPrompt,       // inside the enhanced prompt
  kDone,         // expecting <end>
  kBroken,       // the grammar has been violated
};
inline constexpr int kNumSegments = 6;
inline constexpr int kNumBuckets = 4;

inline int position_bucket(int pos) {
  if (pos < 4) return 0;
  if (pos < 8) return 1;
  if (pos < 16) return 2;
  return 3;
}

// Feature templates. The row counts fix the checkpoint layout.
enum class Feature : std::uint8_t {
  kSegment,       // segment
  kPrev,          // previous token (or BOS)
  kCategory,      // task category
  kObject1,       // first object class slot
  kObject2,       // second object class slot
  kColor1,        // first color slot
  kColor2,        // second color slot
  kCount,         // count slot
  kRelation,      // relation slot
  kBucket,        // segment x position-in-segment bucket
  kPendingObject, // body segment x next spec object still owed (or none)
  kPendingColor,  // body segment x color of that object (or none)
  kMention,       // body segment x role of a just-mentioned noun x relation
  kDeficit,       // counting only: copies still missing in the prompt
};
inline constexpr int kNumFeatures = 14;

struct FeatureSpec {
  std::string_view name;
  int rows;
};

inline constexpr std::array<FeatureSpec, kNumFeatures> kFeatureSpecs{{
    {"segment", kNumSegments},
    {"prev", kVocabSize + 1},
    {"category", kNumCategories},
    {"object1", kNumObjects},
    {"object2", kNumObjects},
    {"color1", kNumColors},
    {"color2", kNumColors},
    {"count", kMaxCount},
    {"relation", kNumRelations},
    {"bucket", kNumSegments * kNumBuckets},
    {"pending_object", 2 * (kNumObjects + 1)},
    {"pending_color", 2 * (kNumColors + 1)},
    {"mention", 2 * 3 * (kNumRelations + 1)},
    {"deficit", kMaxCount + 1},
}};

struct FeatureRef {
  std::uint8_t table = 0;
  std::uint16_t row = 0;
  friend bool operator==(FeatureRef, FeatureRef) = default;
};

// The active rows for one decoding step.
struct FeatureContext {
  Segment segment = Segment::kStart;
  int position = 0;  // tokens emitted so far in the current segment
  std::array<FeatureRef, kNumFeatures> active{};
  int size = 0;

  std::span<const FeatureRef> rows() const { return {active.data(), static_cast<std::size_t>(size)}; }
  void add(Feature f, int row) {
    active[size++] = FeatureRef{static_cast<std::uint8_t>(f), static_cast<std::uint16_t>(row)};
  }
};

// Incrementally derives FeatureContexts from (spec, generated prefix).
class ContextTracker {
 public:
  explicit ContextTracker(const PromptSpec& spec) : spec_(spec) {}

  Segment segment() const { return segment_; }

  FeatureContext context() const {
    FeatureContext ctx;
    ctx.segment = segment_;
    ctx.position = position_;
    ctx.add(Feature::kSegment, static_cast<int>(segment_));
    ctx.add(Feature::kPrev, prev_ ? prev_->value : kVocabSize);
    ctx.add(Feature::kCategory, static_cast<int>(spec_.category));
    ctx.add(Feature::kObject1, spec_.objects[0].cls);
    if (spec_.objects.size() > 1) ctx.add(Feature::kObject2, spec_.objects[1].cls);
    if (spec_.objects[0].color) ctx.add(Feature::kColor1, *spec_.objects[0].color);
    if (spec_.objects.size() > 1 && spec_.objects[1].color) {
      ctx.add(Feature::kColor2, *spec_.objects[1].color);
    }
    if (spec_.count) ctx.add(Feature::kCount, *spec_.count - 1);
    if (spec_.relation) ctx.add(Feature::kRelation, static_cast<int>(*spec_.relation));
    ctx.add(Feature::kBucket,
            static_cast<int>(segment_) * kNumBuckets + position_bucket(position_));

    const bool in_body = segment_ == Segment::kReason || segment_ == Segment::kPrompt;
    if (!in_body) return ctx;
    const int seg = segment_ == Segment::kReason ? 0 : 1;
    const int pending = pending_index();
    const int pending_cls = pending < 0 ? kNumObjects : spec_.objects[pending].cls;
    ctx.add(Feature::kPendingObject, seg * (kNumObjects + 1) + pending_cls);
    int pending_color = kNumColors;
    if (pending >= 0 && spec_.objects[pending].color) {
      pending_color = *spec_.objects[pending].color;
    }
    ctx.add(Feature::kPendingColor, seg * (kNumColors + 1) + pending_color);

    if (prev_ && Vocabulary{}.is(*prev_, TokenClass::kObject) && position_ > 0) {
      const int cls = Vocabulary{}.object_index(*prev_);
      int role = 2;
      if (cls == spec_.objects[0].cls) {
        role = 0;
      } else if (spec_.objects.size() > 1 && cls == spec_.objects[1].cls) {
        role = 1;
      }
      const int rel = spec_.relation ? static_cast<int>(*spec_.relation) : kNumRelations;
      ctx.add(Feature::kMention, (seg * 3 + role) * (kNumRelations + 1) + rel);
    }
    if (segment_ == Segment::kPrompt && spec_.count) {
      ctx.add(Feature::kDeficit, std::max(0, *spec_.count - prompt_counts_[spec_.objects[0].cls]));
    }
    return ctx;
  }

  void advance(TokenId t) {
    const Vocabulary v;
    const bool structure = v.is(t, TokenClass::kStructure);
    switch (segment_) {
      case Segment::kStart:
        enter(t == v.reason_open() ? Segment::kReason : Segment::kBroken);
        break;
      case Segment::kReason:
        if (t == v.reason_close()) {
          enter(Segment::kBetween);
        } else if (structure || t == v.end()) {
          enter(Segment::kBroken);
        } else {
          body_token(t);
        }
        break;
      case Segment::kBetween:
        enter(t == v.prompt_open() ? Segment::kPrompt : Segment::kBroken);
        break;
      case Segment::kPrompt:
        if (t == v.prompt_close()) {
          enter(Segment::kDone);
        } else if (structure || t == v.end()) {
          enter(Segment::kBroken);
        } else {
          body_token(t);
        }
        break;
      case Segment::kDone:
      case Segment::kBroken:
        enter(Segment::kBroken);
        break;
    }
    prev_ = t;
  }

 private:
  void enter(Segment s) {
    segment_ = s;
    position_ = 0;
    mentioned_.fill(0);
    prompt_counts_.fill(0);
    prompt_prefix_.clear();
  }

  void body_token(TokenId t) {
    const Vocabulary v;
    ++position_;
    if (segment_ == Segment::kReason) {
      if (v.is(t, TokenClass::kObject)) ++mentioned_[v.object_index(t)];
      return;
    }
    prompt_prefix_.push_back(t);
    // Copies are what the synthesizer will actually draw, so the counting
    // deficit tracks its numeral cap.
    prompt_counts_.fill(0);
    for (const auto& o : synthesize(prompt_prefix_).objects) ++prompt_counts_[o.cls];
  }

  // Index of the first spec object not yet satisfied in this segment, or -1.
  // In the reasoning trace one mention suffices; in the prompt the object
  // must be drawn `count` times (once outside the counting category).
  int pending_index() const {
    for (std::size_t k = 0; k < spec_.objects.size(); ++k) {
      const int cls = spec_.objects[k].cls;
      if (segment_ == Segment::kReason) {
        if (mentioned_[cls] == 0) return static_cast<int>(k);
      } else if (prompt_counts_[cls] == 0) {
        return static_cast<int>(k);
      }
    }
    return -1;
  }

  PromptSpec spec_;
  Segment segment_ = Segment::kStart;
  int position_ = 0;
  std::optional<TokenId> prev_;
  std::array<int, kNumObjects> mentioned_{};
  std::array<int, kNumObjects> prompt_counts_{};
  TokenSeq prompt_prefix_;
};

// One dense weight table per feature template.
struct PolicyParams {
  std::vector<std::vector<double>> tables;

  static PolicyParams zeros() {
    PolicyParams p;
    p.tables.reserve(kNumFeatures);
    for (const auto& f : kFeatureSpecs) {
      p.tables.emplace_back(static_cast<std::size_t>(f.rows) * kVocabSize, 0.0);
    }
    return p;
  }

  double* row(FeatureRef f) {
    return tables[f.table].data() + static_cast<std::size_t>(f.row) * kVocabSize;
  }
  const double* row(FeatureRef f) const {
    return tables[f.table].data() + static_cast<std::size_t>(f.row) * kVocabSize;
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& t : tables) n += t.size();
    return n;
  }

  // Flat coordinate access, in table order.
  double& at(std::size_t k) {
    for (auto& t : tables) {
      if (k < t.size()) return t[k];
      k -= t.size();
    }
    throw PreconditionError("parameter index out of range");
  }
  double at(std::size_t k) const { return const_cast<PolicyParams*>(this)->at(k); }

  // this += scale * other
  void add_scaled(const PolicyParams& other, double scale) {
    for (std::size_t i = 0; i < tables.size(); ++i) {
      auto& a = tables[i];
      const auto& b = other.tables[i];
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += scale * b[k];
    }
  }
  void scale(double s) {
    for (auto& t : tables)
      for (auto& x : t) x *= s;
  }
  double squared_norm() const {
    double s = 0.0;
    for (const auto& t : tables)
      for (double x : t) s += x * x;
    return s;
  }
  bool all_finite() const {
    for (const auto& t : tables)
      for (double x : t)
        if (!std::isfinite(x)) return false;
    return true;
  }
  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

using Gradient = PolicyParams;
using Logits = std::array<double, kVocabSize>;

inline Logits logits(const PolicyParams& params, const FeatureContext& ctx) {
  Logits z{};
  for (const FeatureRef f : ctx.rows()) {
    const double* w = params.row(f);
    for (int k = 0; k < kVocabSize; ++k) z[k] += w[k];
  }
  return z;
}

// Stable log-softmax.
inline Logits log_softmax(const Logits& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - m);
  const double lse = m + std::log(s);
  Logits out;
  for (int k = 0; k < kVocabSize; ++k) out[k] = z[k] - lse;
  return out;
}

inline Logits softmax(const Logits& z) {
  Logits lp = log_softmax(z);
  for (double& x : lp) x = std::exp(x);
  return lp;
}

enum class Termination : std::uint8_t { kEndToken, kMaxLength };

struct Trajectory {
  PromptSpec spec;
  TokenSeq tokens;
  // Log-probabilities of the sampled steps. Forced prefix tokens, if any,
  // are not included and are counted by prefix_length.
  std::vector<double> per_step_logprob;
  double total_logprob = 0.0;
  std::size_t prefix_length = 0;
  Termination terminated = Termination::kMaxLength;
};

// Visit the context before each token of `tokens`.
template <typename Fn>
void for_each_context(const PromptSpec& spec, std::span<const TokenId> tokens, Fn&& fn) {
  ContextTracker tracker(spec);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    fn(t, tracker.context(), tokens[t]);
    tracker.advance(tokens[t]);
  }
}

// Continue decoding after a fixed prefix. Sampling stops at <end>, when the
// whole sequence reaches max_len, or right after `stop_after` if given.
inline Trajectory sample_continuation(const PolicyParams& params, const PromptSpec& spec,
                                      std::span<const TokenId> prefix, Rng& rng,
                                      int max_len = kDefaultMaxLen,
                                      std::optional<TokenId> stop_after = std::nullopt) {
  if (max_len < 1) throw PreconditionError("max_len must be >= 1");
  const Vocabulary v;
  Trajectory tr;
  tr.spec = spec;
  tr.prefix_length = prefix.size();
  ContextTracker tracker(spec);
  for (TokenId t : prefix) {
    tr.tokens.push_back(t);
    tracker.advance(t);
  }
  while (static_cast<int>(tr.tokens.size()) < max_len) {
    const Logits lp = log_softmax(logits(params, tracker.context()));
    Logits p;
    for (int k = 0; k < kVocabSize; ++k) p[k] = std::exp(lp[k]);
    const auto k = rng.categorical(p);
    const TokenId t{static_cast<std::uint16_t>(k)};
    tr.tokens.push_back(t);
    tr.per_step_logprob.push_back(lp[k]);
    tr.total_logprob += lp[k];
    tracker.advance(t);
    if (t == v.end()) {
      tr.terminated = Termination::kEndToken;
      break;
    }
    if (stop_after && t == *stop_after) break;
  }
  return tr;
}

// y ~ pi(. | P)
inline Trajectory sample(const PolicyParams& params, const UserPrompt& prompt, Rng& rng,
                         int max_len = kDefaultMaxLen) {
  return sample_continuation(params, prompt.spec, {}, rng, max_len);
}

// Argmax decoding; ties go to the lower token id.
inline TokenSeq greedy_decode(const PolicyParams& params, const PromptSpec& spec,
                              std::span<const TokenId> prefix = {},
                              int max_len = kDefaultMaxLen) {
  const Vocabulary v;
  ContextTracker tracker(spec);
  TokenSeq out(prefix.begin(), prefix.end());
  for (TokenId t : prefix) tracker.advance(t);
  while (static_cast<int>(out.size()) < max_len) {
    const Logits z = logits(params, tracker.context());
    const auto k = std::max_element(z.begin(), z.end()) - z.begin();
    const TokenId t{static_cast<std::uint16_t>(k)};
    out.push_back(t);
    tracker.advance(t);
    if (t == v.end()) break;
  }
  return out;
}

// Exact sum of per-step log-probabilities of `tokens`, starting at `from`.
inline double log_prob(const PolicyParams& params, const PromptSpec& spec,
                       std::span<const TokenId> tokens, std::size_t from = 0) {
  double total = 0.0;
  for_each_context(spec, tokens, [&](std::size_t t, const FeatureContext& ctx, TokenId y) {
    if (t < from) return;
    total += log_softmax(logits(params, ctx))[y.value];
  });
  return total;
}

inline double log_prob(const PolicyParams& params, const Trajectory& tr) {
  return log_prob(params, tr.spec, tr.tokens, tr.prefix_length);
}

// grad += scale * d/dtheta log pi(tokens[from:])
inline void accumulate_log_prob_grad(const PolicyParams& params, const PromptSpec& spec,
                                     std::span<const TokenId> tokens, double scale,
                                     Gradient& grad, std::size_t from = 0) {
  for_each_context(spec, tokens, [&](std::size_t t, const FeatureContext& ctx, TokenId y) {
    if (t < from) return;
    Logits g = softmax(logits(params, ctx));
    for (double& x : g) x = -x;
    g[y.value] += 1.0;
    for (const FeatureRef f : ctx.rows()) {
      double* row = grad.row(f);
      for (int k = 0; k < kVocabSize; ++k) row[k] += scale * g[k];
    }
  });
}

inline Gradient log_prob_grad(const PolicyParams& params, const Trajectory& tr) {
  Gradient g = Gradient::zeros();
  accumulate_log_prob_grad(params, tr.spec, tr.tokens, 1.0, g, tr.prefix_length);
  return g;
}

// KL(p || q) between two categoricals given as log-probabilities.
inline double categorical_kl(const Logits& log_p, const Logits& log_q) {
  double kl = 0.0;
  for (int k = 0; k < kVocabSize; ++k) {
    const double p = std::exp(log_p[k]);
    if (p > 0.0) kl += p * (log_p[k] - log_q[k]);
  }
  return std::max(kl, 0.0);
}

// Rao-Blackwellized sequence KL: the exact categorical KL at every context
// the trajectory visits, summed. If `grad` is non-null, scale * dKL/dtheta is
// added to it (contexts held fixed).
inline double exact_kl(const PolicyParams& params, const PolicyParams& ref,
                       const PromptSpec& spec, std::span<const TokenId> tokens,
                       Gradient* grad = nullptr, double scale = 1.0,
                       std::size_t from = 0) {
  double total = 0.0;
  for_each_context(spec, tokens, [&](std::size_t t, const FeatureContext& ctx, TokenId) {
    if (t < from) return;
    const Logits lp = log_softmax(logits(params, ctx));
    const Logits lq = log_softmax(logits(ref, ctx));
    const double kl = categorical_kl(lp, lq);
    total += kl;
    if (!grad) return;
    // d KL / d z_k = p_k * (log p_k - log q_k - KL)
    Logits g;
    for (int k = 0; k < kVocabSize; ++k) g[k] = std::exp(lp[k]) * (lp[k] - lq[k] - kl);
    for (const FeatureRef f : ctx.rows()) {
      double* row = grad->row(f);
      for (int k = 0; k < kVocabSize; ++k) row[k] += scale * g[k];
    }
  });
  return total;
}

inline double exact_kl(const PolicyParams& params, const PolicyParams& ref,
                       const Trajectory& tr) {
  return exact_kl(params, ref, tr.spec, tr.tokens, nullptr, 1.0, tr.prefix_length);
}

}  // namespace reprompt

#endif  // REPROMPT_POLICY_HPP_
