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

#ifndef REPROMPT_PIPELINE_HPP_
#define REPROMPT_PIPELINE_HPP_

// The pipeline stages behind each subcommand. Stages communicate only
// through files under the run directory.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "reprompt/config.hpp"
#include "reprompt/eval.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/grpo.hpp"
#include "reprompt/io.hpp"
#include "reprompt/sft.hpp"
#include "reprompt/synthesizer.hpp"
#include "reprompt/variance.hpp"

namespace reprompt {

namespace fs = std::filesystem;

// File layout of a run directory.
struct RunLayout {
  fs::path root;

  fs::path config() const { return root / "config.json"; }
  fs::path dataset() const { return root / "data" / "dataset.jsonl"; }
  fs::path sft_traces() const { return root / "data" / "sft_traces.jsonl"; }
  fs::path sft_checkpoint() const { return root / "checkpoints" / "sft.json"; }
  fs::path rl_checkpoint() const { return root / "checkpoints" / "rl.json"; }
  fs::path step_checkpoint(int step) const {
    return root / "checkpoints" / ("rl_step_" + std::to_string(step) + ".json");
  }
  fs::path sft_log() const { return root / "sft_log.jsonl"; }
  fs::path train_log() const { return root / "train_log.jsonl"; }
  fs::path timing_log() const { return root / "timing.jsonl"; }
  fs::path reports() const { return root / "reports"; }
  fs::path eval_report(const std::string& label) const {
    return reports() / ("eval_" + label + ".json");
  }
};

inline RunLayout layout_of(const RunConfig& cfg) { return {fs::path(cfg.out)}; }

// Re-loading this file with no overrides reproduces the run.
inline void write_effective_config(const RunConfig& cfg) {
  write_file_atomic(layout_of(cfg).config(), dump(config_to_json(cfg)));
}

inline Dataset run_gen_data(const RunConfig& cfg) {
  const auto L = layout_of(cfg);
  write_effective_config(cfg);
  Dataset ds = generate_dataset(cfg.dataset_options());
  write_file_atomic(L.dataset(), dataset_jsonl(ds));
  const auto traces = build_traces(ds.sft, cfg.rewards, cfg.sft, cfg.seed);
  write_file_atomic(L.sft_traces(), traces_jsonl(ds.sft, traces));
  return ds;
}

inline Checkpoint run_sft(const RunConfig& cfg) {
  const auto L = layout_of(cfg);
  if (!fs::exists(L.sft_traces())) {
    throw MissingInputError("SFT traces '" + L.sft_traces().string() +
                            "' do not exist; run gen-data first");
  }
  const auto traces = traces_from_jsonl(read_file(L.sft_traces()));
  write_effective_config(cfg);
  Rng rng(cfg.seed, {0x736674ull});
  const SftResult fit = sft_fit(PolicyParams::zeros(), traces, cfg.sft, rng);
  std::vector<Json> log;
  for (std::size_t e = 0; e < fit.nll.size(); ++e) {
    log.push_back({{"epoch", e}, {"nll", fit.nll[e]}});
  }
  write_file_atomic(L.sft_log(), dump_lines(log));
  Checkpoint ck{fit.params, "sft", cfg.sft.epochs, cfg.seed, std::nullopt};
  save_checkpoint(L.sft_checkpoint(), ck);
  return ck;
}

// `init` defaults to the SFT checkpoint, which also serves as the KL reference.
inline TrainResult run_train(const RunConfig& cfg, const fs::path& init = {}) {
  const auto L = layout_of(cfg);
  const Dataset ds = load_dataset(L.dataset());
  const Checkpoint start = load_checkpoint(init.empty() ? L.sft_checkpoint() : init, cfg.rewards);
  if (ds.rl.empty()) throw PreconditionError("dataset has no RL-stage prompts");
  write_effective_config(cfg);

  fs::create_directories(L.root);
  std::ofstream log(L.train_log(), std::ios::binary | std::ios::trunc);
  std::ofstream timing(L.timing_log(), std::ios::binary | std::ios::trunc);
  if (!log || !timing) throw Error("cannot open the training log under '" + L.root.string() + "'");

  const GrpoConfig gc = cfg.grpo_config();
  RewardContext rewards(cfg.rewards);
  const auto t0 = std::chrono::steady_clock::now();
  auto clock = [t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  // The normalizer at a step checkpoint is not observable from the hook, so
  // step checkpoints carry none; the final one carries the run's.
  TrainHooks hooks;
  hooks.on_record = [&](const TrainLogRecord& r) {
    log << log_record(r).dump() << "\n";
    log.flush();
    timing << timing_record(r).dump() << "\n";
    timing.flush();
  };
  hooks.on_checkpoint = [&](const PolicyParams& p, int step) {
    if (step == gc.steps) return;
    save_checkpoint(L.step_checkpoint(step), Checkpoint{p, "rl", step, cfg.seed, std::nullopt});
  };
  TrainResult res = train(gc, ds.rl, start.params, start.params, rewards, hooks, clock);
  save_checkpoint(L.rl_checkpoint(), Checkpoint{res.params, "rl", gc.steps, cfg.seed, res.normalizer});
  return res;
}

struct EvalOutput {
  std::vector<EvalReport> reports;
  std::vector<ComparisonRow> rows;
  std::string table;
};

inline std::string checkpoint_label(const fs::path& p) { return p.stem().string(); }

// Pass-through first, then each checkpoint in order. Every input is loaded
// before any report is written.
inline EvalOutput run_eval(const RunConfig& cfg, std::vector<fs::path> checkpoints = {}) {
  const auto L = layout_of(cfg);
  if (checkpoints.empty()) checkpoints = {L.sft_checkpoint(), L.rl_checkpoint()};
  const Dataset ds = load_dataset(L.dataset());
  std::vector<std::pair<std::string, Checkpoint>> loaded;
  for (const auto& p : checkpoints) loaded.emplace_back(checkpoint_label(p), load_checkpoint(p, cfg.rewards));
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    bool clash = loaded[i].first == "pass_through" || loaded[i].first == "oracle";
    for (std::size_t k = 0; k < i; ++k) clash = clash || loaded[i].first == loaded[k].first;
    if (clash) throw PreconditionError("duplicate pathway label '" + loaded[i].first + "'");
  }

  EvalOutput out;
  out.reports.push_back(evaluate(Pathway::pass_through(), ds.eval, cfg.seed));
  if (cfg.eval.include_oracle) out.reports.push_back(evaluate(Pathway::oracle(cfg.rewards), ds.eval, cfg.seed));
  for (const auto& [label, ck] : loaded) {
    out.reports.push_back(
        evaluate(Pathway::policy(label, ck.params, cfg.policy.max_len), ds.eval, cfg.seed));
  }
  out.rows = compare(out.reports);
  out.table = comparison_table(out.reports, out.rows);

  write_effective_config(cfg);
  for (const auto& r : out.reports) write_file_atomic(L.eval_report(r.pathway), dump(eval_report_to_json(r)));
  write_file_atomic(L.reports() / "compare.json", dump(comparison_to_json(out.rows)));
  write_file_atomic(L.reports() / "compare.txt", out.table);
  return out;
}

// Up to n prompts, taking categories in turn so every category is covered.
inline std::vector<UserPrompt> spread_prompts(const std::vector<UserPrompt>& pool, int n) {
  std::array<std::vector<const UserPrompt*>, kNumCategories> by_cat;
  for (const auto& p : pool) by_cat[static_cast<int>(p.spec.category)].push_back(&p);
  std::vector<UserPrompt> out;
  for (std::size_t depth = 0; static_cast<int>(out.size()) < n; ++depth) {
    bool any = false;
    for (const auto& bucket : by_cat) {
      if (depth < bucket.size() && static_cast<int>(out.size()) < n) {
        out.push_back(*bucket[depth]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

inline ReasoningVsDirect run_variance(const RunConfig& cfg, const fs::path& checkpoint = {}) {
  const auto L = layout_of(cfg);
  const Dataset ds = load_dataset(L.dataset());
  const Checkpoint ck = load_checkpoint(checkpoint.empty() ? L.rl_checkpoint() : checkpoint, cfg.rewards);
  const RewardNormalizer norm = ck.normalizer ? *ck.normalizer : RewardNormalizer(cfg.rewards);
  VarianceOptions opt = cfg.variance.options;
  opt.max_len = cfg.policy.max_len;
  const auto prompts = spread_prompts(ds.eval, cfg.variance.prompts);
  ReasoningVsDirect r = reasoning_vs_direct(ck.params, prompts, cfg.rewards, norm, opt, cfg.seed);
  write_effective_config(cfg);
  write_file_atomic(L.reports() / "variance.json", dump(reasoning_vs_direct_to_json(r)));
  write_file_atomic(L.reports() / "variance.txt", variance_table(r));
  return r;
}

inline constexpr const char* kDefaultDemoPrompt = "a photo of a dog above a cow";

struct DemoResult {
  UserPrompt prompt;
  TokenSeq output;
  ParsedOutput parsed;
  Scene scene;
  RewardBreakdown breakdown;
};

inline Json demo_to_json(const DemoResult& d) {
  const Vocabulary v;
  return {{"user_prompt", v.detokenize(d.prompt.tokens)},
          {"spec", spec_to_json(d.prompt.spec)},
          {"output", v.detokenize(d.output)},
          {"reasoning", v.detokenize(d.parsed.reason_tokens)},
          {"enhanced_prompt", v.detokenize(d.parsed.prompt_tokens)},
          {"well_formed", d.parsed.well_formed},
          {"scene", scene_to_json(d.scene)},
          {"reward", breakdown_to_json(d.breakdown)}};
}

inline std::string demo_text(const DemoResult& d) {
  const Vocabulary v;
  std::string s;
  s += "user prompt:     " + v.detokenize(d.prompt.tokens) + "\n";
  s += "category:        " + std::string(category_name(d.prompt.spec.category)) + "\n";
  s += "reasoning:       " + v.detokenize(d.parsed.reason_tokens) + "\n";
  s += "enhanced prompt: " + v.detokenize(d.parsed.prompt_tokens) + "\n";
  s += "well formed:     " + std::string(d.parsed.well_formed ? "yes" : "no") + "\n";
  s += "scene:\n" + scene_to_text(d.scene);
  const auto& b = d.breakdown;
  s += "reward: r_total " + fixed(b.r_total, 4) + "  r_vis " + fixed(b.r_vis, 4) + "  r_sem " +
       fixed(b.r_sem, 4) + "  r_pref " + fixed(b.r_pref, 4) + "  r_struc " + fixed(b.r_struc, 1) +
       "  r_len " + fixed(b.r_len, 1) + "\n";
  return s;
}

// Greedy decoding, so the walkthrough is a function of the checkpoint alone.
inline DemoResult run_demo(const RunConfig& cfg, const std::string& text,
                           const fs::path& checkpoint = {}) {
  const auto L = layout_of(cfg);
  const Vocabulary v;
  TokenSeq tokens;
  try {
    tokens = v.tokenize(text);
  } catch (const PreconditionError& e) {
    throw PreconditionError("prompt '" + text + "' is outside the vocabulary: " + e.what());
  }
  const auto spec = parse_user_prompt(tokens);
  if (!spec) throw PreconditionError("prompt '" + text + "' is not a grammar-generated prompt");
  const Checkpoint ck = load_checkpoint(checkpoint.empty() ? L.rl_checkpoint() : checkpoint, cfg.rewards);
  const RewardNormalizer norm = ck.normalizer ? *ck.normalizer : RewardNormalizer(cfg.rewards);

  DemoResult d;
  d.prompt = make_user_prompt(*spec);
  d.output = greedy_decode(ck.params, d.prompt.spec, {}, cfg.policy.max_len);
  d.parsed = parse_structured_output(d.output);
  d.scene = synthesize(d.parsed.well_formed ? d.parsed.prompt_tokens : d.prompt.tokens);
  d.breakdown = frozen_reward(d.output, d.prompt.spec, cfg.rewards, norm);
  write_file_atomic(L.reports() / "demo.json", dump(demo_to_json(d)));
  return d;
}

}  // namespace reprompt

#endif  // REPROMPT_PIPELINE_HPP_
