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

#ifndef REPROMPT_CLI_HPP_
#define REPROMPT_CLI_HPP_

// The `reprompt` command line. Kept in a header so tests can drive it
// in-process.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "reprompt/config.hpp"
#include "reprompt/errors.hpp"
#include "reprompt/pipeline.hpp"

namespace reprompt {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitMissingConfig = 2,
  kExitBadConfig = 3,
  kExitMissingInput = 4,
  kExitPrecondition = 5,
  kExitRuntime = 6,
};

namespace detail {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

inline void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--config", a.config, "JSON config file; defaults apply when omitted");
  sub->add_option("--seed", a.seed, "Run seed; overrides the config value");
  sub->add_option("--out", a.out, "Run directory; overrides the config value");
  sub->add_option("overrides", a.overrides, "Per-key overrides, e.g. grpo.steps=50");
}

// Precedence: defaults < file < KEY=VALUE < --seed/--out.
inline RunConfig resolve(const CommonArgs& a) {
  RunConfig cfg = load_config(a.config, a.overrides);
  if (a.seed) cfg.seed = *a.seed;
  if (a.out) cfg.out = *a.out;
  cfg.validate();
  return cfg;
}

}  // namespace detail

// Runs one subcommand and returns its exit code. Diagnostics go to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reasoning-augmented reprompting lab"};
  app.name("reprompt");
  app.require_subcommand(1);

  detail::CommonArgs args;
  std::vector<std::string> eval_checkpoints;
  std::string init_path, ckpt_path;
  std::string demo_prompt = kDefaultDemoPrompt;

  auto* gen = app.add_subcommand("gen-data", "Generate the SFT, RL and evaluation prompt sets");
  auto* sft = app.add_subcommand("sft", "Fit the policy to oracle traces");
  auto* trn = app.add_subcommand("train", "Run GRPO from the SFT checkpoint");
  auto* evl = app.add_subcommand("eval", "Score pathways on the evaluation set and compare");
  auto* var = app.add_subcommand("variance", "Reward variance decomposition, reasoning vs direct");
  auto* dem = app.add_subcommand("demo", "Walk one prompt through the trained pipeline");
  for (auto* s : {gen, sft, trn, evl, var, dem}) detail::add_common(s, args);
  trn->add_option("--init", init_path, "Initial checkpoint (default: <out>/checkpoints/sft.json)");
  evl->add_option("--checkpoint", eval_checkpoints,
                  "Checkpoint(s) to score (default: sft.json and rl.json under <out>/checkpoints)");
  var->add_option("--checkpoint", ckpt_path, "Checkpoint (default: <out>/checkpoints/rl.json)");
  dem->add_option("--checkpoint", ckpt_path, "Checkpoint (default: <out>/checkpoints/rl.json)");
  dem->add_option("--prompt", demo_prompt, "User prompt text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "reprompt: " << e.what() << "\n" << "run 'reprompt --help' for usage\n";
    return kExitUsage;
  }

  try {
    const RunConfig cfg = detail::resolve(args);
    if (gen->parsed()) {
      const Dataset ds = run_gen_data(cfg);
      out << "wrote " << ds.sft.size() << " sft, " << ds.rl.size() << " rl, " << ds.eval.size()
          << " eval prompts to " << layout_of(cfg).dataset().string() << "\n";
    } else if (sft->parsed()) {
      run_sft(cfg);
      out << "wrote " << layout_of(cfg).sft_checkpoint().string() << "\n";
    } else if (trn->parsed()) {
      const TrainResult r = run_train(cfg, init_path);
      if (!r.log.empty()) {
        const auto& last = r.log.back();
        out << "step " << last.step << ": mean r_total " << fixed(last.mean_r_total, 4)
            << ", well formed " << fixed(last.well_formed, 3) << "\n";
      }
      out << "wrote " << layout_of(cfg).rl_checkpoint().string() << "\n";
    } else if (evl->parsed()) {
      std::vector<fs::path> paths(eval_checkpoints.begin(), eval_checkpoints.end());
      out << run_eval(cfg, paths).table;
    } else if (var->parsed()) {
      out << variance_table(run_variance(cfg, ckpt_path));
    } else if (dem->parsed()) {
      out << demo_text(run_demo(cfg, demo_prompt, ckpt_path));
    }
    return kExitOk;
  } catch (const MissingConfigError& e) {
    err << "reprompt: missing config: " << e.what() << "\n";
    return kExitMissingConfig;
  } catch (const ConfigError& e) {
    err << "reprompt: invalid config: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const MissingInputError& e) {
    err << "reprompt: missing input: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const PreconditionError& e) {
    err << "reprompt: invalid input: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const std::exception& e) {
    err << "reprompt: error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace reprompt

#endif  // REPROMPT_CLI_HPP_
