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
#include <sys/wait.h>

#include <sstream>

#include "reprompt/cli.hpp"
#include "test_util.hpp"

#ifndef REPROMPT_BIN
#error "REPROMPT_BIN must name the CLI binary"
#endif

namespace reprompt {
namespace {

namespace fs = std::filesystem;

// A configuration small enough to run the whole pipeline in seconds.
const std::vector<std::string> kSmall = {
    "data.per_category=30", "sft.epochs=3",          "grpo.steps=3",
    "grpo.prompts_per_step=4", "grpo.checkpoint_every=2", "variance.prompts=2",
    "variance.n_outer=20",  "variance.n_inner=2",    "policy.max_len=40"};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "reprompt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

Result cli(const std::string& sub, const fs::path& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{sub, "--out", dir.string()};
  args.insert(args.end(), kSmall.begin(), kSmall.end());
  args.insert(args.end(), extra.begin(), extra.end());
  return cli(args);
}

// Exit status of the real binary, output discarded.
int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + REPROMPT_BIN + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void run_pipeline(const fs::path& dir) {
  for (const char* sub : {"gen-data", "sft", "train", "eval", "variance", "demo"}) {
    const auto r = cli(sub, dir);
    ASSERT_EQ(r.code, kExitOk) << sub << ": " << r.err;
  }
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "timing.jsonl") continue;  // wall-clock
    files[rel] = read_file(e.path());
  }
  return files;
}

TEST(Cli, ExitCodesFromTheBinary) {
  const auto dir = testing::scratch_dir("cli_codes");
  EXPECT_EQ(run_binary("--help"), kExitOk);
  EXPECT_EQ(run_binary(""), kExitUsage);
  EXPECT_EQ(run_binary("frobnicate"), kExitUsage);
  EXPECT_EQ(run_binary("train --bogus-flag"), kExitUsage);
  EXPECT_EQ(run_binary("gen-data --config /nonexistent/c.json --out " + dir.string()), kExitMissingConfig);
  EXPECT_EQ(run_binary("gen-data grpo.steps=-1 --out " + dir.string()), kExitBadConfig);
  EXPECT_EQ(run_binary("gen-data grpo.stepz=1 --out " + dir.string()), kExitBadConfig);
  EXPECT_EQ(run_binary("sft --out " + (dir / "empty").string()), kExitMissingInput);
}

TEST(Cli, EvalWithMissingCheckpointWritesNoReport) {
  const auto dir = testing::scratch_dir("cli_missing_ckpt");
  ASSERT_EQ(cli("gen-data", dir).code, kExitOk);
  const auto r = cli("eval", dir, {"--checkpoint", (dir / "nope.json").string()});
  EXPECT_EQ(r.code, kExitMissingInput);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "reports"));
}

TEST(Cli, ZeroTrainingStepsWritesEmptyLog) {
  const auto dir = testing::scratch_dir("cli_zero_steps");
  ASSERT_EQ(cli("gen-data", dir).code, kExitOk);
  ASSERT_EQ(cli("sft", dir).code, kExitOk);
  const auto r = cli("train", dir, {"grpo.steps=0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(dir / "train_log.jsonl"));
  EXPECT_EQ(fs::file_size(dir / "train_log.jsonl"), 0u);
  // The RL checkpoint equals its initialisation.
  const auto sft = load_checkpoint(dir / "checkpoints/sft.json", {});
  const auto rl = load_checkpoint(dir / "checkpoints/rl.json", {});
  EXPECT_EQ(sft.params, rl.params);
}

TEST(Cli, DemoRejectsPromptsOutsideTheGrammar) {
  const auto dir = testing::scratch_dir("cli_demo_bad");
  ASSERT_EQ(cli("gen-data", dir).code, kExitOk);
  ASSERT_EQ(cli("sft", dir).code, kExitOk);
  const auto ckpt = (dir / "checkpoints/sft.json").string();
  EXPECT_EQ(cli("demo", dir, {"--checkpoint", ckpt, "--prompt", "dog dog dog"}).code,
            kExitPrecondition);
  EXPECT_EQ(cli("demo", dir, {"--checkpoint", ckpt, "--prompt", "a photo of a unicorn"}).code,
            kExitPrecondition);
}

TEST(Cli, FullPipelineIsByteDeterministic) {
  const auto a = testing::scratch_dir("cli_det_a");
  const auto b = testing::scratch_dir("cli_det_b");
  run_pipeline(a);
  run_pipeline(b);
  const auto sa = snapshot(a);
  const auto sb = snapshot(b);
  for (const char* f : {"config.json", "data/dataset.jsonl", "data/sft_traces.jsonl",
                        "checkpoints/sft.json", "checkpoints/rl.json",
                        "checkpoints/rl_step_2.json", "sft_log.jsonl", "train_log.jsonl",
                        "reports/eval_pass_through.json", "reports/eval_sft.json",
                        "reports/eval_rl.json", "reports/compare.json", "reports/variance.json",
                        "reports/demo.json"}) {
    EXPECT_TRUE(sa.count(f)) << f;
  }
  ASSERT_EQ(sa.size(), sb.size());
  for (const auto& [name, content] : sa) {
    ASSERT_TRUE(sb.count(name)) << name;
    // The echoed config names its own output directory.
    if (name == "config.json") continue;
    EXPECT_EQ(content, sb.at(name)) << name << " differs";
  }
  auto ca = Json::parse(sa.at("config.json"));
  auto cb = Json::parse(sb.at("config.json"));
  ca.erase("out");
  cb.erase("out");
  EXPECT_EQ(ca, cb);
  EXPECT_EQ(parse_lines(sa.at("train_log.jsonl"), "log").size(), 3u);
}

TEST(Cli, EchoedConfigReproducesTheRun) {
  const auto dir = testing::scratch_dir("cli_echo");
  ASSERT_EQ(cli("gen-data", dir).code, kExitOk);
  const auto again = testing::scratch_dir("cli_echo_again");
  const auto r = cli({"gen-data", "--config", (dir / "config.json").string(), "--out", again.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_file(dir / "data/dataset.jsonl"), read_file(again / "data/dataset.jsonl"));
}

TEST(Cli, DemoWritesAStructuredReport) {
  const auto dir = testing::scratch_dir("cli_demo");
  run_pipeline(dir);
  const auto j = Json::parse(read_file(dir / "reports/demo.json"));
  for (const char* k : {"user_prompt", "spec", "output", "reasoning", "enhanced_prompt",
                        "well_formed", "scene", "reward"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j.at("user_prompt"), kDefaultDemoPrompt);
  const auto r = cli("demo", dir);
  EXPECT_NE(r.out.find(kDefaultDemoPrompt), std::string::npos) << r.out;
}

}  // namespace
}  // namespace reprompt
