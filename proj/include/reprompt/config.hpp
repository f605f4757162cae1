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

#ifndef REPROMPT_CONFIG_HPP_
#define REPROMPT_CONFIG_HPP_

// Run configuration: typed sections, JSON file form, KEY=VALUE overrides.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "reprompt/errors.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/grpo.hpp"
#include "reprompt/io.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/sft.hpp"
#include "reprompt/variance.hpp"

namespace reprompt {

// The config file named on the command line does not exist.
class MissingConfigError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct DataConfig {
  int per_category = 300;
  double split_ratio = 0.8;
  double sft_share = 8.0 / 9.0;
  bool allow_replacement = true;
};

struct PolicyConfig {
  int max_len = kDefaultMaxLen;
};

struct EvalConfig {
  bool include_oracle = false;
};

struct VarianceConfig {
  VarianceOptions options;
  int prompts = 10;
};

// Every field has a default; the defaults are the acceptance configuration.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out = "runs/default";
  DataConfig data;
  RewardConfig rewards;
  PolicyConfig policy;
  SftConfig sft;
  GrpoConfig grpo;
  EvalConfig eval;
  VarianceConfig variance;

  DatasetOptions dataset_options() const {
    DatasetOptions o;
    o.seed = seed;
    for (auto c : kAllCategories) o.per_category[c] = data.per_category;
    o.split_ratio = data.split_ratio;
    o.sft_share = data.sft_share;
    o.allow_replacement = data.allow_replacement;
    return o;
  }

  GrpoConfig grpo_config() const {
    GrpoConfig g = grpo;
    g.seed = seed;
    g.max_len = policy.max_len;
    return g;
  }

  void validate() const {
    if (data.per_category < 1) throw ConfigError("data.per_category must be >= 1");
    if (!(data.split_ratio > 0 && data.split_ratio < 1)) {
      throw ConfigError("data.split_ratio must lie in (0, 1)");
    }
    if (!(data.sft_share > 0 && data.sft_share < 1)) {
      throw ConfigError("data.sft_share must lie in (0, 1)");
    }
    if (policy.max_len < 1) throw ConfigError("policy.max_len must be >= 1");
    if (variance.prompts < 1) throw ConfigError("variance.prompts must be >= 1");
    if (out.empty()) throw ConfigError("out must not be empty");
    rewards.validate();
    sft.validate();
    grpo_config().validate();
    variance.options.validate();
  }
};

inline std::string_view ratio_mode_name(RatioMode m) {
  return m == RatioMode::kSequence ? "sequence" : "per_token";
}

inline RatioMode parse_ratio_mode(const std::string& s) {
  if (s == "sequence") return RatioMode::kSequence;
  if (s == "per_token") return RatioMode::kPerToken;
  throw ConfigError("grpo.ratio_mode must be 'sequence' or 'per_token', got '" + s + "'");
}

inline Json config_to_json(const RunConfig& c) {
  const auto& r = c.rewards;
  const auto& g = c.grpo;
  const auto& v = c.variance.options;
  return {
      {"seed", c.seed},
      {"out", c.out},
      {"data",
       {{"per_category", c.data.per_category},
        {"split_ratio", c.data.split_ratio},
        {"sft_share", c.data.sft_share},
        {"allow_replacement", c.data.allow_replacement}}},
      {"rewards",
       {{"alpha", r.alpha},
        {"gamma", r.gamma},
        {"l_min", r.l_min},
        {"l_max", r.l_max},
        {"warmup", r.warmup},
        {"sigma_floor", r.sigma_floor},
        {"normalize_binary", r.normalize_binary}}},
      {"policy", {{"max_len", c.policy.max_len}}},
      {"sft",
       {{"epochs", c.sft.epochs},
        {"lr", c.sft.lr},
        {"batch_size", c.sft.batch_size},
        {"layout_augment", c.sft.layout_augment}}},
      {"grpo",
       {{"group_size", g.group_size},
        {"clip_eps", g.clip_eps},
        {"kl_coef", g.kl_coef},
        {"lr", g.lr},
        {"steps", g.steps},
        {"prompts_per_step", g.prompts_per_step},
        {"ratio_mode", std::string(ratio_mode_name(g.ratio_mode))},
        {"grad_clip", g.grad_clip},
        {"checkpoint_every", g.checkpoint_every}}},
      {"eval", {{"include_oracle", c.eval.include_oracle}}},
      {"variance",
       {{"prompts", c.variance.prompts},
        {"n_outer", v.n_outer},
        {"n_inner", v.n_inner},
        {"batches", v.batches},
        {"eps_acc", v.eps_acc},
        {"delta", v.delta}}},
  };
}

namespace detail {

// Copies `src` into `dst`, which holds the defaults, rejecting unknown keys
// and values whose type differs from the default's.
inline void merge_checked(Json& dst, const Json& src, const std::string& prefix) {
  if (!src.is_object()) throw ConfigError("'" + prefix + "' must be an object");
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!dst.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    Json& d = dst[it.key()];
    const Json& s = it.value();
    if (d.is_object()) {
      merge_checked(d, s, key);
    } else if (d.is_boolean()) {
      if (!s.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
      d = s;
    } else if (d.is_number_integer() || d.is_number_unsigned()) {
      if (!(s.is_number_integer() || s.is_number_unsigned())) {
        throw ConfigError("'" + key + "' must be an integer");
      }
      d = s;
    } else if (d.is_number()) {
      if (!s.is_number()) throw ConfigError("'" + key + "' must be a number");
      d = s.get<double>();
    } else if (d.is_string()) {
      if (!s.is_string()) throw ConfigError("'" + key + "' must be a string");
      d = s;
    }
  }
}

template <typename T>
T get(const Json& j, const char* section, const char* key) {
  return j.at(section).at(key).get<T>();
}

}  // namespace detail

inline RunConfig config_from_json(const Json& src) {
  Json j = config_to_json(RunConfig{});
  detail::merge_checked(j, src, "");
  RunConfig c;
  try {
    if (j.at("seed").is_number_integer() && j.at("seed").get<std::int64_t>() < 0) {
      throw ConfigError("seed must be >= 0");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
    c.out = j.at("out").get<std::string>();
    c.data.per_category = detail::get<int>(j, "data", "per_category");
    c.data.split_ratio = detail::get<double>(j, "data", "split_ratio");
    c.data.sft_share = detail::get<double>(j, "data", "sft_share");
    c.data.allow_replacement = detail::get<bool>(j, "data", "allow_replacement");
    auto& r = c.rewards;
    r.alpha = detail::get<double>(j, "rewards", "alpha");
    r.gamma = detail::get<double>(j, "rewards", "gamma");
    r.l_min = detail::get<int>(j, "rewards", "l_min");
    r.l_max = detail::get<int>(j, "rewards", "l_max");
    r.warmup = detail::get<std::int64_t>(j, "rewards", "warmup");
    r.sigma_floor = detail::get<double>(j, "rewards", "sigma_floor");
    r.normalize_binary = detail::get<bool>(j, "rewards", "normalize_binary");
    c.policy.max_len = detail::get<int>(j, "policy", "max_len");
    c.sft.epochs = detail::get<int>(j, "sft", "epochs");
    c.sft.lr = detail::get<double>(j, "sft", "lr");
    c.sft.batch_size = detail::get<int>(j, "sft", "batch_size");
    c.sft.layout_augment = detail::get<double>(j, "sft", "layout_augment");
    auto& g = c.grpo;
    g.group_size = detail::get<int>(j, "grpo", "group_size");
    g.clip_eps = detail::get<double>(j, "grpo", "clip_eps");
    g.kl_coef = detail::get<double>(j, "grpo", "kl_coef");
    g.lr = detail::get<double>(j, "grpo", "lr");
    g.steps = detail::get<int>(j, "grpo", "steps");
    g.prompts_per_step = detail::get<int>(j, "grpo", "prompts_per_step");
    g.ratio_mode = parse_ratio_mode(detail::get<std::string>(j, "grpo", "ratio_mode"));
    g.grad_clip = detail::get<double>(j, "grpo", "grad_clip");
    g.checkpoint_every = detail::get<int>(j, "grpo", "checkpoint_every");
    c.eval.include_oracle = detail::get<bool>(j, "eval", "include_oracle");
    c.variance.prompts = detail::get<int>(j, "variance", "prompts");
    auto& v = c.variance.options;
    v.n_outer = detail::get<int>(j, "variance", "n_outer");
    v.n_inner = detail::get<int>(j, "variance", "n_inner");
    v.batches = detail::get<int>(j, "variance", "batches");
    v.eps_acc = detail::get<double>(j, "variance", "eps_acc");
    v.delta = detail::get<double>(j, "variance", "delta");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

// "section.key=value". The value is read as JSON when it parses as JSON and
// as a bare string otherwise, so both grpo.steps=10 and grpo.ratio_mode=sequence
// work.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form KEY=VALUE");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part)) (*node)[part] = Json::object();
    node = &(*node)[part];
    if (!node->is_object()) throw ConfigError("override key '" + key + "' is malformed");
    start = dot + 1;
  }
}

// Defaults, then the file (if any), then overrides in order.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  Json j = Json::object();
  if (!path.empty()) {
    if (!std::filesystem::exists(path)) {
      throw MissingConfigError("config file '" + path + "' does not exist");
    }
    j = Json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold an object");
  }
  for (const auto& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

}  // namespace reprompt

#endif  // REPROMPT_CONFIG_HPP_
