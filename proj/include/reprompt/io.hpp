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

#ifndef REPROMPT_IO_HPP_
#define REPROMPT_IO_HPP_

// On-disk formats: JSONL datasets and logs, JSON checkpoints and reports,
// plain-text summary tables.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "reprompt/errors.hpp"
#include "reprompt/eval.hpp"
#include "reprompt/grammar.hpp"
#include "reprompt/grpo.hpp"
#include "reprompt/policy.hpp"
#include "reprompt/rewards.hpp"
#include "reprompt/sft.hpp"
#include "reprompt/synthesizer.hpp"
#include "reprompt/variance.hpp"

namespace reprompt {

using Json = nlohmann::json;

inline constexpr int kCheckpointSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write to a sibling temporary, then rename over the target. Readers never
// see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline std::string dump_lines(const std::vector<Json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw PreconditionError("malformed JSON in " + what + ": " + e.what());
  }
}

inline std::vector<Json> parse_lines(const std::string& text, const std::string& what) {
  std::vector<Json> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    out.push_back(parse_json(line, what + " line " + std::to_string(n)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokens, specs, prompts

inline Json tokens_to_json(std::span<const TokenId> tokens) {
  Json a = Json::array();
  for (TokenId t : tokens) a.push_back(t.value);
  return a;
}

inline TokenSeq tokens_from_json(const Json& j) {
  const Vocabulary v;
  TokenSeq out;
  for (const auto& x : j) {
    const auto id = x.get<int>();
    if (id < 0 || !v.contains(TokenId{static_cast<std::uint16_t>(id)})) {
      throw PreconditionError("token id " + std::to_string(id) + " is not in the vocabulary");
    }
    out.push_back(TokenId{static_cast<std::uint16_t>(id)});
  }
  return out;
}

inline Json spec_to_json(const PromptSpec& s) {
  const Vocabulary v;
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    Json jo{{"class", std::string(v.surface(v.object(o.cls)))}};
    jo["color"] = o.color ? Json(std::string(v.surface(v.color(*o.color)))) : Json(nullptr);
    objs.push_back(std::move(jo));
  }
  Json j{{"id", s.id}, {"category", std::string(category_name(s.category))}, {"objects", objs}};
  j["count"] = s.count ? Json(*s.count) : Json(nullptr);
  j["relation"] = s.relation ? Json(std::string(relation_name(*s.relation))) : Json(nullptr);
  return j;
}

inline PromptSpec spec_from_json(const Json& j) {
  const Vocabulary v;
  try {
    PromptSpec s;
    s.id = j.at("id").get<std::int64_t>();
    s.category = parse_category(j.at("category").get<std::string>());
    for (const auto& jo : j.at("objects")) {
      ObjectSlot o;
      o.cls = v.object_index(v.id(jo.at("class").get<std::string>()));
      if (!jo.at("color").is_null()) o.color = v.color_index(v.id(jo.at("color").get<std::string>()));
      s.objects.push_back(o);
    }
    if (!j.at("count").is_null()) s.count = j.at("count").get<int>();
    if (!j.at("relation").is_null()) s.relation = v.relation_of(v.id(j.at("relation").get<std::string>()));
    validate(s);
    return s;
  } catch (const Json::exception& e) {
    throw PreconditionError(std::string("malformed prompt record: ") + e.what());
  }
}

inline std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "eval"; }
inline std::string_view stage_name(Stage s) { return s == Stage::kSft ? "sft" : "rl"; }

inline Json prompt_record(const UserPrompt& p, Split split, std::optional<Stage> stage) {
  Json j = spec_to_json(p.spec);
  j["user_prompt"] = tokens_to_json(p.tokens);
  j["text"] = Vocabulary{}.detokenize(p.tokens);
  j["split"] = std::string(split_name(split));
  j["stage"] = stage ? Json(std::string(stage_name(*stage))) : Json(nullptr);
  return j;
}

inline UserPrompt prompt_from_record(const Json& j) {
  UserPrompt p{spec_from_json(j), tokens_from_json(j.at("user_prompt"))};
  if (p.tokens != render_user_prompt(p.spec)) {
    throw PreconditionError("record " + std::to_string(p.spec.id) +
                            ": user_prompt does not match its spec");
  }
  return p;
}

inline std::string dataset_jsonl(const Dataset& ds) {
  std::vector<Json> lines;
  for (const auto& p : ds.sft) lines.push_back(prompt_record(p, Split::kTrain, Stage::kSft));
  for (const auto& p : ds.rl) lines.push_back(prompt_record(p, Split::kTrain, Stage::kRl));
  for (const auto& p : ds.eval) lines.push_back(prompt_record(p, Split::kEval, std::nullopt));
  return dump_lines(lines);
}

inline Dataset dataset_from_jsonl(const std::string& text) {
  Dataset ds;
  for (const auto& j : parse_lines(text, "dataset")) {
    auto p = prompt_from_record(j);
    const auto split = j.at("split").get<std::string>();
    if (split == "eval") {
      ds.eval.push_back(std::move(p));
    } else if (split == "train" && j.at("stage") == "sft") {
      ds.sft.push_back(std::move(p));
    } else if (split == "train" && j.at("stage") == "rl") {
      ds.rl.push_back(std::move(p));
    } else {
      throw PreconditionError("record " + std::to_string(p.spec.id) + " has an unknown split");
    }
  }
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return dataset_from_jsonl(read_file(path));
}

inline std::string traces_jsonl(const std::vector<UserPrompt>& prompts,
                                const std::vector<OracleTrace>& traces) {
  if (prompts.size() != traces.size()) throw PreconditionError("one trace per prompt expected");
  std::vector<Json> lines;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Json j = prompt_record(prompts[i], Split::kTrain, Stage::kSft);
    j["target_tokens"] = tokens_to_json(traces[i].target_tokens);
    lines.push_back(std::move(j));
  }
  return dump_lines(lines);
}

inline std::vector<OracleTrace> traces_from_jsonl(const std::string& text) {
  std::vector<OracleTrace> out;
  for (const auto& j : parse_lines(text, "traces")) {
    OracleTrace t{spec_from_json(j), tokens_from_json(j.at("target_tokens"))};
    if (!parse_structured_output(t.target_tokens).well_formed) {
      throw PreconditionError("trace " + std::to_string(t.spec.id) + " is not well-formed");
    }
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline Json moments_to_json(const RunningMoments& m) {
  return {{"count", m.count}, {"mean", m.mean}, {"m2", m.m2}};
}

inline RunningMoments moments_from_json(const Json& j) {
  RunningMoments m;
  m.count = j.at("count").get<std::int64_t>();
  m.mean = j.at("mean").get<double>();
  m.m2 = j.at("m2").get<double>();
  if (m.count < 0 || m.m2 < 0) throw PreconditionError("invalid normalizer moments");
  return m;
}

inline Json normalizer_to_json(const RewardNormalizer& n) {
  return {{"vis", moments_to_json(n.moments(RewardComponent::kVis))},
          {"struc", moments_to_json(n.moments(RewardComponent::kStruc))},
          {"len", moments_to_json(n.moments(RewardComponent::kLen))}};
}

inline RewardNormalizer normalizer_from_json(const Json& j, const RewardConfig& cfg) {
  RewardNormalizer n(cfg);
  n.moments(RewardComponent::kVis) = moments_from_json(j.at("vis"));
  n.moments(RewardComponent::kStruc) = moments_from_json(j.at("struc"));
  n.moments(RewardComponent::kLen) = moments_from_json(j.at("len"));
  return n;
}

struct Checkpoint {
  PolicyParams params;
  std::string stage;  // "init", "sft" or "rl"
  int step = 0;
  std::uint64_t seed = 0;
  // Present on RL checkpoints: the run's normalizer at save time.
  std::optional<RewardNormalizer> normalizer;
};

inline Json checkpoint_to_json(const Checkpoint& c) {
  Json tables = Json::object();
  for (int f = 0; f < kNumFeatures; ++f) {
    const auto& spec = kFeatureSpecs[f];
    Json rows = Json::array();
    for (int r = 0; r < spec.rows; ++r) {
      const double* row = c.params.row(FeatureRef{static_cast<std::uint8_t>(f),
                                                  static_cast<std::uint16_t>(r)});
      rows.push_back(Json(std::vector<double>(row, row + kVocabSize)));
    }
    tables[std::string(spec.name)] = std::move(rows);
  }
  Json meta{{"stage", c.stage}, {"step", c.step}, {"seed", c.seed}};
  meta["normalizer"] = c.normalizer ? normalizer_to_json(*c.normalizer) : Json(nullptr);
  return {{"schema_version", kCheckpointSchemaVersion},
          {"vocab_hash", Vocabulary{}.content_hash_hex()},
          {"tables", std::move(tables)},
          {"metadata", std::move(meta)}};
}

inline Checkpoint checkpoint_from_json(const Json& j, const RewardConfig& cfg) {
  try {
    if (j.at("schema_version").get<int>() != kCheckpointSchemaVersion) {
      throw PreconditionError("unsupported checkpoint schema_version");
    }
    if (j.at("vocab_hash").get<std::string>() != Vocabulary{}.content_hash_hex()) {
      throw PreconditionError("checkpoint was written for a different vocabulary");
    }
    Checkpoint c;
    c.params = PolicyParams::zeros();
    const auto& tables = j.at("tables");
    if (tables.size() != kFeatureSpecs.size()) {
      throw PreconditionError("checkpoint has the wrong number of tables");
    }
    for (int f = 0; f < kNumFeatures; ++f) {
      const auto& spec = kFeatureSpecs[f];
      const auto& rows = tables.at(std::string(spec.name));
      if (static_cast<int>(rows.size()) != spec.rows) {
        throw PreconditionError("table '" + std::string(spec.name) + "' has the wrong shape");
      }
      for (int r = 0; r < spec.rows; ++r) {
        const auto& jr = rows[r];
        if (static_cast<int>(jr.size()) != kVocabSize) {
          throw PreconditionError("table '" + std::string(spec.name) + "' has the wrong shape");
        }
        double* row = c.params.row(FeatureRef{static_cast<std::uint8_t>(f),
                                              static_cast<std::uint16_t>(r)});
        for (int k = 0; k < kVocabSize; ++k) row[k] = jr[k].get<double>();
      }
    }
    if (!c.params.all_finite()) throw PreconditionError("checkpoint holds non-finite weights");
    const auto& meta = j.at("metadata");
    c.stage = meta.at("stage").get<std::string>();
    c.step = meta.at("step").get<int>();
    c.seed = meta.at("seed").get<std::uint64_t>();
    if (!meta.at("normalizer").is_null()) {
      c.normalizer = normalizer_from_json(meta.at("normalizer"), cfg);
    }
    return c;
  } catch (const Json::exception& e) {
    throw PreconditionError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file_atomic(path, dump(checkpoint_to_json(c)));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path, const RewardConfig& cfg) {
  if (!std::filesystem::exists(path)) {
    throw MissingInputError("checkpoint '" + path.string() + "' does not exist");
  }
  return checkpoint_from_json(parse_json(read_file(path), path.string()), cfg);
}

// ---------------------------------------------------------------------------
// Scenes, rewards, logs

inline Json scene_to_json(const Scene& s) {
  const Vocabulary v;
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    Json jo{{"class", std::string(v.surface(v.object(o.cls)))},
            {"cell", Json::array({o.cell.row, o.cell.col})}};
    jo["color"] = o.color ? Json(std::string(v.surface(v.color(*o.color)))) : Json(nullptr);
    objs.push_back(std::move(jo));
  }
  return {{"objects", objs}, {"detail_level", s.detail_level}, {"collisions", s.collisions()}};
}

// A 3x3 text rendering, one object per line of the legend.
inline std::string scene_to_text(const Scene& s) {
  const Vocabulary v;
  std::array<std::array<std::string, kGridSize>, kGridSize> grid;
  for (const auto& o : s.objects) {
    std::string label(v.surface(v.object(o.cls)));
    if (o.color) label = std::string(v.surface(v.color(*o.color))) + " " + label;
    auto& cell = grid[o.cell.row][o.cell.col];
    cell = cell.empty() ? label : cell + " + " + label;
  }
  std::ostringstream out;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      const auto& cell = grid[r][c];
      out << "[" << std::setw(22) << std::left << (cell.empty() ? "." : cell) << "]";
    }
    out << "\n";
  }
  out << "detail_level " << s.detail_level << ", collisions " << s.collisions() << "\n";
  return out.str();
}

inline Json breakdown_to_json(const RewardBreakdown& b) {
  return {{"r_pref", b.r_pref},         {"r_sem", b.r_sem},         {"r_vis", b.r_vis},
          {"r_struc", b.r_struc},       {"r_len", b.r_len},         {"r_vis_n", b.r_vis_n},
          {"r_struc_n", b.r_struc_n},   {"r_len_n", b.r_len_n},     {"r_total", b.r_total},
          {"well_formed", b.well_formed}, {"prompt_length", b.prompt_length}};
}

// Deterministic fields only; wall time goes to timing_record.
inline Json log_record(const TrainLogRecord& r) {
  return {{"step", r.step},
          {"mean_r_total", r.mean_r_total},
          {"mean_r_vis", r.mean_r_vis},
          {"mean_r_struc", r.mean_r_struc},
          {"mean_r_len", r.mean_r_len},
          {"mean_kl", r.mean_kl},
          {"grad_norm", r.grad_norm},
          {"well_formed", r.well_formed}};
}

inline Json timing_record(const TrainLogRecord& r) {
  return {{"step", r.step}, {"wall_time", r.wall_time}};
}

inline TrainLogRecord log_record_from_json(const Json& j) {
  TrainLogRecord r;
  r.step = j.at("step").get<int>();
  r.mean_r_total = j.at("mean_r_total").get<double>();
  r.mean_r_vis = j.at("mean_r_vis").get<double>();
  r.mean_r_struc = j.at("mean_r_struc").get<double>();
  r.mean_r_len = j.at("mean_r_len").get<double>();
  r.mean_kl = j.at("mean_kl").get<double>();
  r.grad_norm = j.at("grad_norm").get<double>();
  r.well_formed = j.at("well_formed").get<double>();
  return r;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string fixed(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

inline Json eval_report_to_json(const EvalReport& r) {
  Json cats = Json::object();
  for (auto c : kAllCategories) {
    const auto& s = r.categories[static_cast<int>(c)];
    cats[std::string(category_name(c))] = {{"n", s.n},
                                           {"correct", s.correct},
                                           {"accuracy", s.accuracy},
                                           {"mean_semantic", s.mean_semantic}};
  }
  return {{"pathway", r.pathway},   {"categories", cats},
          {"overall", r.overall},   {"seed", r.seed},
          {"eval_set_hash", r.eval_set_hash}, {"malformed", r.malformed}};
}

inline EvalReport eval_report_from_json(const Json& j) {
  try {
    EvalReport r;
    r.pathway = j.at("pathway").get<std::string>();
    for (auto c : kAllCategories) {
      const auto& jc = j.at("categories").at(std::string(category_name(c)));
      auto& s = r.categories[static_cast<int>(c)];
      s.n = jc.at("n").get<int>();
      s.correct = jc.at("correct").get<int>();
      s.accuracy = jc.at("accuracy").get<double>();
      s.mean_semantic = jc.at("mean_semantic").get<double>();
    }
    r.overall = j.at("overall").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.eval_set_hash = j.at("eval_set_hash").get<std::string>();
    r.malformed = j.at("malformed").get<int>();
    return r;
  } catch (const Json::exception& e) {
    throw PreconditionError(std::string("malformed eval report: ") + e.what());
  }
}

inline Json comparison_to_json(const std::vector<ComparisonRow>& rows) {
  Json out = Json::array();
  for (const auto& row : rows) {
    Json delta = Json::object();
    Json rel = Json::object();
    for (auto c : kAllCategories) {
      const auto k = static_cast<int>(c);
      delta[std::string(category_name(c))] = row.delta[k];
      rel[std::string(category_name(c))] = row.relative[k] ? Json(*row.relative[k]) : Json(nullptr);
    }
    Json j{{"baseline", row.baseline}, {"pathway", row.pathway},
           {"delta", delta},          {"relative_percent", rel},
           {"overall_delta", row.overall_delta}};
    j["overall_relative_percent"] =
        row.overall_relative ? Json(*row.overall_relative) : Json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

// Accuracy per pathway and category, then deltas against the first row.
inline std::string comparison_table(const std::vector<EvalReport>& reports,
                                    const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "pathway";
  for (auto c : kAllCategories) out << std::setw(19) << category_name(c);
  out << "overall\n";
  for (const auto& r : reports) {
    out << std::setw(16) << r.pathway;
    for (const auto& s : r.categories) out << std::setw(19) << fixed(s.accuracy);
    out << fixed(r.overall) << "\n";
  }
  for (const auto& row : rows) {
    out << std::setw(16) << ("d " + row.pathway);
    for (int c = 0; c < kNumCategories; ++c) {
      std::string cell = (row.delta[c] >= 0 ? "+" : "") + fixed(row.delta[c]);
      if (row.relative[c]) cell += " (" + fixed(*row.relative[c], 1) + "%)";
      out << std::setw(19) << cell;
    }
    std::string cell = (row.overall_delta >= 0 ? "+" : "") + fixed(row.overall_delta);
    if (row.overall_relative) cell += " (" + fixed(*row.overall_relative, 1) + "%)";
    out << cell << "\n";
  }
  return out.str();
}

inline Json estimate_to_json(const VarianceEstimate& e) {
  return {{"value", e.value}, {"stderr", e.se}};
}

inline Json variance_report_to_json(const VarianceReport& r) {
  return {{"n_outer", r.n_outer},
          {"n_inner", r.n_inner},
          {"batches", r.batches},
          {"mean", r.mean},
          {"total_var", estimate_to_json(r.total)},
          {"within", estimate_to_json(r.within)},
          {"between", estimate_to_json(r.between)},
          {"between_unclamped", r.between_unclamped},
          {"identity_residual", estimate_to_json(r.residual)},
          {"combined_stderr", r.combined_se()},
          {"total_minus_within", estimate_to_json(r.gap)},
          {"eps_acc", r.eps_acc},
          {"delta", r.delta},
          {"implied_N_bare", r.implied_n_bare},
          {"implied_N_reasoning", r.implied_n_reasoning},
          {"identity_holds", r.identity_holds()},
          {"within_le_total", r.within_le_total()}};
}

inline Json reasoning_vs_direct_to_json(const ReasoningVsDirect& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"prompt_id", row.prompt_id},
                    {"category", std::string(category_name(row.category))},
                    {"reasoning", variance_report_to_json(row.reasoning)},
                    {"direct", variance_report_to_json(row.direct)},
                    {"implied_N_reasoning_within", row.implied_n_reasoning_within},
                    {"implied_N_reasoning_total", row.implied_n_reasoning_total},
                    {"implied_N_direct", row.implied_n_direct}});
  }
  return {{"rows", rows},
          {"aggregate",
           {{"prompts", r.rows.size()},
            {"mean_reasoning_within", r.mean_reasoning_within},
            {"mean_reasoning_total", r.mean_reasoning_total},
            {"mean_direct_total", r.mean_direct_total},
            {"within_le_total", r.within_le_total},
            {"identity_holds", r.identity_holds}}}};
}

inline std::string variance_table(const ReasoningVsDirect& r) {
  std::ostringstream out;
  out << std::left << std::setw(8) << "prompt" << std::setw(19) << "category" << std::setw(12)
      << "within" << std::setw(12) << "between" << std::setw(12) << "total" << std::setw(12)
      << "direct" << std::setw(10) << "N_within" << std::setw(10) << "N_total" << "N_direct\n";
  for (const auto& row : r.rows) {
    out << std::setw(8) << row.prompt_id << std::setw(19) << category_name(row.category)
        << std::setw(12) << fixed(row.reasoning.within.value, 4) << std::setw(12)
        << fixed(row.reasoning.between.value, 4) << std::setw(12)
        << fixed(row.reasoning.total.value, 4) << std::setw(12)
        << fixed(row.direct.total.value, 4) << std::setw(10) << row.implied_n_reasoning_within
        << std::setw(10) << row.implied_n_reasoning_total << row.implied_n_direct << "\n";
  }
  out << "mean within " << fixed(r.mean_reasoning_within, 4) << ", mean total "
      << fixed(r.mean_reasoning_total, 4) << ", mean direct total "
      << fixed(r.mean_direct_total, 4) << "\n";
  out << "within <= total + 3se on " << r.within_le_total << "/" << r.rows.size()
      << " prompts; identity within 3se on " << r.identity_holds << "/" << r.rows.size() << "\n";
  return out.str();
}

}  // namespace reprompt

#endif  // REPROMPT_IO_HPP_
