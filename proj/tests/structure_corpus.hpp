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

#ifndef REPROMPT_TESTS_STRUCTURE_CORPUS_HPP_
#define REPROMPT_TESTS_STRUCTURE_CORPUS_HPP_

#include <string>
#include <vector>

namespace reprompt::testing {

// n copies of w, space separated.
inline std::string words(int n, const char* w = "cat") {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + std::string(w);
  return s;
}

// <reason> reason </reason> <prompt> prompt </prompt>, optionally closed by <end>.
inline std::string wrap(const std::string& reason, const std::string& prompt, bool end = false) {
  std::string s = "<reason>";
  if (!reason.empty()) s += " " + reason;
  s += " </reason> <prompt>";
  if (!prompt.empty()) s += " " + prompt;
  s += " </prompt>";
  if (end) s += " <end>";
  return s;
}

struct StructureCase {
  std::string output;
  double r_struc;
  double r_len;
};

// Expected values written from the rules alone: +1 iff the exact grammar
// matches; +1 iff 15 <= |P'| <= 77, with |P'| = 0 for malformed outputs.
inline const std::vector<StructureCase>& corpus() {
  static const std::vector<StructureCase> cases = {
      {"", -1, -1},
      {wrap("", ""), +1, -1},
      {wrap("cat", words(14)), +1, -1},
      {wrap("cat", words(15)), +1, +1},
      {wrap("cat", words(16)), +1, +1},
      {wrap("cat", words(76)), +1, +1},
      {wrap("cat", words(77)), +1, +1},
      {wrap("cat", words(78)), +1, -1},
      {wrap("cat", words(15), true), +1, +1},
      {wrap("", words(40, "bright")), +1, +1},
      {"<reason> cat <prompt> " + words(20) + " </prompt>", -1, -1},
      {"<prompt> " + words(20) + " </prompt>", -1, -1},
      {wrap("cat", words(20)) + " cat", -1, -1},
      {"cat " + wrap("cat", words(20)), -1, -1},
      {wrap("cat", words(20)) + " <end> <end>", -1, -1},
      {"<reason> cat </reason> <prompt> " + words(20) + " <reason> </prompt>", -1, -1},
      {"<reason> cat </reason> cat <prompt> " + words(20) + " </prompt>", -1, -1},
      {"<reason> cat <end> </reason> <prompt> " + words(20) + " </prompt>", -1, -1},
      {wrap("cat", words(20)) + " " + wrap("cat", words(20)), -1, -1},
      {"<reason> cat </reason> <prompt> " + words(20), -1, -1},
  };
  return cases;
}

}  // namespace reprompt::testing

#endif  // REPROMPT_TESTS_STRUCTURE_CORPUS_HPP_
