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

#ifndef REPROMPT_VOCABULARY_HPP_
#define REPROMPT_VOCABULARY_HPP_

#include <array>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reprompt/errors.hpp"

namespace reprompt {

struct TokenId {
  std::uint16_t value = 0;
  friend constexpr auto operator<=>(TokenId, TokenId) = default;
};

using TokenSeq = std::vector<TokenId>;

enum class TokenClass : std::uint8_t {
  kObject,
  kColor,
  kNumeral,
  kRelation,
  kLayout,
  kStructure,
  kDetail,
  kPunctuation,
};

enum class Relation : std::uint8_t { kLeftOf, kRightOf, kAbove, kBelow };
inline constexpr int kNumRelations = 4;

struct Token {
  TokenId id;
  std::string_view surface;
  TokenClass cls;
};

// Where a layout token moves the object it follows. A negative row or column
// leaves that coordinate at its default value.
struct LayoutTarget {
  int row = -1;
  int col = -1;
};

namespace detail {

struct TokenDef {
  std::string_view surface;
  TokenClass cls;
};

// Order is part of the on-disk format (checkpoints store tables indexed by
// token id, datasets store token ids). Append only.
inline constexpr std::array<TokenDef, 51> kTokenDefs{{
    {"cat", TokenClass::kObject},
    {"dog", TokenClass::kObject},
    {"cow", TokenClass::kObject},
    {"cube", TokenClass::kObject},
    {"ball", TokenClass::kObject},
    {"car", TokenClass::kObject},
    {"bird", TokenClass::kObject},
    {"cup", TokenClass::kObject},
    {"red", TokenClass::kColor},
    {"blue", TokenClass::kColor},
    {"green", TokenClass::kColor},
    {"yellow", TokenClass::kColor},
    {"black", TokenClass::kColor},
    {"white", TokenClass::kColor},
    {"one", TokenClass::kNumeral},
    {"two", TokenClass::kNumeral},
    {"three", TokenClass::kNumeral},
    {"four", TokenClass::kNumeral},
    {"left-of", TokenClass::kRelation},
    {"right-of", TokenClass::kRelation},
    {"above", TokenClass::kRelation},
    {"below", TokenClass::kRelation},
    {"at-top-left", TokenClass::kLayout},
    {"at-top-center", TokenClass::kLayout},
    {"at-top-right", TokenClass::kLayout},
    {"at-middle-left", TokenClass::kLayout},
    {"at-center", TokenClass::kLayout},
    {"at-middle-right", TokenClass::kLayout},
    {"at-bottom-left", TokenClass::kLayout},
    {"at-bottom-center", TokenClass::kLayout},
    {"at-bottom-right", TokenClass::kLayout},
    {"at-left", TokenClass::kLayout},
    {"at-right", TokenClass::kLayout},
    {"at-top", TokenClass::kLayout},
    {"at-bottom", TokenClass::kLayout},
    {"<reason>", TokenClass::kStructure},
    {"</reason>", TokenClass::kStructure},
    {"<prompt>", TokenClass::kStructure},
    {"</prompt>", TokenClass::kStructure},
    {"a", TokenClass::kDetail},
    {"photo", TokenClass::kDetail},
    {"of", TokenClass::kDetail},
    {"and", TokenClass::kDetail},
    {"in", TokenClass::kDetail},
    {"bright", TokenClass::kDetail},
    {"detailed", TokenClass::kDetail},
    {"realistic", TokenClass::kDetail},
    {"sharp", TokenClass::kDetail},
    {"vivid", TokenClass::kDetail},
    {",", TokenClass::kPunctuation},
    {"<end>", TokenClass::kPunctuation},
}};

inline constexpr std::uint16_t kFirstObject = 0;
inline constexpr std::uint16_t kFirstColor = 8;
inline constexpr std::uint16_t kFirstNumeral = 14;
inline constexpr std::uint16_t kFirstRelation = 18;
inline constexpr std::uint16_t kFirstLayout = 22;
inline constexpr std::uint16_t kFirstGridCell = 22;
inline constexpr std::uint16_t kFirstEdgeLayout = 31;
inline constexpr std::uint16_t kFirstStructure = 35;
inline constexpr std::uint16_t kComma = 49;
inline constexpr std::uint16_t kEnd = 50;

static_assert(kTokenDefs[kFirstStructure].surface == "<reason>");
static_assert(kTokenDefs[kFirstStructure + 3].surface == "</prompt>");
static_assert(kTokenDefs[kComma].surface == ",");
static_assert(kTokenDefs[kEnd].surface == "<end>");
static_assert(kTokenDefs[kFirstEdgeLayout].surface == "at-left");
}  // namespace detail

inline constexpr int kNumObjects = 8;
inline constexpr int kNumColors = 6;
inline constexpr int kMaxCount = 4;
inline constexpr std::size_t kMaxVocabulary = 64;

// The fixed toy vocabulary. Cheap to copy; all state is static.
class Vocabulary {
 public:
  std::size_t size() const { return detail::kTokenDefs.size(); }

  bool contains(TokenId id) const { return id.value < size(); }

  Token token(TokenId id) const {
    check(id);
    const auto& def = detail::kTokenDefs[id.value];
    return {id, def.surface, def.cls};
  }
  std::string_view surface(TokenId id) const { return token(id).surface; }
  TokenClass token_class(TokenId id) const { return token(id).cls; }
  bool is(TokenId id, TokenClass cls) const {
    return contains(id) && detail::kTokenDefs[id.value].cls == cls;
  }

  std::optional<TokenId> find(std::string_view surface) const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (detail::kTokenDefs[i].surface == surface) {
        return TokenId{static_cast<std::uint16_t>(i)};
      }
    }
    return std::nullopt;
  }

  TokenId id(std::string_view surface) const {
    if (auto t = find(surface)) return *t;
    throw PreconditionError("unknown token surface '" + std::string(surface) +
                            "'");
  }

  std::vector<TokenId> members(TokenClass cls) const {
    std::vector<TokenId> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (detail::kTokenDefs[i].cls == cls) {
        out.push_back(TokenId{static_cast<std::uint16_t>(i)});
      }
    }
    return out;
  }

  // Class-relative accessors.
  TokenId object(int k) const { return offset(detail::kFirstObject, k); }
  TokenId color(int k) const { return offset(detail::kFirstColor, k); }
  TokenId numeral(int n) const { return offset(detail::kFirstNumeral, n - 1); }
  TokenId relation(Relation r) const {
    return offset(detail::kFirstRelation, static_cast<int>(r));
  }
  int object_index(TokenId id) const { return rel(id, TokenClass::kObject, detail::kFirstObject); }
  int color_index(TokenId id) const { return rel(id, TokenClass::kColor, detail::kFirstColor); }
  int numeral_value(TokenId id) const {
    return rel(id, TokenClass::kNumeral, detail::kFirstNumeral) + 1;
  }
  Relation relation_of(TokenId id) const {
    return static_cast<Relation>(
        rel(id, TokenClass::kRelation, detail::kFirstRelation));
  }

  LayoutTarget layout_target(TokenId id) const {
    const int k = rel(id, TokenClass::kLayout, detail::kFirstLayout);
    if (k < 9) return {k / 3, k % 3};
    switch (k - 9) {
      case 0: return {-1, 0};  // at-left
      case 1: return {-1, 2};  // at-right
      case 2: return {0, -1};  // at-top
      default: return {2, -1};  // at-bottom
    }
  }

  static constexpr TokenId reason_open() { return {detail::kFirstStructure}; }
  static constexpr TokenId reason_close() { return {detail::kFirstStructure + 1}; }
  static constexpr TokenId prompt_open() { return {detail::kFirstStructure + 2}; }
  static constexpr TokenId prompt_close() { return {detail::kFirstStructure + 3}; }
  static constexpr TokenId comma() { return {detail::kComma}; }
  static constexpr TokenId end() { return {detail::kEnd}; }

  // FNV-1a over surfaces and classes. Stored in checkpoints so that a table
  // is never loaded against a different vocabulary.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](unsigned char c) {
      h ^= c;
      h *= 0x100000001b3ull;
    };
    for (const auto& def : detail::kTokenDefs) {
      for (char c : def.surface) mix(static_cast<unsigned char>(c));
      mix(0);
      mix(static_cast<unsigned char>(def.cls));
    }
    return h;
  }

  std::string content_hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(content_hash()));
    return buf;
  }

  // Splits on single spaces. Empty input gives an empty sequence.
  TokenSeq tokenize(std::string_view text) const {
    TokenSeq out;
    std::size_t pos = 0;
    while (pos < text.size()) {
      while (pos < text.size() && text[pos] == ' ') ++pos;
      if (pos >= text.size()) break;
      std::size_t stop = text.find(' ', pos);
      if (stop == std::string_view::npos) stop = text.size();
      out.push_back(id(text.substr(pos, stop - pos)));
      pos = stop;
    }
    return out;
  }

  std::string detokenize(std::span<const TokenId> tokens) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (!contains(tokens[i])) {
        throw PreconditionError("unknown token id " +
                                std::to_string(tokens[i].value));
      }
      if (i) out += ' ';
      out += detail::kTokenDefs[tokens[i].value].surface;
    }
    return out;
  }

 private:
  void check(TokenId id) const {
    if (!contains(id)) {
      throw PreconditionError("unknown token id " + std::to_string(id.value));
    }
  }
  static TokenId offset(std::uint16_t base, int k) {
    return TokenId{static_cast<std::uint16_t>(base + k)};
  }
  int rel(TokenId id, TokenClass cls, std::uint16_t base) const {
    if (!is(id, cls)) {
      throw PreconditionError("token " + std::to_string(id.value) +
                              " has the wrong class");
    }
    return id.value - base;
  }
};

inline Vocabulary build_vocabulary() { return Vocabulary{}; }

}  // namespace reprompt

#endif  // REPROMPT_VOCABULARY_HPP_
