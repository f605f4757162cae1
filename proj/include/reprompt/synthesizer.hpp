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

#ifndef REPROMPT_SYNTHESIZER_HPP_
#define REPROMPT_SYNTHESIZER_HPP_

// A frozen, deterministic stand-in for a text-to-image model.
//
// The synthesizer reads an enhanced prompt left to right and places objects on
// a 3x3 grid. Its rules are an engineered proxy for common backbone failures:
//
//   * every object noun creates one object;
//   * a numeral creates at most two copies of the noun it precedes, while
//     repeated mentions ("cat , cat , cat") create one object each;
//   * a color binds to the first noun within the next two tokens, otherwise
//     it is dropped;
//   * relation words are ignored; objects fill cells in row-major mention
//     order, wrapping (and colliding) after nine;
//   * layout tokens right after a noun move the objects of that mention;
//   * distinct detail tokens raise detail_level, capped at five.
//
// Layout tokens are transparent to the binding windows, so deleting them never
// changes which objects exist, only where they sit.

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reprompt/errors.hpp"
#include "reprompt/vocabulary.hpp"

namespace reprompt {

inline constexpr int kGridSize = 3;
inline constexpr int kGridCells = kGridSize * kGridSize;
inline constexpr int kMaxDetailLevel = 5;
inline constexpr int kMaxNumeralCopies = 2;
inline constexpr int kBindingWindow = 2;

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(Cell, Cell) = default;
};

struct SceneObject {
  int cls = 0;
  std::optional<int> color;
  Cell cell;
  friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct Scene {
  std::vector<SceneObject> objects;
  int detail_level = 0;
  friend bool operator==(const Scene&, const Scene&) = default;

  int count_class(int cls) const {
    return static_cast<int>(std::count_if(
        objects.begin(), objects.end(),
        [cls](const SceneObject& o) { return o.cls == cls; }));
  }
  const SceneObject* first_of(int cls) const {
    for (const auto& o : objects) {
      if (o.cls == cls) return &o;
    }
    return nullptr;
  }
  // Number of unordered object pairs that share a cell.
  int collisions() const {
    int n = 0;
    for (std::size_t i = 0; i < objects.size(); ++i)
      for (std::size_t j = i + 1; j < objects.size(); ++j)
        if (objects[i].cell == objects[j].cell) ++n;
    return n;
  }
};

inline Cell default_cell(int mention_index) {
  const int k = mention_index % kGridCells;
  return {k / kGridSize, k % kGridSize};
}

// Throws PreconditionError if a structure token leaks into the prompt.
inline Scene synthesize(std::span<const TokenId> prompt) {
  const Vocabulary v;
  Scene scene;
  std::array<bool, 64> seen_detail{};
  int distinct_detail = 0;

  // Positions are counted over non-layout tokens only.
  int pos = 0;
  std::optional<std::pair<int, int>> pending_color;    // (color, position)
  std::optional<std::pair<int, int>> pending_numeral;  // (value, position)
  // Objects [mention_lo, mention_hi) were created by the most recent noun,
  // while only layout tokens have followed it; empty otherwise.
  std::size_t mention_lo = 0;
  std::size_t mention_hi = 0;
  int cursor = 0;

  for (TokenId t : prompt) {
    const TokenClass cls = v.token_class(t);
    if (cls == TokenClass::kStructure) {
      throw PreconditionError(
          "structure token '" + std::string(v.surface(t)) +
          "' inside the prompt segment");
    }
    if (cls == TokenClass::kLayout) {
      const LayoutTarget target = v.layout_target(t);
      for (auto i = mention_lo; i < mention_hi; ++i) {
        if (target.row >= 0) scene.objects[i].cell.row = target.row;
        if (target.col >= 0) scene.objects[i].cell.col = target.col;
      }
      continue;
    }
    mention_lo = mention_hi = 0;
    switch (cls) {
      case TokenClass::kObject: {
        int copies = 1;
        if (pending_numeral && pos - pending_numeral->second <= kBindingWindow) {
          copies = std::min(pending_numeral->first, kMaxNumeralCopies);
        }
        std::optional<int> color;
        if (pending_color && pos - pending_color->second <= kBindingWindow) {
          color = pending_color->first;
        }
        pending_numeral.reset();
        pending_color.reset();
        const std::size_t first = scene.objects.size();
        for (int c = 0; c < copies; ++c) {
          scene.objects.push_back({v.object_index(t), color, default_cell(cursor++)});
        }
        mention_lo = first;
        mention_hi = scene.objects.size();
        break;
      }
      case TokenClass::kColor:
        pending_color = {v.color_index(t), pos};
        break;
      case TokenClass::kNumeral:
        pending_numeral = {v.numeral_value(t), pos};
        break;
      case TokenClass::kDetail:
        if (!seen_detail[t.value]) {
          seen_detail[t.value] = true;
          ++distinct_detail;
        }
        break;
      default:
        break;  // relations, punctuation and <end> have no effect
    }
    ++pos;
  }
  scene.detail_level = std::min(distinct_detail, kMaxDetailLevel);
  return scene;
}

}  // namespace reprompt

#endif  // REPROMPT_SYNTHESIZER_HPP_
