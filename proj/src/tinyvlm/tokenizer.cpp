// Copyright 2026 The xvlm Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xvlm/tinyvlm/tokenizer.hpp"

#include <algorithm>
#include <array>

namespace xvlm::vlm {
namespace {

constexpr std::array<std::string_view, kNumSpecial> kSpecialPieces = {
    "<pad>", "<bos>", "<eos>", "<img>", "<think>", "</think>", "<answer>", "</answer>", "<unk>"};

// Words produced by the corpus generators and reasoning templates. Each is
// registered bare and with a leading space.
constexpr std::string_view kWords[] = {
    // question scaffolding
    "which", "what", "how", "many", "where", "is", "are", "the", "a", "an", "of", "to", "in",
    "on", "at", "and", "then", "will", "do", "does", "should", "there", "it", "its", "all",
    "others", "other", "for", "by", "from", "with", "no", "yes", "not", "none", "only",
    // spatial
    "left", "right", "above", "below", "closest", "nearest", "edge", "image", "free", "space",
    "point", "locate", "object", "objects", "shape", "color", "center", "box", "region",
    "target", "reference", "candidates", "candidate", "count", "ahead", "behind", "within",
    "distance", "side", "x", "y",
    // shapes and colors
    "circle", "circles", "square", "squares", "triangle", "triangles", "star", "stars", "red",
    "green", "blue", "yellow", "purple", "orange", "white",
    // planning
    "goal", "done", "next", "step", "steps", "pick", "place", "stack", "task", "history",
    // driving
    "agent", "agents", "ego", "lane", "lanes", "road", "route", "straight", "turn", "turning",
    "keep", "stop", "reverse", "go", "plan", "speed", "seconds", "trajectory", "waypoints",
    "obstacle", "clear", "heading", "moves", "moved", "motion", "frame", "frames", "first",
    "second", "between", "px", "curvature", "arc", "drift", "lateral", "rate", "intent",
    // reasoning
    "think", "answer", "context", "check", "conclusion", "satisfies", "fails", "matches",
    "option", "options", "so", "eliminate", "select", "least", "most",
};

// Capitalized forms for words that open sentences.
constexpr std::string_view kSentenceStarts[] = {
    "which", "what", "how", "where", "is", "point", "locate", "plan", "route", "goal", "done",
    "next", "speed", "think", "context", "check", "conclusion", "agents", "objects", "reference",
    "options", "count", "target", "region", "box", "step", "ego", "the", "frame", "agent",
    "obstacle", "lane", "no", "heading", "motion", "free", "candidates", "task", "history",
    "select", "so", "eliminate", "stack", "intent",
};

void add_piece(std::vector<std::string>& pieces, std::string piece) {
  if (std::find(pieces.begin(), pieces.end(), piece) == pieces.end()) pieces.push_back(std::move(piece));
}

std::string capitalize(std::string_view w) {
  std::string out(w);
  if (!out.empty() && out[0] >= 'a' && out[0] <= 'z') out[0] = static_cast<char>(out[0] - 'a' + 'A');
  return out;
}

}  // namespace

Tokenizer::Tokenizer() {
  for (auto s : kSpecialPieces) pieces_.emplace_back(s);
  pieces_.emplace_back("\n");
  for (int c = 32; c < 127; ++c) pieces_.emplace_back(1, static_cast<char>(c));
  add_piece(pieces_, ", ");
  add_piece(pieces_, "0.");
  add_piece(pieces_, "1.");
  add_piece(pieces_, ". ");
  add_piece(pieces_, "; ");
  for (auto w : kWords) {
    add_piece(pieces_, std::string(w));
    add_piece(pieces_, " " + std::string(w));
  }
  for (auto w : kSentenceStarts) {
    add_piece(pieces_, capitalize(w));
    add_piece(pieces_, " " + capitalize(w));
  }
  for (int id = 0; id < size(); ++id) {
    lookup_.emplace(pieces_[id], id);
    max_piece_len_ = std::max(max_piece_len_, pieces_[id].size());
  }
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  size_t pos = 0;
  while (pos < text.size()) {
    int best = -1;
    size_t best_len = 0;
    // Only the four response tags are recognized as special text; the other
    // specials never appear in rendered text.
    for (int id : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
      const auto& tag = pieces_[id];
      if (text.compare(pos, tag.size(), tag) == 0 && tag.size() > best_len) {
        best = id;
        best_len = tag.size();
      }
    }
    if (best < 0) {
      for (size_t len = std::min(max_piece_len_, text.size() - pos); len > 0; --len) {
        auto it = lookup_.find(std::string(text.substr(pos, len)));
        if (it != lookup_.end() && it->second >= kNumSpecial) {
          best = it->second;
          best_len = len;
          break;
        }
      }
    }
    if (best < 0) {
      best = kUnk;
      best_len = 1;
    }
    ids.push_back(best);
    pos += best_len;
  }
  return ids;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= size()) continue;
    if (id == kPad || id == kBos || id == kEos || id == kImg) continue;
    if (id == kUnk) {
      out += '?';
      continue;
    }
    out += pieces_[id];
  }
  return out;
}

const Tokenizer& default_tokenizer() {
  static const Tokenizer tokenizer;
  return tokenizer;
}

int TokenSequence::image_begin() const {
  auto it = std::find(ids.begin(), ids.end(), static_cast<int>(kImg));
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}

int TokenSequence::image_count() const {
  return static_cast<int>(std::count(ids.begin(), ids.end(), static_cast<int>(kImg)));
}

}  // namespace xvlm::vlm
