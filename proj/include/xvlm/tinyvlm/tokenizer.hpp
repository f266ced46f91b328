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

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xvlm::vlm {

// Reserved IDs. They occupy the bottom of every vocabulary.
enum SpecialToken : int {
  kPad = 0,
  kBos = 1,
  kEos = 2,
  kImg = 3,
  kThinkOpen = 4,
  kThinkClose = 5,
  kAnswerOpen = 6,
  kAnswerClose = 7,
  kUnk = 8,
  kNumSpecial = 9,
};

// Structural IDs that decoding never emits.
inline bool decodable(int id) { return id != kPad && id != kBos && id != kImg; }

// Closed-vocabulary tokenizer: special tags, every printable ASCII character
// plus newline (so any ASCII text round-trips), and whole-word pieces for the
// words the corpus generators emit. Encoding is greedy longest match.
class Tokenizer {
 public:
  Tokenizer();

  std::vector<int> encode(std::string_view text) const;
  std::string decode(const std::vector<int>& ids) const;
  std::string_view piece(int id) const { return pieces_.at(id); }

  int size() const { return static_cast<int>(pieces_.size()); }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> lookup_;
  size_t max_piece_len_ = 1;
};

// Shared instance; the vocabulary is fixed at compile time.
const Tokenizer& default_tokenizer();

// A token sequence with at most one contiguous run of kImg placeholders.
struct TokenSequence {
  std::vector<int> ids;

  // First index of the IMG run and its length (0 when absent).
  int image_begin() const;
  int image_count() const;
};

}  // namespace xvlm::vlm
