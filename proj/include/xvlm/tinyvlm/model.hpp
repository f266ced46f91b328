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

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xvlm/common.hpp"
#include "xvlm/tinyvlm/config.hpp"
#include "xvlm/tinyvlm/tokenizer.hpp"

namespace xvlm::vlm {

struct Linear {
  Mat w;  // in x out
  Mat b;  // 1 x out
};

struct Norm {
  Mat gain;  // 1 x dim
  Mat bias;  // 1 x dim
};

// Pre-norm transformer block.
struct Block {
  Norm ln1;
  Linear qkv;
  Linear attn_out;
  Norm ln2;
  Linear fc1;
  Linear fc2;
};

// Vision encoder (patch embedding + transformer), two-layer perceptron
// projector, and causal decoder. Gradients and optimizer moments reuse this
// type so they can be walked in lockstep with the weights.
struct Parameters {
  Linear patch_embed;
  Mat vision_pos;
  std::vector<Block> vision_blocks;
  Norm vision_norm;

  Linear proj_in;
  Linear proj_out;

  Mat token_embed;
  Mat pos_embed;
  std::vector<Block> decoder_blocks;
  Norm decoder_norm;
  Mat lm_head;

  static Parameters zeros(const ModelConfig& config);
  // Gaussian init: std 1/sqrt(fan_in) for projection matrices and the output
  // head, init_std for embedding and position tables. Unit gains, zero biases.
  static Parameters init(const ModelConfig& config, std::uint64_t seed);

  // Every array with a stable dotted name, in serialization order.
  std::vector<std::pair<std::string, Mat*>> named();
  std::vector<std::pair<std::string, const Mat*>> named() const;

  size_t count() const;
  bool all_finite() const;
  void set_zero();
  bool operator==(const Parameters& other) const;
};

// P x vision_dim patch features.
Mat encode_image(const ModelConfig& config, const Parameters& params, const Image& image);

// P x decoder_dim tokens in the decoder's embedding space.
Mat project(const Parameters& params, const Mat& visual_tokens);

// Full T x vocab logits.
Mat forward(const ModelConfig& config, const Parameters& params, const TokenSequence& sequence,
            std::span<const Image> images);

// Activations retained for a backward pass over one sequence.
class ForwardTrace {
 public:
  ForwardTrace(const ModelConfig& config, const Parameters& params, const TokenSequence& sequence,
               std::span<const Image> images);
  ~ForwardTrace();
  ForwardTrace(ForwardTrace&&) noexcept;
  ForwardTrace& operator=(ForwardTrace&&) noexcept;

  int length() const;
  // Logits for the given positions only (rows.size() x vocab).
  Mat logits(std::span<const int> rows) const;
  // Accumulates d(loss)/d(params) into grads given d(loss)/d(logits) at rows.
  void backward(std::span<const int> rows, const Mat& dlogits, Parameters& grads) const;

 private:
  struct State;
  std::unique_ptr<State> state_;
};

// One supervised example: the sequence plus the half-open span of target
// token indices. Position t's logits predict token t + 1.
struct TrainExample {
  TokenSequence sequence;
  std::vector<Image> images;
  int target_begin = 0;
  int target_end = 0;
};

struct LossResult {
  double loss = 0.0;
  Parameters grads;
  size_t tokens = 0;
};

// Mean next-token cross-entropy over every target token in the batch.
LossResult loss_and_grads(const ModelConfig& config, const Parameters& params,
                          std::span<const TrainExample> batch);

// Assembles BOS, the IMG run, the prompt, and optionally the target text
// followed by EOS. The returned example's span covers target + EOS.
TrainExample build_example(const ModelConfig& config, const Tokenizer& tokenizer,
                           std::string_view prompt, std::vector<Image> images,
                           std::string_view target);

struct DecodeOptions {
  int max_new = 64;
  double temperature = 0.0;
  std::uint64_t seed = 0;
};

struct Generation {
  std::string text;
  std::vector<int> tokens;     // sampled ids, including a final EOS if emitted
  std::vector<double> logprobs;  // log p(token) under the sampling distribution
};

// Autoregressive decoding with a key/value cache. Temperature 0 is greedy
// (ties resolve to the lowest id).
Generation generate(const ModelConfig& config, const Parameters& params, const Tokenizer& tokenizer,
                    const TokenSequence& prompt, std::span<const Image> images,
                    const DecodeOptions& options);

}  // namespace xvlm::vlm
