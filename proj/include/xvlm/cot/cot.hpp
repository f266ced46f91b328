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

#include <optional>
#include <string>
#include <vector>

#include "xvlm/rewards/rewards.hpp"
#include "xvlm/synthcorpus/sample.hpp"

namespace xvlm::cot {

using rewards::Stripped;
using rewards::strip_think;

// Ordered short statements; the last one names the answer.
struct ReasoningTrace {
  std::vector<std::string> steps;
};

// Template-filled trace derived from the scene record. Empty for task
// kinds without a trace template (trajectory, freetext).
std::optional<ReasoningTrace> reasoning_trace(const corpus::Sample& sample);

// `<think>steps</think><answer>payload</answer>`
std::string render_target(const ReasoningTrace& trace, std::string_view payload);

// Copy of the sample with the reasoning target attached and `cot` set, or
// nullopt (skip) for unsupported task kinds.
std::optional<corpus::Sample> augment_with_cot(const corpus::Sample& sample);

// Applies augment_with_cot to every supported sample and renames the
// corpus; unsupported samples are dropped.
std::vector<corpus::Sample> build_cot_corpus(const std::vector<corpus::Sample>& samples,
                                             const std::string& corpus_name);

}  // namespace xvlm::cot
