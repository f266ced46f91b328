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

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xvlm/synthcorpus/sample.hpp"

namespace xvlm::corpus {

// One JSON object per sample; images are referenced by relative path.
nlohmann::json sample_to_json(const Sample& sample, const std::vector<std::string>& image_paths);
Sample sample_from_json(const nlohmann::json& j, const std::vector<Image>& images);

// PNG (8-bit RGB) encode/decode. Pixel values are quantized to k/255.
std::string encode_png(const Image& image);
Image decode_png(const std::string& bytes);

// Writes <dir>/<name>.jsonl and PNG sidecars under <dir>/<name>/.
// Returns the JSONL path.
std::filesystem::path write_corpus(const std::filesystem::path& dir, const std::string& name,
                                   const std::vector<Sample>& samples);
std::vector<Sample> read_corpus(const std::filesystem::path& jsonl);

// SHA-256 over the JSONL bytes and every sidecar, in line order.
std::string corpus_digest(const std::filesystem::path& jsonl);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace xvlm::corpus
