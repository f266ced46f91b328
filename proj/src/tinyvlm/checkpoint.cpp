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

#include "xvlm/tinyvlm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xvlm/common.hpp"

namespace xvlm::vlm {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'X', 'V', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_array(std::string& out, const std::string& name, const Mat& m) {
  put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.append(reinterpret_cast<const char*>(m.data()), static_cast<size_t>(m.size()) * sizeof(double));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArgumentError("checkpoint truncated");
  }

  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  const std::string header = nlohmann::json{{"model_config", c.config}, {"meta", c.meta}}.dump();
  put<std::uint64_t>(out, header.size());
  out += header;
  const auto named = c.params.named();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size() + c.extras.size()));
  for (const auto& [name, m] : named) put_array(out, name, *m);
  for (const auto& [name, m] : c.extras) put_array(out, name, m);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    throw ArgumentError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw ArgumentError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = r.get<std::uint64_t>();
  const auto header = nlohmann::json::parse(r.take(header_len));

  Checkpoint c;
  c.config = header.at("model_config").get<ModelConfig>();
  c.config.validate();
  c.meta = header.value("meta", nlohmann::json::object());
  c.params = Parameters::zeros(c.config);

  const auto count = r.get<std::uint32_t>();
  auto named = c.params.named();
  if (count < named.size()) throw ArgumentError("checkpoint holds too few arrays");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint16_t>();
    std::string name(r.take(name_len));
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    auto raw = r.take(rows * cols * sizeof(double));
    std::memcpy(m.data(), raw.data(), raw.size());
    if (i < named.size()) {
      auto& [expected, target] = named[i];
      if (name != expected || target->rows() != m.rows() || target->cols() != m.cols())
        throw ArgumentError("checkpoint array '" + name + "' does not match model layout (expected '" +
                            expected + "')");
      *target = std::move(m);
    } else {
      c.extras.emplace_back(std::move(name), std::move(m));
    }
  }
  if (!r.done()) throw ArgumentError("trailing bytes after checkpoint arrays");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

std::string params_digest(const Parameters& params) {
  std::string bytes;
  for (const auto& [name, m] : params.named()) put_array(bytes, name, *m);
  return sha256_hex(bytes);
}

}  // namespace xvlm::vlm
