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

#include "xvlm/synthcorpus/corpus_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace xvlm::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArgumentError("write failed: " + path.string());
}

namespace {

void png_error_fn(png_structp, png_const_charp msg) { throw ArgumentError(std::string("png: ") + msg); }
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}

struct ReadCursor {
  const std::string* bytes;
  size_t pos;
};

void png_read_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated image");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

}  // namespace

std::string encode_png(const Image& image) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  std::vector<png_byte> row(static_cast<size_t>(image.width) * 3);
  try {
    png_set_write_fn(png, &out, png_write_fn, nullptr);
    png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 9);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
          row[static_cast<size_t>(x) * 3 + c] = static_cast<png_byte>(std::lround(v * 255.0));
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(const std::string& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw ArgumentError("not a PNG image");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  ReadCursor cur{&bytes, 0};
  Image img;
  try {
    png_set_read_fn(png, &cur, png_read_fn);
    png_read_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int type = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (type != PNG_COLOR_TYPE_RGB || depth != 8) throw ArgumentError("expected 8-bit RGB PNG");
    img = Image(h, w);
    std::vector<png_byte> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
      }
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

json sample_to_json(const Sample& s, const std::vector<std::string>& image_paths) {
  json j = {{"format_version", kFormatVersion},
            {"id", s.id},
            {"corpus", s.corpus},
            {"domain", domain_name(s.domain)},
            {"task_kind", task_kind_name(s.task_kind)},
            {"subtask", s.subtask},
            {"prompt", s.prompt},
            {"images", image_paths},
            {"truth", s.truth},
            {"scene", s.scene},
            {"question", s.question},
            {"cot", s.cot}};
  if (!s.target.empty()) j["target"] = s.target;
  return j;
}

Sample sample_from_json(const json& j, const std::vector<Image>& images) {
  const int version = j.at("format_version").get<int>();
  if (version != kFormatVersion) throw ArgumentError("unsupported corpus format version " + std::to_string(version));
  Sample s;
  s.id = j.at("id").get<std::string>();
  s.corpus = j.at("corpus").get<std::string>();
  s.domain = parse_domain(j.at("domain").get<std::string>());
  s.task_kind = parse_task_kind(j.at("task_kind").get<std::string>());
  s.subtask = j.at("subtask").get<std::string>();
  s.prompt = j.at("prompt").get<std::string>();
  s.images = images;
  s.truth = truth_from_json(j.at("truth"));
  if (task_kind_of(s.truth) != s.task_kind) throw ArgumentError("truth does not match task kind in " + s.id);
  s.scene = j.at("scene").get<Scene>();
  s.question = j.at("question");
  s.cot = j.value("cot", false);
  s.target = j.value("target", std::string());
  return s;
}

fs::path write_corpus(const fs::path& dir, const std::string& name, const std::vector<Sample>& samples) {
  const fs::path jsonl = dir / (name + ".jsonl");
  std::string lines;
  for (const auto& s : samples) {
    std::vector<std::string> paths;
    for (size_t k = 0; k < s.images.size(); ++k) {
      const std::string rel = name + "/" + s.id + "-" + std::to_string(k) + ".png";
      write_file(dir / rel, encode_png(s.images[k]));
      paths.push_back(rel);
    }
    lines += sample_to_json(s, paths).dump() + "\n";
  }
  write_file(jsonl, lines);
  return jsonl;
}

std::vector<Sample> read_corpus(const fs::path& jsonl) {
  const std::string text = read_file(jsonl);
  const fs::path base = jsonl.parent_path();
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ArgumentError(jsonl.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    std::vector<Image> images;
    for (const auto& p : j.at("images")) images.push_back(decode_png(read_file(base / p.get<std::string>())));
    out.push_back(sample_from_json(j, images));
  }
  return out;
}

std::string corpus_digest(const fs::path& jsonl) {
  const std::string text = read_file(jsonl);
  std::string all = text;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (const auto& p : json::parse(line).at("images")) all += read_file(jsonl.parent_path() / p.get<std::string>());
  }
  return sha256_hex(all);
}

}  // namespace xvlm::corpus
