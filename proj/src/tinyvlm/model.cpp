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

#include "xvlm/tinyvlm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

namespace xvlm::vlm {
namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

double gelu(double x) {
  const double u = kGeluScale * (x + kGeluCubic * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double x2 = x * x;
  const double t = std::tanh(kGeluScale * (x + kGeluCubic * x * x2));
  const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * x2);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Linear make_linear(int in, int out) { return {Mat::Zero(in, out), Mat::Zero(1, out)}; }
Norm make_norm(int dim) { return {Mat::Zero(1, dim), Mat::Zero(1, dim)}; }

Block make_block(int dim, int mlp_ratio) {
  return {make_norm(dim),       make_linear(dim, 3 * dim),         make_linear(dim, dim),
          make_norm(dim),       make_linear(dim, mlp_ratio * dim), make_linear(mlp_ratio * dim, dim)};
}

template <class P, class F>
void visit(P& p, F&& f) {
  auto lin = [&](const std::string& n, auto& l) {
    f(n + ".w", l.w);
    f(n + ".b", l.b);
  };
  auto norm = [&](const std::string& n, auto& l) {
    f(n + ".gain", l.gain);
    f(n + ".bias", l.bias);
  };
  auto block = [&](const std::string& n, auto& b) {
    norm(n + ".ln1", b.ln1);
    lin(n + ".qkv", b.qkv);
    lin(n + ".attn_out", b.attn_out);
    norm(n + ".ln2", b.ln2);
    lin(n + ".fc1", b.fc1);
    lin(n + ".fc2", b.fc2);
  };
  lin("vision.patch_embed", p.patch_embed);
  f(std::string("vision.pos"), p.vision_pos);
  for (size_t i = 0; i < p.vision_blocks.size(); ++i)
    block("vision.blocks." + std::to_string(i), p.vision_blocks[i]);
  norm("vision.norm", p.vision_norm);
  lin("projector.in", p.proj_in);
  lin("projector.out", p.proj_out);
  f(std::string("decoder.token_embed"), p.token_embed);
  f(std::string("decoder.pos_embed"), p.pos_embed);
  for (size_t i = 0; i < p.decoder_blocks.size(); ++i)
    block("decoder.blocks." + std::to_string(i), p.decoder_blocks[i]);
  norm("decoder.norm", p.decoder_norm);
  f(std::string("decoder.lm_head"), p.lm_head);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Mat linear(const Mat& x, const Linear& l) {
  Mat y = x * l.w;
  y.rowwise() += l.b.row(0);
  return y;
}

void linear_backward(const Mat& x, const Mat& dy, const Linear& l, Linear& g, Mat* dx) {
  g.w.noalias() += x.transpose() * dy;
  g.b += dy.colwise().sum();
  if (dx != nullptr) dx->noalias() = dy * l.w.transpose();
}

struct NormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

Mat layer_norm(const Mat& x, const Norm& n, NormCache* cache) {
  const Eigen::Index rows = x.rows();
  const double dim = static_cast<double>(x.cols());
  Mat xhat(rows, x.cols());
  Eigen::VectorXd rstd(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() / dim;
    const double var = (x.row(r).array() - mean).square().sum() / dim;
    rstd(r) = 1.0 / std::sqrt(var + kNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * rstd(r);
  }
  Mat y = xhat.array().rowwise() * n.gain.row(0).array();
  y.rowwise() += n.bias.row(0);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

// Returns dx; accumulates gain/bias gradients.
Mat layer_norm_backward(const Mat& dy, const Norm& n, const NormCache& c, Norm& g) {
  g.gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  g.bias += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * n.gain.row(0).array();
  const double dim = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).sum() / dim;
    const double mean_dx = dxhat.row(r).dot(c.xhat.row(r)) / dim;
    dx.row(r) = c.rstd(r) * (dxhat.row(r).array() - mean_d - c.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

void softmax_rows(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct BlockCache {
  NormCache n1;
  NormCache n2;
  Mat h1;
  Mat qkv;
  std::vector<Mat> probs;
  Mat attn;
  Mat h2;
  Mat pre;
  Mat act;
};

Mat block_forward(const Block& b, const Mat& x, int heads, bool causal, BlockCache& c) {
  const int rows = static_cast<int>(x.rows());
  const int dim = static_cast<int>(x.cols());
  const int head_dim = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  c.h1 = layer_norm(x, b.ln1, &c.n1);
  c.qkv = linear(c.h1, b.qkv);
  c.attn.resize(rows, dim);
  c.probs.assign(heads, Mat());
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * head_dim, head_dim);
    const auto k = c.qkv.middleCols(dim + h * head_dim, head_dim);
    const auto v = c.qkv.middleCols(2 * dim + h * head_dim, head_dim);
    Mat s = (q * k.transpose()) * scale;
    if (causal) {
      for (int i = 0; i < rows; ++i)
        for (int j = i + 1; j < rows; ++j) s(i, j) = -std::numeric_limits<double>::infinity();
    }
    softmax_rows(s);
    c.attn.middleCols(h * head_dim, head_dim).noalias() = s * v;
    c.probs[h] = std::move(s);
  }
  Mat mid = x + linear(c.attn, b.attn_out);
  c.h2 = layer_norm(mid, b.ln2, &c.n2);
  c.pre = linear(c.h2, b.fc1);
  c.act = c.pre.unaryExpr(&gelu);
  return mid + linear(c.act, b.fc2);
}

Mat block_backward(const Block& b, const BlockCache& c, const Mat& dout, int heads, Block& g) {
  const int rows = static_cast<int>(dout.rows());
  const int dim = static_cast<int>(dout.cols());
  const int head_dim = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  Mat d_act;
  linear_backward(c.act, dout, b.fc2, g.fc2, &d_act);
  Mat d_pre = d_act.array() * c.pre.unaryExpr(&gelu_grad).array();
  Mat d_h2;
  linear_backward(c.h2, d_pre, b.fc1, g.fc1, &d_h2);
  Mat d_mid = dout + layer_norm_backward(d_h2, b.ln2, c.n2, g.ln2);

  Mat d_attn;
  linear_backward(c.attn, d_mid, b.attn_out, g.attn_out, &d_attn);
  Mat d_qkv(rows, 3 * dim);
  for (int h = 0; h < heads; ++h) {
    const auto q = c.qkv.middleCols(h * head_dim, head_dim);
    const auto k = c.qkv.middleCols(dim + h * head_dim, head_dim);
    const auto v = c.qkv.middleCols(2 * dim + h * head_dim, head_dim);
    const Mat& p = c.probs[h];
    const auto d_o = d_attn.middleCols(h * head_dim, head_dim);
    Mat d_p = d_o * v.transpose();
    d_qkv.middleCols(2 * dim + h * head_dim, head_dim).noalias() = p.transpose() * d_o;
    Eigen::VectorXd row_dot = (d_p.array() * p.array()).rowwise().sum();
    Mat d_s = p.array() * (d_p.array().colwise() - row_dot.array());
    d_s *= scale;
    d_qkv.middleCols(h * head_dim, head_dim).noalias() = d_s * k;
    d_qkv.middleCols(dim + h * head_dim, head_dim).noalias() = d_s.transpose() * q;
  }
  Mat d_h1;
  linear_backward(c.h1, d_qkv, b.qkv, g.qkv, &d_h1);
  return d_mid + layer_norm_backward(d_h1, b.ln1, c.n1, g.ln1);
}

Mat extract_patches(const ModelConfig& config, const Image& image) {
  if (image.height != config.image_size || image.width != config.image_size ||
      image.pixels.size() != static_cast<size_t>(image.height) * image.width * 3) {
    throw ConfigError("image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                      ", model expects " + std::to_string(config.image_size) + "x" +
                      std::to_string(config.image_size) + "x3");
  }
  const int ps = config.patch_size;
  const int side = config.patches_per_side();
  Mat patches(config.visual_tokens(), config.patch_features());
  for (int pr = 0; pr < side; ++pr) {
    for (int pc = 0; pc < side; ++pc) {
      const int row = pr * side + pc;
      for (int y = 0; y < ps; ++y)
        for (int x = 0; x < ps; ++x)
          for (int ch = 0; ch < 3; ++ch)
            patches(row, (y * ps + x) * 3 + ch) = image.at(pr * ps + y, pc * ps + x, ch);
    }
  }
  return patches;
}

struct VisionCache {
  Mat patches;
  std::vector<BlockCache> blocks;
  NormCache norm;
};

Mat vision_forward(const ModelConfig& config, const Parameters& p, const Image& image, VisionCache& c) {
  c.patches = extract_patches(config, image);
  Mat x = linear(c.patches, p.patch_embed) + p.vision_pos;
  c.blocks.resize(p.vision_blocks.size());
  for (size_t i = 0; i < p.vision_blocks.size(); ++i)
    x = block_forward(p.vision_blocks[i], x, config.heads, /*causal=*/false, c.blocks[i]);
  return layer_norm(x, p.vision_norm, &c.norm);
}

void check_sequence(const ModelConfig& config, const TokenSequence& seq, size_t n_images) {
  if (seq.ids.empty()) throw ArgumentError("empty token sequence");
  if (static_cast<int>(seq.ids.size()) > config.max_seq_len) {
    throw LengthError("sequence of " + std::to_string(seq.ids.size()) + " tokens exceeds max_seq_len " +
                      std::to_string(config.max_seq_len));
  }
  for (int id : seq.ids) {
    if (id < 0 || id >= config.vocab_size) throw ArgumentError("token id out of range: " + std::to_string(id));
  }
  const int expected = static_cast<int>(n_images) * config.visual_tokens();
  if (seq.image_count() != expected) {
    throw ArgumentError("IMG region holds " + std::to_string(seq.image_count()) + " tokens, images need " +
                        std::to_string(expected));
  }
  if (expected > 0) {
    const int begin = seq.image_begin();
    for (int i = begin; i < begin + expected; ++i) {
      if (seq.ids[i] != kImg) throw ArgumentError("IMG placeholders must form one contiguous region");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameters

Parameters Parameters::zeros(const ModelConfig& c) {
  Parameters p;
  p.patch_embed = make_linear(c.patch_features(), c.vision_dim);
  p.vision_pos = Mat::Zero(c.visual_tokens(), c.vision_dim);
  for (int i = 0; i < c.vision_layers; ++i) p.vision_blocks.push_back(make_block(c.vision_dim, c.mlp_ratio));
  p.vision_norm = make_norm(c.vision_dim);
  p.proj_in = make_linear(c.vision_dim, c.decoder_dim);
  p.proj_out = make_linear(c.decoder_dim, c.decoder_dim);
  p.token_embed = Mat::Zero(c.vocab_size, c.decoder_dim);
  p.pos_embed = Mat::Zero(c.max_seq_len, c.decoder_dim);
  for (int i = 0; i < c.decoder_layers; ++i) p.decoder_blocks.push_back(make_block(c.decoder_dim, c.mlp_ratio));
  p.decoder_norm = make_norm(c.decoder_dim);
  p.lm_head = Mat::Zero(c.decoder_dim, c.vocab_size);
  return p;
}

Parameters Parameters::init(const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  Parameters p = zeros(c);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, c.init_std);
  std::normal_distribution<double> unit(0.0, 1.0);
  visit(p, [&](const std::string& name, Mat& m) {
    if (ends_with(name, ".gain")) {
      m.setOnes();
    } else if (ends_with(name, ".bias") || ends_with(name, ".b")) {
      m.setZero();
    } else if (ends_with(name, ".w") || name == "decoder.lm_head") {
      const double scale = 1.0 / std::sqrt(static_cast<double>(m.rows()));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unit(rng) * scale;
    } else {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    }
  });
  return p;
}

std::vector<std::pair<std::string, Mat*>> Parameters::named() {
  std::vector<std::pair<std::string, Mat*>> out;
  visit(*this, [&](const std::string& n, Mat& m) { out.emplace_back(n, &m); });
  return out;
}

std::vector<std::pair<std::string, const Mat*>> Parameters::named() const {
  std::vector<std::pair<std::string, const Mat*>> out;
  visit(*this, [&](const std::string& n, const Mat& m) { out.emplace_back(n, &m); });
  return out;
}

size_t Parameters::count() const {
  size_t n = 0;
  for (const auto& [_, m] : named()) n += static_cast<size_t>(m->size());
  return n;
}

bool Parameters::all_finite() const {
  for (const auto& [_, m] : named())
    if (!m->allFinite()) return false;
  return true;
}

void Parameters::set_zero() {
  for (auto& [_, m] : named()) m->setZero();
}

bool Parameters::operator==(const Parameters& other) const {
  auto a = named();
  auto b = other.named();
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].first != b[i].first || a[i].second->rows() != b[i].second->rows() ||
        a[i].second->cols() != b[i].second->cols())
      return false;
    if (!std::equal(a[i].second->data(), a[i].second->data() + a[i].second->size(), b[i].second->data()))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Stateless entry points

Mat encode_image(const ModelConfig& config, const Parameters& params, const Image& image) {
  VisionCache cache;
  return vision_forward(config, params, image, cache);
}

Mat project(const Parameters& params, const Mat& visual_tokens) {
  if (visual_tokens.cols() != params.proj_in.w.rows()) {
    throw ArgumentError("projector expects " + std::to_string(params.proj_in.w.rows()) + " features, got " +
                        std::to_string(visual_tokens.cols()));
  }
  Mat hidden = linear(visual_tokens, params.proj_in).unaryExpr(&gelu);
  return linear(hidden, params.proj_out);
}

Mat forward(const ModelConfig& config, const Parameters& params, const TokenSequence& sequence,
            std::span<const Image> images) {
  ForwardTrace trace(config, params, sequence, images);
  std::vector<int> rows(trace.length());
  for (int i = 0; i < trace.length(); ++i) rows[i] = i;
  return trace.logits(rows);
}

// ---------------------------------------------------------------------------
// ForwardTrace

struct ForwardTrace::State {
  const ModelConfig* config = nullptr;
  const Parameters* params = nullptr;
  std::vector<int> ids;
  std::vector<VisionCache> vision;
  Mat visual;     // (images * P) x vision_dim
  Mat proj_pre;   // pre-activation of the projector hidden layer
  Mat proj_act;
  std::vector<BlockCache> blocks;
  NormCache final_norm;
  Mat hidden;     // T x decoder_dim after the final norm
};

ForwardTrace::ForwardTrace(const ModelConfig& config, const Parameters& params, const TokenSequence& sequence,
                           std::span<const Image> images)
    : state_(std::make_unique<State>()) {
  check_sequence(config, sequence, images.size());
  State& s = *state_;
  s.config = &config;
  s.params = &params;
  s.ids = sequence.ids;

  const int n_vis = config.visual_tokens();
  Mat projected;
  if (!images.empty()) {
    s.vision.resize(images.size());
    s.visual.resize(static_cast<Eigen::Index>(images.size()) * n_vis, config.vision_dim);
    for (size_t i = 0; i < images.size(); ++i)
      s.visual.middleRows(static_cast<Eigen::Index>(i) * n_vis, n_vis) =
          vision_forward(config, params, images[i], s.vision[i]);
    s.proj_pre = linear(s.visual, params.proj_in);
    s.proj_act = s.proj_pre.unaryExpr(&gelu);
    projected = linear(s.proj_act, params.proj_out);
  }

  const int len = static_cast<int>(s.ids.size());
  Mat x(len, config.decoder_dim);
  int visual_row = 0;
  for (int t = 0; t < len; ++t) {
    if (s.ids[t] == kImg) {
      x.row(t) = projected.row(visual_row++);
    } else {
      x.row(t) = params.token_embed.row(s.ids[t]);
    }
  }
  x += params.pos_embed.topRows(len);
  s.blocks.resize(params.decoder_blocks.size());
  for (size_t i = 0; i < params.decoder_blocks.size(); ++i)
    x = block_forward(params.decoder_blocks[i], x, config.heads, /*causal=*/true, s.blocks[i]);
  s.hidden = layer_norm(x, params.decoder_norm, &s.final_norm);
}

ForwardTrace::~ForwardTrace() = default;
ForwardTrace::ForwardTrace(ForwardTrace&&) noexcept = default;
ForwardTrace& ForwardTrace::operator=(ForwardTrace&&) noexcept = default;

int ForwardTrace::length() const { return static_cast<int>(state_->ids.size()); }

Mat ForwardTrace::logits(std::span<const int> rows) const {
  const State& s = *state_;
  Mat selected(static_cast<Eigen::Index>(rows.size()), s.hidden.cols());
  for (size_t i = 0; i < rows.size(); ++i) selected.row(i) = s.hidden.row(rows[i]);
  return selected * s.params->lm_head;
}

void ForwardTrace::backward(std::span<const int> rows, const Mat& dlogits, Parameters& g) const {
  const State& s = *state_;
  const ModelConfig& config = *s.config;
  const Parameters& p = *s.params;
  const int len = length();

  Mat selected(static_cast<Eigen::Index>(rows.size()), s.hidden.cols());
  for (size_t i = 0; i < rows.size(); ++i) selected.row(i) = s.hidden.row(rows[i]);
  g.lm_head.noalias() += selected.transpose() * dlogits;
  Mat d_selected = dlogits * p.lm_head.transpose();
  Mat dx = Mat::Zero(len, config.decoder_dim);
  for (size_t i = 0; i < rows.size(); ++i) dx.row(rows[i]) += d_selected.row(i);

  dx = layer_norm_backward(dx, p.decoder_norm, s.final_norm, g.decoder_norm);
  for (size_t i = p.decoder_blocks.size(); i-- > 0;)
    dx = block_backward(p.decoder_blocks[i], s.blocks[i], dx, config.heads, g.decoder_blocks[i]);

  g.pos_embed.topRows(len) += dx;
  Mat d_projected;
  if (!s.vision.empty()) d_projected = Mat::Zero(s.visual.rows(), config.decoder_dim);
  int visual_row = 0;
  for (int t = 0; t < len; ++t) {
    if (s.ids[t] == kImg) {
      d_projected.row(visual_row++) = dx.row(t);
    } else {
      g.token_embed.row(s.ids[t]) += dx.row(t);
    }
  }
  if (s.vision.empty()) return;

  Mat d_act;
  linear_backward(s.proj_act, d_projected, p.proj_out, g.proj_out, &d_act);
  Mat d_pre = d_act.array() * s.proj_pre.unaryExpr(&gelu_grad).array();
  Mat d_visual;
  linear_backward(s.visual, d_pre, p.proj_in, g.proj_in, &d_visual);

  const int n_vis = config.visual_tokens();
  for (size_t i = 0; i < s.vision.size(); ++i) {
    const VisionCache& vc = s.vision[i];
    Mat dv = layer_norm_backward(d_visual.middleRows(static_cast<Eigen::Index>(i) * n_vis, n_vis),
                                 p.vision_norm, vc.norm, g.vision_norm);
    for (size_t b = p.vision_blocks.size(); b-- > 0;)
      dv = block_backward(p.vision_blocks[b], vc.blocks[b], dv, config.heads, g.vision_blocks[b]);
    g.vision_pos += dv;
    linear_backward(vc.patches, dv, p.patch_embed, g.patch_embed, nullptr);
  }
}

// ---------------------------------------------------------------------------
// Supervised loss

LossResult loss_and_grads(const ModelConfig& config, const Parameters& params,
                          std::span<const TrainExample> batch) {
  if (batch.empty()) throw ArgumentError("loss_and_grads: empty batch");
  size_t total = 0;
  for (const auto& ex : batch) {
    const int len = static_cast<int>(ex.sequence.ids.size());
    if (ex.target_begin < 1 || ex.target_end > len || ex.target_begin >= ex.target_end) {
      throw ArgumentError("target span [" + std::to_string(ex.target_begin) + ", " +
                          std::to_string(ex.target_end) + ") outside sequence of length " +
                          std::to_string(len));
    }
    total += static_cast<size_t>(ex.target_end - ex.target_begin);
  }

  LossResult result{0.0, Parameters::zeros(config), total};
  const double inv_total = 1.0 / static_cast<double>(total);
  for (const auto& ex : batch) {
    ForwardTrace trace(config, params, ex.sequence, ex.images);
    std::vector<int> rows;
    for (int t = ex.target_begin; t < ex.target_end; ++t) rows.push_back(t - 1);
    Mat logits = trace.logits(rows);
    Mat dlogits(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const int target = ex.sequence.ids[rows[r] + 1];
      const double mx = logits.row(r).maxCoeff();
      auto shifted = (logits.row(r).array() - mx).exp();
      const double z = shifted.sum();
      result.loss -= (logits(r, target) - mx - std::log(z)) * inv_total;
      dlogits.row(r) = shifted / z * inv_total;
      dlogits(r, target) -= inv_total;
    }
    trace.backward(rows, dlogits, result.grads);
  }
  return result;
}

TrainExample build_example(const ModelConfig& config, const Tokenizer& tokenizer, std::string_view prompt,
                           std::vector<Image> images, std::string_view target) {
  TrainExample ex;
  ex.sequence.ids.push_back(kBos);
  ex.sequence.ids.insert(ex.sequence.ids.end(), images.size() * config.visual_tokens(), kImg);
  auto p = tokenizer.encode(prompt);
  ex.sequence.ids.insert(ex.sequence.ids.end(), p.begin(), p.end());
  ex.target_begin = static_cast<int>(ex.sequence.ids.size());
  if (!target.empty()) {
    auto t = tokenizer.encode(target);
    ex.sequence.ids.insert(ex.sequence.ids.end(), t.begin(), t.end());
    ex.sequence.ids.push_back(kEos);
  }
  ex.target_end = static_cast<int>(ex.sequence.ids.size());
  ex.images = std::move(images);
  return ex;
}

// ---------------------------------------------------------------------------
// Cached decoding

namespace {

struct LayerCache {
  Mat keys;
  Mat values;
  int length = 0;
};

// Processes new rows at positions [cache.length, cache.length + n).
Mat block_step(const Block& b, const Mat& x, int heads, LayerCache& cache) {
  const int n = static_cast<int>(x.rows());
  const int dim = static_cast<int>(x.cols());
  const int head_dim = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const int past = cache.length;
  const int total = past + n;

  Mat h1 = layer_norm(x, b.ln1, nullptr);
  Mat qkv = linear(h1, b.qkv);
  cache.keys.middleRows(past, n) = qkv.middleCols(dim, dim);
  cache.values.middleRows(past, n) = qkv.middleCols(2 * dim, dim);
  cache.length = total;

  Mat attn(n, dim);
  for (int h = 0; h < heads; ++h) {
    const auto q = qkv.middleCols(h * head_dim, head_dim);
    const auto k = cache.keys.block(0, h * head_dim, total, head_dim);
    const auto v = cache.values.block(0, h * head_dim, total, head_dim);
    Mat s = (q * k.transpose()) * scale;
    for (int i = 0; i < n; ++i)
      for (int j = past + i + 1; j < total; ++j) s(i, j) = -std::numeric_limits<double>::infinity();
    softmax_rows(s);
    attn.middleCols(h * head_dim, head_dim).noalias() = s * v;
  }
  Mat mid = x + linear(attn, b.attn_out);
  Mat h2 = layer_norm(mid, b.ln2, nullptr);
  return mid + linear(linear(h2, b.fc1).unaryExpr(&gelu), b.fc2);
}

}  // namespace

Generation generate(const ModelConfig& config, const Parameters& params, const Tokenizer& tokenizer,
                    const TokenSequence& prompt, std::span<const Image> images, const DecodeOptions& options) {
  if (options.temperature < 0.0) throw ArgumentError("temperature must be non-negative");
  check_sequence(config, prompt, images.size());
  Generation out;
  if (options.max_new <= 0) return out;

  Mat projected;
  if (!images.empty()) {
    const int n_vis = config.visual_tokens();
    Mat visual(static_cast<Eigen::Index>(images.size()) * n_vis, config.vision_dim);
    for (size_t i = 0; i < images.size(); ++i)
      visual.middleRows(static_cast<Eigen::Index>(i) * n_vis, n_vis) = encode_image(config, params, images[i]);
    projected = project(params, visual);
  }

  std::vector<LayerCache> caches(params.decoder_blocks.size());
  for (auto& c : caches) {
    c.keys.resize(config.max_seq_len, config.decoder_dim);
    c.values.resize(config.max_seq_len, config.decoder_dim);
  }

  const int len = static_cast<int>(prompt.ids.size());
  Mat x(len, config.decoder_dim);
  int visual_row = 0;
  for (int t = 0; t < len; ++t) {
    x.row(t) = prompt.ids[t] == kImg ? Mat(projected.row(visual_row++)) : Mat(params.token_embed.row(prompt.ids[t]));
  }
  x += params.pos_embed.topRows(len);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int position = len;
  while (true) {
    for (size_t i = 0; i < params.decoder_blocks.size(); ++i)
      x = block_step(params.decoder_blocks[i], x, config.heads, caches[i]);
    Mat last = layer_norm(x.bottomRows(1), params.decoder_norm, nullptr);
    Eigen::RowVectorXd logits = last * params.lm_head;

    const double temp = options.temperature > 0.0 ? options.temperature : 1.0;
    Eigen::RowVectorXd scaled = logits / temp;
    for (Eigen::Index v = 0; v < scaled.size(); ++v) {
      if (!decodable(static_cast<int>(v))) scaled(v) = -std::numeric_limits<double>::infinity();
    }
    const double mx = scaled.maxCoeff();
    Eigen::RowVectorXd probs = (scaled.array() - mx).exp();
    const double z = probs.sum();
    probs /= z;

    int token = 0;
    if (options.temperature == 0.0) {
      scaled.maxCoeff(&token);
    } else {
      const double u = uniform(rng);
      double acc = 0.0;
      token = static_cast<int>(probs.size()) - 1;
      for (Eigen::Index v = 0; v < probs.size(); ++v) {
        acc += probs(v);
        if (u < acc) {
          token = static_cast<int>(v);
          break;
        }
      }
    }
    out.tokens.push_back(token);
    out.logprobs.push_back(scaled(token) - mx - std::log(z));
    if (token == kEos) break;
    ++position;
    if (static_cast<int>(out.tokens.size()) >= options.max_new || position >= config.max_seq_len) break;
    x = params.token_embed.row(token) + params.pos_embed.row(position - 1);
  }
  out.text = tokenizer.decode(out.tokens);
  return out;
}

}  // namespace xvlm::vlm
