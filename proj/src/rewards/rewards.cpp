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

#include "xvlm/rewards/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace xvlm::rewards {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

bool has_tag(std::string_view s) {
  for (auto tag : {kThinkOpen, kThinkClose, kAnswerOpen, kAnswerClose}) {
    if (s.find(tag) != std::string_view::npos) return true;
  }
  return false;
}

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ws(s.back())) s.remove_suffix(1);
  return s;
}

// Answer segment bounds if the template parses.
std::optional<std::string_view> template_answer(std::string_view text) {
  if (text.substr(0, kThinkOpen.size()) != kThinkOpen) return std::nullopt;
  const size_t close = text.find(kThinkClose, kThinkOpen.size());
  if (close == std::string_view::npos) return std::nullopt;
  if (has_tag(text.substr(kThinkOpen.size(), close - kThinkOpen.size()))) return std::nullopt;
  size_t pos = close + kThinkClose.size();
  while (pos < text.size() && is_ws(text[pos])) ++pos;
  if (text.substr(pos, kAnswerOpen.size()) != kAnswerOpen) return std::nullopt;
  pos += kAnswerOpen.size();
  const size_t end = text.find(kAnswerClose, pos);
  if (end == std::string_view::npos) return std::nullopt;
  const std::string_view answer = text.substr(pos, end - pos);
  if (has_tag(answer)) return std::nullopt;
  if (end + kAnswerClose.size() != text.size()) return std::nullopt;
  return answer;
}

class Scanner {
 public:
  explicit Scanner(std::string_view s, size_t pos = 0) : s_(s), pos_(pos) {}

  void skip_ws() {
    while (pos_ < s_.size() && is_ws(s_[pos_])) ++pos_;
  }
  bool eat(char c) {
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  std::optional<double> number() {
    skip_ws();
    const char* begin = s_.data() + pos_;
    const char* end = s_.data() + s_.size();
    if (begin < end && *begin == '+') ++begin;
    double v = 0.0;
    auto [p, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || !std::isfinite(v)) return std::nullopt;
    pos_ = static_cast<size_t>(p - s_.data());
    return v;
  }
  // "(" n comma-separated numbers ")"
  std::optional<std::vector<double>> tuple(int n) {
    const size_t start = pos_;
    std::vector<double> out;
    if (!eat('(')) return fail(start);
    for (int i = 0; i < n; ++i) {
      if (i > 0 && !eat(',')) return fail(start);
      auto v = number();
      if (!v) return fail(start);
      out.push_back(*v);
    }
    if (!eat(')')) return fail(start);
    return out;
  }
  bool done() {
    skip_ws();
    return pos_ == s_.size();
  }
  size_t pos() const { return pos_; }

 private:
  std::nullopt_t fail(size_t start) {
    pos_ = start;
    return std::nullopt;
  }
  std::string_view s_;
  size_t pos_;
};

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

bool valid_payload(ParsedResponse& r) {
  switch (r.kind) {
    case AnswerKind::kPoint:
      return in_unit(r.point.x) && in_unit(r.point.y);
    case AnswerKind::kBox:
      return in_unit(r.box.x0) && in_unit(r.box.y0) && in_unit(r.box.x1) && in_unit(r.box.y1) &&
             r.box.x0 < r.box.x1 && r.box.y0 < r.box.y1;
    case AnswerKind::kTrajectory:
      return !r.trajectory.empty() && std::all_of(r.trajectory.begin(), r.trajectory.end(), [](const Point2& p) {
               return in_unit(p.x) && in_unit(p.y);
             });
    default:
      return true;
  }
}

bool is_letter(char c) { return c >= 'A' && c <= 'D'; }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Payload must match the grammar exactly (after trimming).
bool parse_exact(std::string_view payload, corpus::TaskKind kind, ParsedResponse& r) {
  payload = trim(payload);
  Scanner sc(payload);
  switch (kind) {
    case corpus::TaskKind::kMcq:
      if (payload.size() != 1 || !is_letter(payload[0])) return false;
      r.kind = AnswerKind::kLetter;
      r.letter = payload[0];
      return true;
    case corpus::TaskKind::kPointing: {
      auto t = sc.tuple(2);
      if (!t || !sc.done()) return false;
      r.kind = AnswerKind::kPoint;
      r.point = {(*t)[0], (*t)[1]};
      return true;
    }
    case corpus::TaskKind::kGrounding: {
      auto t = sc.tuple(4);
      if (!t || !sc.done()) return false;
      r.kind = AnswerKind::kBox;
      r.box = {(*t)[0], (*t)[1], (*t)[2], (*t)[3]};
      return true;
    }
    case corpus::TaskKind::kTrajectory: {
      if (!sc.eat('[')) return false;
      std::vector<Point2> pts;
      do {
        auto t = sc.tuple(2);
        if (!t) return false;
        pts.push_back({(*t)[0], (*t)[1]});
      } while (sc.eat(';'));
      if (!sc.eat(']') || !sc.done()) return false;
      r.kind = AnswerKind::kTrajectory;
      r.trajectory = std::move(pts);
      return true;
    }
    case corpus::TaskKind::kFreeText:
      if (payload.empty()) return false;
      r.kind = AnswerKind::kText;
      r.text = std::string(payload);
      return true;
  }
  return false;
}

std::optional<char> find_letter(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  // "answer is C", "answer: (C)"
  for (size_t at = lower.find("answer"); at != std::string::npos; at = lower.find("answer", at + 1)) {
    size_t p = at + 6;
    auto skip = [&] {
      while (p < s.size() && (is_ws(s[p]) || s[p] == ':' || s[p] == '(')) ++p;
    };
    skip();
    if (lower.compare(p, 2, "is") == 0 && (p + 2 >= s.size() || !is_word(s[p + 2]))) {
      p += 2;
      skip();
    }
    if (p < s.size() && is_letter(s[p]) && (p + 1 >= s.size() || !is_word(s[p + 1]))) return s[p];
  }
  // Otherwise the last standalone capital A-D.
  std::optional<char> last;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!is_letter(s[i])) continue;
    const bool left = i == 0 || !is_word(s[i - 1]);
    const bool right = i + 1 >= s.size() || !is_word(s[i + 1]);
    if (left && right) last = s[i];
  }
  return last;
}

bool parse_loose(std::string_view s, corpus::TaskKind kind, ParsedResponse& r) {
  switch (kind) {
    case corpus::TaskKind::kMcq: {
      auto l = find_letter(s);
      if (!l) return false;
      r.kind = AnswerKind::kLetter;
      r.letter = *l;
      return true;
    }
    case corpus::TaskKind::kPointing:
    case corpus::TaskKind::kGrounding: {
      const int n = kind == corpus::TaskKind::kPointing ? 2 : 4;
      for (size_t i = s.find('('); i != std::string_view::npos; i = s.find('(', i + 1)) {
        Scanner sc(s, i);
        auto t = sc.tuple(n);
        if (!t) continue;
        if (n == 2) {
          r.kind = AnswerKind::kPoint;
          r.point = {(*t)[0], (*t)[1]};
        } else {
          r.kind = AnswerKind::kBox;
          r.box = {(*t)[0], (*t)[1], (*t)[2], (*t)[3]};
        }
        return true;
      }
      return false;
    }
    case corpus::TaskKind::kTrajectory: {
      std::vector<Point2> pts;
      for (size_t i = s.find('('); i != std::string_view::npos; i = s.find('(', i + 1)) {
        Scanner sc(s, i);
        if (auto t = sc.tuple(2)) pts.push_back({(*t)[0], (*t)[1]});
      }
      if (pts.empty()) return false;
      r.kind = AnswerKind::kTrajectory;
      r.trajectory = std::move(pts);
      return true;
    }
    case corpus::TaskKind::kFreeText: {
      const auto t = trim(s);
      if (t.empty()) return false;
      r.kind = AnswerKind::kText;
      r.text = std::string(t);
      return true;
    }
  }
  return false;
}

}  // namespace

bool format_check(std::string_view text) { return template_answer(text).has_value(); }

Stripped strip_think(std::string_view text) {
  if (auto a = template_answer(text)) return {std::string(*a), true};
  return {std::string(text), false};
}

ParsedResponse parse_response(std::string_view text, corpus::TaskKind expected, ParseMode mode) {
  ParsedResponse r;
  try {
    const auto answer = template_answer(text);
    r.format_ok = answer.has_value();
    bool ok = false;
    if (answer) ok = parse_exact(*answer, expected, r);
    if (!ok && mode == ParseMode::kLenient) {
      r = ParsedResponse{};
      r.format_ok = answer.has_value();
      ok = parse_loose(answer ? *answer : text, expected, r);
    }
    if (!ok || !valid_payload(r)) {
      const bool f = r.format_ok;
      r = ParsedResponse{};
      r.format_ok = f;
    }
  } catch (...) {
    r = ParsedResponse{};
  }
  return r;
}

double reward_mcq(const ParsedResponse& parsed, const corpus::ChoiceTruth& truth) {
  return parsed.kind == AnswerKind::kLetter && parsed.letter == truth.letter ? 1.0 : 0.0;
}

double box_iou(const Box& a, const Box& b) {
  if (!(a.x0 < a.x1 && a.y0 < a.y1) || !(b.x0 < b.x1 && b.y0 < b.y1)) throw ArgumentError("malformed box");
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = iw * ih;
  const double uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double point_in_mask(const Point2& p, const Mask& mask) {
  if (mask.empty()) throw ArgumentError("empty mask");
  if (!in_unit(p.x) || !in_unit(p.y)) throw ArgumentError("point outside the unit square");
  const int x = std::min(mask.width - 1, static_cast<int>(std::floor(p.x * mask.width)));
  const int y = std::min(mask.height - 1, static_cast<int>(std::floor(p.y * mask.height)));
  return mask.at(x, y) ? 1.0 : 0.0;
}

TrajectoryError trajectory_error(const std::vector<Point2>& pred, const std::vector<Point2>& gold, int extent) {
  if (pred.size() != gold.size() || gold.empty()) throw ArgumentError("trajectory length mismatch");
  TrajectoryError e;
  for (size_t i = 0; i < gold.size(); ++i) {
    const double d = std::hypot(pred[i].x * extent - gold[i].x, pred[i].y * extent - gold[i].y);
    e.ade += d;
    if (i + 1 == gold.size()) e.fde = d;
  }
  e.ade /= static_cast<double>(gold.size());
  return e;
}

double task_score(const corpus::Sample& s, const ParsedResponse& p, const RewardConfig& cfg) {
  using corpus::TaskKind;
  switch (s.task_kind) {
    case TaskKind::kMcq:
      return reward_mcq(p, std::get<corpus::ChoiceTruth>(s.truth));
    case TaskKind::kPointing:
      return p.kind == AnswerKind::kPoint ? point_in_mask(p.point, std::get<corpus::PointTruth>(s.truth).mask) : 0.0;
    case TaskKind::kGrounding:
      return p.kind == AnswerKind::kBox ? box_iou(p.box, std::get<corpus::BoxTruth>(s.truth).box) : 0.0;
    case TaskKind::kTrajectory: {
      const auto& gold = std::get<corpus::TrajectoryTruth>(s.truth).waypoints;
      if (!cfg.trajectory_shaping || p.kind != AnswerKind::kTrajectory || p.trajectory.size() != gold.size()) {
        return 0.0;
      }
      return std::exp(-trajectory_error(p.trajectory, gold, s.scene.extent).ade / cfg.trajectory_sigma);
    }
    case TaskKind::kFreeText:
      return p.kind == AnswerKind::kText && p.text == std::get<corpus::TextTruth>(s.truth).text ? 1.0 : 0.0;
  }
  throw ConfigError("unknown task kind");
}

RewardBreakdown total_reward(const corpus::Sample& s, std::string_view text, const RewardConfig& cfg) {
  if (corpus::task_kind_of(s.truth) != s.task_kind) {
    throw ConfigError("sample " + s.id + " has a truth that does not match its task kind");
  }
  const ParsedResponse p = parse_response(text, s.task_kind, cfg.mode);
  RewardBreakdown b;
  b.r_format = p.format_ok ? 1.0 : 0.0;
  b.r_task = task_score(s, p, cfg);
  const double task = cfg.gate_on_format ? b.r_task * b.r_format : b.r_task;
  b.total = task + cfg.format_weight * b.r_format;
  return b;
}

void to_json(nlohmann::json& j, const RewardConfig& c) {
  j = nlohmann::json{{"format_weight", c.format_weight},
                     {"gate_on_format", c.gate_on_format},
                     {"mode", c.mode == ParseMode::kStrict ? "strict" : "lenient"},
                     {"trajectory_shaping", c.trajectory_shaping},
                     {"trajectory_sigma", c.trajectory_sigma}};
}

void from_json(const nlohmann::json& j, RewardConfig& c) {
  if (!j.is_object()) throw ConfigError("reward config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "format_weight") {
      c.format_weight = value.get<double>();
    } else if (key == "gate_on_format") {
      c.gate_on_format = value.get<bool>();
    } else if (key == "mode") {
      const auto m = value.get<std::string>();
      if (m != "strict" && m != "lenient") throw ConfigError("reward mode must be strict or lenient");
      c.mode = m == "strict" ? ParseMode::kStrict : ParseMode::kLenient;
    } else if (key == "trajectory_shaping") {
      c.trajectory_shaping = value.get<bool>();
    } else if (key == "trajectory_sigma") {
      c.trajectory_sigma = value.get<double>();
    } else {
      throw ConfigError("unknown reward key: " + key);
    }
  }
  if (!(c.format_weight >= 0)) throw ConfigError("format_weight must be non-negative");
  if (!(c.trajectory_sigma > 0)) throw ConfigError("trajectory_sigma must be positive");
}

}  // namespace xvlm::rewards
