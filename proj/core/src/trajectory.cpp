// SPDX-License-Identifier: Apache-2.0
#include "rampforge/trajectory.hpp"

#include <fstream>

#include <json.hpp>

#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

constexpr std::array<std::string_view, 4> kKindNames{"think", "search", "information", "answer"};

constexpr std::array<std::string_view, 8> kTagLiterals{
    "<think>",       "</think>",       "<search>", "</search>",
    "<information>", "</information>", "<answer>", "</answer>"};

constexpr std::string_view kRlInstruction =
    "Answer the given question. You must conduct reasoning inside <think> and </think> first "
    "every time you get new information. After reasoning, if you find you lack some knowledge, "
    "you can call a search engine by <search> query </search>, and it will return the top "
    "searched results between <information> and </information>. You can search as many times as "
    "you want. If you find no further external knowledge needed, you can directly provide the "
    "answer inside <answer> and </answer> without detailed illustrations. For example, <answer> "
    "xxx </answer>. Question: ";

std::string open_tag(SegmentKind kind) { return "<" + std::string(to_string(kind)) + ">"; }
std::string close_tag(SegmentKind kind) { return "</" + std::string(to_string(kind)) + ">"; }

std::size_t find_tag_literal(std::string_view text) {
  std::size_t first = std::string_view::npos;
  for (auto tag : kTagLiterals) first = std::min(first, text.find(tag));
  return first;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

}  // namespace

std::string_view to_string(SegmentKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

SegmentKind segment_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (kKindNames[i] == name) return static_cast<SegmentKind>(i);
  }
  throw InvalidArgument("unknown segment kind '" + std::string(name) + "'");
}

const std::array<std::string_view, 8>& tag_literals() { return kTagLiterals; }

bool contains_tag_literal(std::string_view text) {
  return find_tag_literal(text) != std::string_view::npos;
}

std::string neutralize_tags(std::string_view text) {
  std::string out(text);
  for (auto tag : kTagLiterals) {
    out = replace_all(out, tag, "&lt;" + std::string(tag.substr(1)));
  }
  return out;
}

void Trajectory::push(SegmentKind kind, std::string text, ByteRange range, std::size_t offset) {
  if (final_answer_) {
    throw FormatError(kind == SegmentKind::answer ? "duplicate <answer> block"
                                                  : "answer is not the final block",
                      offset);
  }
  if (auto nested = find_tag_literal(text); nested != std::string_view::npos) {
    throw FormatError("nested or stray tag inside <" + std::string(to_string(kind)) + ">",
                      range.begin + nested);
  }
  if (kind == SegmentKind::information &&
      (segments_.empty() || segments_.back().kind != SegmentKind::search)) {
    throw FormatError("<information> block without a preceding <search>", offset);
  }

  if (kind == SegmentKind::search) ++search_count_;
  if (kind == SegmentKind::answer) final_answer_ = std::string(trim(text));
  if (!segments_.empty()) ++canonical_size_;  // '\n' separator
  canonical_size_ += open_tag(kind).size() + text.size() + close_tag(kind).size();
  segments_.push_back({kind, std::move(text), range});
}

void Trajectory::append(SegmentKind kind, std::string text) {
  const std::size_t start = canonical_size_ + (segments_.empty() ? 0 : 1);
  const std::size_t content = start + open_tag(kind).size();
  const ByteRange range{content, content + text.size()};
  push(kind, std::move(text), range, start);
}

std::string render_rl_template(std::string_view question) {
  if (is_blank(question)) throw InvalidArgument("question must not be empty");
  std::string out(kRlInstruction);
  out += question;
  return out;
}

Trajectory parse_trajectory(std::string_view text) {
  Trajectory t;
  std::size_t pos = 0;
  while (true) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size()) break;
    if (text[pos] != '<') throw FormatError("text outside of tagged blocks", pos);

    std::optional<SegmentKind> kind;
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
      const auto k = static_cast<SegmentKind>(i);
      if (text.substr(pos).starts_with(open_tag(k))) {
        kind = k;
        break;
      }
    }
    if (!kind) {
      for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (text.substr(pos).starts_with(close_tag(static_cast<SegmentKind>(i)))) {
          throw FormatError("unmatched closing tag", pos);
        }
      }
      throw FormatError("text outside of tagged blocks", pos);
    }

    const auto open = open_tag(*kind);
    const auto close = close_tag(*kind);
    const std::size_t content_begin = pos + open.size();
    const auto content_end = text.find(close, content_begin);
    if (content_end == std::string_view::npos) {
      throw FormatError("unmatched " + open, pos);
    }
    t.push(*kind, std::string(text.substr(content_begin, content_end - content_begin)),
           {content_begin, content_end}, pos);
    pos = content_end + close.size();
  }
  return t;
}

std::string serialize_trajectory(const Trajectory& t) {
  std::string out;
  for (std::size_t i = 0; i < t.segments().size(); ++i) {
    const auto& seg = t.segments()[i];
    if (contains_tag_literal(seg.text)) {
      throw FormatError("segment contains a tag literal", out.size());
    }
    if (seg.kind == SegmentKind::information &&
        (i == 0 || t.segments()[i - 1].kind != SegmentKind::search)) {
      throw FormatError("<information> block without a preceding <search>", out.size());
    }
    if (i > 0) out += '\n';
    out += open_tag(seg.kind);
    out += seg.text;
    out += close_tag(seg.kind);
  }
  return out;
}

LossMask retrieved_spans(const Trajectory& t) {
  LossMask mask;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < t.segments().size(); ++i) {
    const auto& seg = t.segments()[i];
    if (i > 0) ++offset;
    offset += open_tag(seg.kind).size();
    if (seg.kind == SegmentKind::information) {
      mask.excluded_ranges.push_back({offset, offset + seg.text.size()});
    }
    offset += seg.text.size() + close_tag(seg.kind).size();
  }
  return mask;
}

std::string to_jsonl(const Trajectory& t) {
  nlohmann::ordered_json j;
  j["sample_id"] = t.sample_id();
  auto segments = nlohmann::ordered_json::array();
  for (const auto& seg : t.segments()) {
    nlohmann::ordered_json s;
    s["kind"] = to_string(seg.kind);
    s["text"] = seg.text;
    segments.push_back(std::move(s));
  }
  j["segments"] = std::move(segments);
  j["final_answer"] = t.final_answer() ? nlohmann::ordered_json(*t.final_answer()) : nullptr;
  return dump_compact(j);
}

Trajectory trajectory_from_json(std::string_view json_line, std::size_t line) {
  try {
    const auto j = nlohmann::json::parse(json_line);
    Trajectory t(j.at("sample_id").get<std::string>());
    for (const auto& s : j.at("segments")) {
      t.append(segment_kind_from_string(s.at("kind").get<std::string>()),
               s.at("text").get<std::string>());
    }
    if (auto it = j.find("final_answer"); it != j.end() && !it->is_null()) {
      if (!t.final_answer() || *t.final_answer() != it->get<std::string>()) {
        throw InputError("final_answer disagrees with the answer segment", line);
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid trajectory: ") + e.what(), line);
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(e.what(), line);
  }
}

std::vector<Trajectory> load_trajectories(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open trajectory file " + path.string());
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    out.push_back(trajectory_from_json(line, line_no));
  }
  return out;
}

}  // namespace rampforge
