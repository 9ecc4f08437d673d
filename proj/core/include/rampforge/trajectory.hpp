// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rampforge/corpus.hpp"

namespace rampforge {

enum class SegmentKind { think, search, information, answer };

std::string_view to_string(SegmentKind kind);
SegmentKind segment_kind_from_string(std::string_view name);

/// The eight literals "<think>", "</think>", ... "</answer>".
const std::array<std::string_view, 8>& tag_literals();

/// True when `text` contains any tag literal.
bool contains_tag_literal(std::string_view text);

/// Rewrites every tag literal's '<' as "&lt;" so arbitrary text can sit
/// inside a segment.
std::string neutralize_tags(std::string_view text);

struct TaggedSegment {
  SegmentKind kind = SegmentKind::think;
  std::string text;
  ByteRange byte_range;  // content only, tags excluded

  friend bool operator==(const TaggedSegment&, const TaggedSegment&) = default;
};

/// A think/search/information/answer sequence.
///
/// Segments appended through append() get byte ranges that point into the
/// canonical serialization; parse_trajectory() records ranges into whatever
/// text it was given.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::string sample_id) : sample_id_(std::move(sample_id)) {}

  /// Appends a segment, enforcing the grammar. Throws FormatError (offset =
  /// canonical position of the new segment) when the segment would break it.
  void append(SegmentKind kind, std::string text);

  const std::string& sample_id() const noexcept { return sample_id_; }
  void set_sample_id(std::string id) { sample_id_ = std::move(id); }

  const std::vector<TaggedSegment>& segments() const noexcept { return segments_; }
  int search_count() const noexcept { return search_count_; }
  bool has_answer() const noexcept { return final_answer_.has_value(); }

  /// Whitespace-trimmed text of the terminal answer segment.
  const std::optional<std::string>& final_answer() const noexcept { return final_answer_; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;

 private:
  friend Trajectory parse_trajectory(std::string_view text);

  void push(SegmentKind kind, std::string text, ByteRange range, std::size_t offset);

  std::string sample_id_;
  std::vector<TaggedSegment> segments_;
  int search_count_ = 0;
  std::optional<std::string> final_answer_;
  std::size_t canonical_size_ = 0;
};

/// The fixed RL instruction with the question appended after "Question: ".
/// Throws InvalidArgument on a blank question.
std::string render_rl_template(std::string_view question);

/// Strict left-to-right parse. Only whitespace may appear between tagged
/// blocks; nested or unmatched tags, orphan information blocks, and answers
/// that are repeated or not last raise FormatError naming the byte offset.
Trajectory parse_trajectory(std::string_view text);

/// Tagged blocks joined with single '\n'. Throws FormatError if the
/// trajectory breaks an invariant (possible only for hand-edited segments).
std::string serialize_trajectory(const Trajectory& t);

/// Byte ranges of information content in the canonical serialization.
struct LossMask {
  std::vector<ByteRange> excluded_ranges;
};

LossMask retrieved_spans(const Trajectory& t);

std::string to_jsonl(const Trajectory& t);
Trajectory trajectory_from_json(std::string_view json_line, std::size_t line = 0);
std::vector<Trajectory> load_trajectories(const std::filesystem::path& path);

}  // namespace rampforge
