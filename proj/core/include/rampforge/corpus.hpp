// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rampforge {

/// Half-open byte range [begin, end) into some UTF-8 buffer.
struct ByteRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct Document {
  std::string doc_id;
  std::string title;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

/// Normalized tokens of a text together with where each came from.
struct TokenSeq {
  std::vector<std::string> tokens;
  std::vector<ByteRange> source_spans;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
};

/// The canonical tokenizer shared by recall, the length penalty and BM25.
///
/// A token is a maximal run of Unicode letters or decimal digits, lowercased
/// code point by code point. Everything else (punctuation, whitespace, symbols,
/// invalid UTF-8) separates tokens and is dropped. "b2b" stays one token while
/// "3518.17" yields "3518" and "17".
TokenSeq tokenize(std::string_view text);

/// Convenience overload returning only the token strings.
std::vector<std::string> tokenize_words(std::string_view text);

/// Documents in insertion order with lookup by id.
class DocumentStore {
 public:
  /// Throws InvalidArgument on a duplicate id or a blank text.
  void add(Document doc);

  /// nullptr when the id is unknown.
  const Document* find(std::string_view doc_id) const;

  /// Throws InvalidArgument when the id is unknown.
  const Document& at(std::string_view doc_id) const;

  std::size_t count() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  std::span<const Document> documents() const noexcept { return docs_; }

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Reads a corpus JSONL file: one {"id","title","text"} object per line.
/// Blank lines are skipped. Errors carry the 1-based line number.
DocumentStore ingest_corpus(const std::filesystem::path& path);

/// Parses one corpus line; throws InputError tagged with `line`.
Document parse_document_line(std::string_view json_line, std::size_t line = 0);

std::string to_jsonl(const Document& doc);

}  // namespace rampforge
