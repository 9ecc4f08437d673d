// SPDX-License-Identifier: Apache-2.0
#include "rampforge/corpus.hpp"

#include <fstream>

#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

TokenSeq tokenize(std::string_view text) {
  TokenSeq seq;
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());

  std::string current;
  std::size_t token_begin = 0;
  bool in_token = false;

  int32_t pos = 0;
  while (pos < length) {
    const int32_t start = pos;
    UChar32 c = 0;
    U8_NEXT(bytes, pos, length, c);
    const bool word_char = c >= 0 && u_isalnum(c);
    if (word_char) {
      if (!in_token) {
        in_token = true;
        token_begin = static_cast<std::size_t>(start);
        current.clear();
      }
      append_utf8(current, u_tolower(c));
    } else if (in_token) {
      seq.tokens.push_back(current);
      seq.source_spans.push_back({token_begin, static_cast<std::size_t>(start)});
      in_token = false;
    }
  }
  if (in_token) {
    seq.tokens.push_back(current);
    seq.source_spans.push_back({token_begin, text.size()});
  }
  return seq;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  return tokenize(text).tokens;
}

void DocumentStore::add(Document doc) {
  if (trim(doc.text).empty()) {
    throw InvalidArgument("document '" + doc.doc_id + "' has empty text");
  }
  if (by_id_.contains(doc.doc_id)) {
    throw InvalidArgument("duplicate doc_id '" + doc.doc_id + "'");
  }
  by_id_.emplace(doc.doc_id, docs_.size());
  docs_.push_back(std::move(doc));
}

const Document* DocumentStore::find(std::string_view doc_id) const {
  auto it = by_id_.find(std::string(doc_id));
  return it == by_id_.end() ? nullptr : &docs_[it->second];
}

const Document& DocumentStore::at(std::string_view doc_id) const {
  if (const auto* doc = find(doc_id)) return *doc;
  throw InvalidArgument("unknown doc_id '" + std::string(doc_id) + "'");
}

Document parse_document_line(std::string_view json_line, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what(), line);
  }
  if (!j.is_object()) throw InputError("expected a JSON object", line);
  Document doc;
  for (auto [key, field] : {std::pair{"id", &doc.doc_id}, std::pair{"title", &doc.title},
                            std::pair{"text", &doc.text}}) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw InputError(std::string("missing string field \"") + key + "\"", line);
    }
    *field = it->get<std::string>();
  }
  if (trim(doc.text).empty()) throw InputError("empty \"text\"", line);
  return doc;
}

DocumentStore ingest_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file " + path.string());

  DocumentStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto doc = parse_document_line(line, line_no);
    if (store.find(doc.doc_id) != nullptr) {
      throw InputError("duplicate doc_id \"" + doc.doc_id + "\"", line_no);
    }
    store.add(std::move(doc));
  }
  if (in.bad()) throw InputError("read failure on " + path.string());
  return store;
}

std::string to_jsonl(const Document& doc) {
  nlohmann::ordered_json j;
  j["id"] = doc.doc_id;
  j["title"] = doc.title;
  j["text"] = doc.text;
  return j.dump();
}

}  // namespace rampforge
