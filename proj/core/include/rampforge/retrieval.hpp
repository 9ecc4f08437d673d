// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rampforge/corpus.hpp"

namespace rampforge {

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline constexpr std::size_t kSnippetBytes = 300;
inline constexpr int kDefaultTopK = 5;

struct SearchHit {
  std::string doc_id;
  double score = 0.0;
  std::string snippet;
  std::string title;
};

struct SearchResult {
  std::vector<SearchHit> hits;
  bool empty_query = false;  // query had no tokens
};

/// Immutable BM25 index over tokenize(title + " " + text) of every document.
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc = 0;  // position in documents()
    std::uint32_t tf = 0;
  };

  struct IndexedDoc {
    std::string doc_id;
    std::string title;
    std::string snippet;
    std::uint32_t length = 0;
  };

  /// Throws InvalidArgument on an empty store, k1 <= 0 or b outside [0, 1].
  static InvertedIndex build(const DocumentStore& store, Bm25Params params = {});

  SearchResult search(std::string_view query, int top_k = kDefaultTopK) const;

  /// BM25 inverse document frequency, ln((N - df + 0.5) / (df + 0.5) + 1).
  double idf(std::string_view term) const;

  const std::vector<Posting>* postings(std::string_view term) const;
  const std::vector<IndexedDoc>& documents() const noexcept { return docs_; }
  std::size_t doc_count() const noexcept { return docs_.size(); }
  std::size_t vocabulary_size() const noexcept { return postings_.size(); }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  Bm25Params params() const noexcept { return params_; }

 private:
  InvertedIndex() = default;

  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<IndexedDoc> docs_;
  double avg_doc_length_ = 0.0;
  Bm25Params params_;
};

/// Leading bytes of `text` cut back to the end of the last whole token that
/// fits in `max_bytes`.
std::string make_snippet(std::string_view text, std::size_t max_bytes = kSnippetBytes);

/// Convenience wrapper around InvertedIndex::search.
SearchResult bm25_search(const InvertedIndex& index, std::string_view query, int top_k);

/// {"hits":[{"doc_id","score","snippet","title"}...]} with scores printed to
/// six decimal places. The service answers with exactly this text.
std::string hits_to_json(const std::vector<SearchHit>& hits);
std::vector<SearchHit> hits_from_json(std::string_view body);

/// The search tool seen by agents: in-process or remote.
class SearchTool {
 public:
  virtual ~SearchTool() = default;
  virtual std::vector<SearchHit> search(std::string_view query, int top_k) = 0;
};

class LocalSearch final : public SearchTool {
 public:
  explicit LocalSearch(const InvertedIndex& index) : index_(index) {}
  std::vector<SearchHit> search(std::string_view query, int top_k) override;

 private:
  const InvertedIndex& index_;
};

/// Client for a running search service, e.g. "http://127.0.0.1:8080".
class HttpSearch final : public SearchTool {
 public:
  explicit HttpSearch(std::string base_url, int timeout_seconds = 10);
  std::vector<SearchHit> search(std::string_view query, int top_k) override;

 private:
  std::string base_url_;
  int timeout_seconds_;
};

/// HTTP front end for an index: GET /search?q=..&k=.. and GET /healthz.
/// Serves from a background thread until stop() or destruction.
class SearchService {
 public:
  /// Binds immediately; port 0 picks a free port. Throws Error on bind failure.
  SearchService(const InvertedIndex& index, std::string host, int port);
  ~SearchService();

  SearchService(const SearchService&) = delete;
  SearchService& operator=(const SearchService&) = delete;

  int port() const noexcept;
  const std::string& host() const noexcept;
  std::string base_url() const;

  /// Blocks until stop() is called from elsewhere; alternative to start().
  void run();
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Parses "host:port"; throws InvalidArgument when malformed.
std::pair<std::string, int> parse_bind_address(std::string_view address);

}  // namespace rampforge
