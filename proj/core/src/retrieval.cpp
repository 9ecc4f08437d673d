// SPDX-License-Identifier: Apache-2.0
#include "rampforge/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <unicode/utf8.h>

#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

std::vector<std::string> distinct_terms(std::string_view query) {
  std::vector<std::string> terms;
  for (auto& tok : tokenize_words(query)) {
    if (std::find(terms.begin(), terms.end(), tok) == terms.end()) terms.push_back(std::move(tok));
  }
  return terms;
}

bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

}  // namespace

std::string make_snippet(std::string_view text, std::size_t max_bytes) {
  if (text.size() <= max_bytes) return std::string(text);
  // One extra code point of lookahead shows whether a token ending at
  // max_bytes continues past it.
  const auto seq = tokenize(text.substr(0, max_bytes + U8_MAX_LENGTH));
  std::size_t cut = 0;
  for (const auto& span : seq.source_spans) {
    if (span.end <= max_bytes) cut = span.end;
  }
  if (cut == 0) {
    // Single over-long token: fall back to a code point boundary.
    cut = max_bytes;
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    while (cut > 0 && U8_IS_TRAIL(bytes[cut])) --cut;
  }
  return std::string(text.substr(0, cut));
}

InvertedIndex InvertedIndex::build(const DocumentStore& store, Bm25Params params) {
  if (store.empty()) throw InvalidArgument("cannot index an empty document store");
  if (!(params.k1 > 0.0)) throw InvalidArgument("k1 must be positive");
  if (!(params.b >= 0.0 && params.b <= 1.0)) throw InvalidArgument("b must lie in [0, 1]");

  InvertedIndex index;
  index.params_ = params;
  index.docs_.reserve(store.count());

  std::uint64_t total_length = 0;
  for (const auto& doc : store.documents()) {
    const auto doc_no = static_cast<std::uint32_t>(index.docs_.size());
    const auto tokens = tokenize_words(doc.title + " " + doc.text);

    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& tok : tokens) ++tf[tok];
    // Sorted so that posting construction does not depend on hash order.
    std::vector<std::pair<std::string, std::uint32_t>> sorted(tf.begin(), tf.end());
    std::sort(sorted.begin(), sorted.end());
    for (auto& [term, count] : sorted) index.postings_[term].push_back({doc_no, count});

    index.docs_.push_back({doc.doc_id, doc.title, make_snippet(doc.text),
                           static_cast<std::uint32_t>(tokens.size())});
    total_length += tokens.size();
  }
  index.avg_doc_length_ =
      static_cast<double>(total_length) / static_cast<double>(index.docs_.size());
  return index;
}

double InvertedIndex::idf(std::string_view term) const {
  const auto* list = postings(term);
  const double df = list == nullptr ? 0.0 : static_cast<double>(list->size());
  const double n = static_cast<double>(docs_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

const std::vector<InvertedIndex::Posting>* InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

SearchResult InvertedIndex::search(std::string_view query, int top_k) const {
  if (top_k < 1) throw InvalidArgument("top_k must be at least 1");
  SearchResult result;
  const auto terms = distinct_terms(query);
  if (terms.empty()) {
    result.empty_query = true;
    return result;
  }

  std::vector<double> scores(docs_.size(), 0.0);
  std::vector<bool> touched(docs_.size(), false);
  std::vector<std::uint32_t> candidates;
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& term : terms) {
    const auto* list = postings(term);
    if (list == nullptr) continue;
    const double weight = idf(term);
    for (const auto& p : *list) {
      const double tf = p.tf;
      const double norm = k1 * (1.0 - b + b * docs_[p.doc].length / avg_doc_length_);
      scores[p.doc] += weight * tf * (k1 + 1.0) / (tf + norm);
      if (!touched[p.doc]) {
        touched[p.doc] = true;
        candidates.push_back(p.doc);
      }
    }
  }

  result.hits.reserve(candidates.size());
  for (auto doc : candidates) {
    const auto& d = docs_[doc];
    result.hits.push_back({d.doc_id, scores[doc], d.snippet, d.title});
  }
  const auto keep = std::min(result.hits.size(), static_cast<std::size_t>(top_k));
  std::partial_sort(result.hits.begin(), result.hits.begin() + static_cast<std::ptrdiff_t>(keep),
                    result.hits.end(), hit_order);
  result.hits.resize(keep);
  return result;
}

SearchResult bm25_search(const InvertedIndex& index, std::string_view query, int top_k) {
  return index.search(query, top_k);
}

std::string hits_to_json(const std::vector<SearchHit>& hits) {
  std::string out = "{\"hits\":[";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i > 0) out += ',';
    out += "{\"doc_id\":" + dump_compact(nlohmann::json(hits[i].doc_id));
    out += ",\"score\":" + format_score(hits[i].score);
    out += ",\"snippet\":" + dump_compact(nlohmann::json(hits[i].snippet));
    out += ",\"title\":" + dump_compact(nlohmann::json(hits[i].title));
    out += '}';
  }
  out += "]}";
  return out;
}

std::vector<SearchHit> hits_from_json(std::string_view body) {
  std::vector<SearchHit> hits;
  try {
    const auto j = nlohmann::json::parse(body);
    for (const auto& h : j.at("hits")) {
      hits.push_back({h.at("doc_id").get<std::string>(), h.at("score").get<double>(),
                      h.at("snippet").get<std::string>(), h.value("title", std::string{})});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ClientError(std::string("malformed search response: ") + e.what());
  }
  return hits;
}

std::vector<SearchHit> LocalSearch::search(std::string_view query, int top_k) {
  return index_.search(query, top_k).hits;
}

HttpSearch::HttpSearch(std::string base_url, int timeout_seconds)
    : base_url_(std::move(base_url)), timeout_seconds_(timeout_seconds) {}

std::vector<SearchHit> HttpSearch::search(std::string_view query, int top_k) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);
  httplib::Params params{{"q", std::string(query)}, {"k", std::to_string(top_k)}};
  auto res = client.Get("/search", params, httplib::Headers{});
  if (!res) {
    throw ClientError("search request to " + base_url_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ClientError("search service answered HTTP " + std::to_string(res->status));
  }
  return hits_from_json(res->body);
}

struct SearchService::Impl {
  const InvertedIndex& index;
  std::string host;
  int port = 0;
  httplib::Server server;
  std::thread worker;

  explicit Impl(const InvertedIndex& idx) : index(idx) {}
};

SearchService::SearchService(const InvertedIndex& index, std::string host, int port)
    : impl_(std::make_unique<Impl>(index)) {
  impl_->host = std::move(host);
  auto& server = impl_->server;
  const InvertedIndex* idx = &index;

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });

  server.Get("/search", [idx](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q")) {
      res.status = 400;
      res.set_content(R"({"error":"missing q"})", "application/json");
      return;
    }
    int k = kDefaultTopK;
    if (req.has_param("k")) {
      const auto raw = req.get_param_value("k");
      const auto* end = raw.data() + raw.size();
      auto [ptr, ec] = std::from_chars(raw.data(), end, k);
      if (ec != std::errc{} || ptr != end || k < 1) {
        res.status = 400;
        res.set_content(R"({"error":"k must be a positive integer"})", "application/json");
        return;
      }
    }
    const auto result = idx->search(req.get_param_value("q"), k);
    res.set_content(hits_to_json(result.hits), "application/json");
  });

  if (port == 0) {
    impl_->port = server.bind_to_any_port(impl_->host);
    if (impl_->port <= 0) throw Error("cannot bind search service on " + impl_->host);
  } else {
    if (!server.bind_to_port(impl_->host, port)) {
      throw Error("cannot bind search service on " + impl_->host + ":" + std::to_string(port));
    }
    impl_->port = port;
  }
}

SearchService::~SearchService() { stop(); }

int SearchService::port() const noexcept { return impl_->port; }

const std::string& SearchService::host() const noexcept { return impl_->host; }

std::string SearchService::base_url() const {
  return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

void SearchService::run() { impl_->server.listen_after_bind(); }

void SearchService::start() {
  if (impl_->worker.joinable()) return;
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void SearchService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

std::pair<std::string, int> parse_bind_address(std::string_view address) {
  const auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw InvalidArgument("bind address must look like host:port, got '" + std::string(address) + "'");
  }
  int port = 0;
  const auto digits = address.substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc{} || ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw InvalidArgument("invalid port in bind address '" + std::string(address) + "'");
  }
  return {std::string(address.substr(0, colon)), port};
}

}  // namespace rampforge
