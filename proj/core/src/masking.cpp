// SPDX-License-Identifier: Apache-2.0
#include "rampforge/masking.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include "rampforge/random.hpp"
#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

constexpr std::array<std::pair<SpanCategory, std::string_view>, 5> kCategoryNames{{
    {SpanCategory::entity, "entity"},
    {SpanCategory::date, "date"},
    {SpanCategory::ontology, "ontology"},
    {SpanCategory::term, "term"},
    {SpanCategory::numeric, "numeric"},
}};

constexpr std::array<std::string_view, 12> kMonths{
    "january", "february", "march",     "april",   "may",      "june",
    "july",    "august",   "september", "october", "november", "december"};

bool starts_upper(std::string_view text, ByteRange span) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  auto pos = static_cast<int32_t>(span.begin);
  UChar32 c = 0;
  U8_NEXT(bytes, pos, static_cast<int32_t>(text.size()), c);
  return c >= 0 && u_isupper(c);
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_month(std::string_view token) {
  return std::find(kMonths.begin(), kMonths.end(), token) != kMonths.end();
}

std::string_view gap(std::string_view text, const TokenSeq& seq, std::size_t i) {
  return text.substr(seq.source_spans[i].end,
                     seq.source_spans[i + 1].begin - seq.source_spans[i].end);
}

bool sentence_initial(std::string_view text, const TokenSeq& seq, std::size_t i) {
  if (i == 0) return true;
  auto before = trim(text.substr(seq.source_spans[i - 1].end,
                                 seq.source_spans[i].begin - seq.source_spans[i - 1].end));
  if (before.empty()) return false;
  const char last = before.back();
  return last == '.' || last == '!' || last == '?' || last == ':' || last == '"';
}

bool capitalized_word(std::string_view text, const TokenSeq& seq, std::size_t i) {
  return !all_digits(seq.tokens[i]) && starts_upper(text, seq.source_spans[i]);
}

void validate_selection_inputs(const Document& doc, const std::vector<SalientSpan>& spans, int k) {
  if (k < 1 || k > kMaxMasks) {
    throw InvalidArgument("k must satisfy 0 < k < 5, got " + std::to_string(k));
  }
  if (static_cast<std::size_t>(k) > spans.size()) {
    throw InvalidArgument("k=" + std::to_string(k) + " exceeds the " +
                          std::to_string(spans.size()) + " available spans");
  }
  if (doc.text.find(kMaskToken) != std::string::npos) {
    throw InvalidArgument("document '" + doc.doc_id + "' already contains the mask literal");
  }
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.range.end > doc.text.size() || s.range.begin >= s.range.end ||
        doc.text.compare(s.range.begin, s.range.size(), s.surface) != 0) {
      throw InvalidArgument("span '" + s.surface + "' does not match the document text");
    }
    if (i > 0 && s.range.begin < prev_end) {
      throw InvalidArgument("spans overlap or are out of document order at '" + s.surface + "'");
    }
    prev_end = s.range.end;
  }
}

std::string build_context(const Document& doc, const std::vector<SalientSpan>& spans,
                          const std::vector<bool>& masked) {
  std::string out;
  out.reserve(doc.text.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!masked[i]) continue;
    out.append(doc.text, cursor, spans[i].range.begin - cursor);
    out.append(kMaskToken);
    cursor = spans[i].range.end;
  }
  out.append(doc.text, cursor, std::string::npos);
  return out;
}

MaskedSample assemble(const Document& doc, const std::vector<SalientSpan>& spans,
                      const std::vector<bool>& masked, int k, MaskStrategy strategy,
                      std::int64_t seed, std::optional<std::string> sample_id) {
  MaskedSample sample;
  sample.doc_id = doc.doc_id;
  sample.context = build_context(doc, spans, masked);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (masked[i]) sample.gold_spans.push_back(spans[i].surface);
  }
  sample.k = k;
  sample.strategy = strategy;
  sample.seed = seed;
  if (sample_id) {
    sample.sample_id = std::move(*sample_id);
  } else {
    sample.sample_id = doc.doc_id + "/" + std::string(to_string(strategy)) + "/k" +
                       std::to_string(k) + "/s" + std::to_string(seed);
  }
  return sample;
}

}  // namespace

std::string_view to_string(SpanCategory category) {
  for (const auto& [value, name] : kCategoryNames) {
    if (value == category) return name;
  }
  return "entity";
}

SpanCategory span_category_from_string(std::string_view name) {
  for (const auto& [value, n] : kCategoryNames) {
    if (n == name) return value;
  }
  throw InvalidArgument("unknown span category '" + std::string(name) + "'");
}

std::string_view to_string(MaskStrategy strategy) {
  return strategy == MaskStrategy::random ? "random" : "ppl_greedy";
}

MaskStrategy mask_strategy_from_string(std::string_view name) {
  if (name == "random") return MaskStrategy::random;
  if (name == "ppl_greedy") return MaskStrategy::ppl_greedy;
  throw InvalidArgument("unknown mask strategy '" + std::string(name) + "'");
}

std::vector<SpanCandidate> HeuristicExtractor::propose(const Document& doc) const {
  const std::string_view text = doc.text;
  const auto seq = tokenize(text);
  std::vector<SpanCandidate> out;
  auto emit = [&](std::size_t first, std::size_t last, SpanCategory category) {
    const auto begin = seq.source_spans[first].begin;
    const auto end = seq.source_spans[last].end;
    out.push_back({begin, std::string(text.substr(begin, end - begin)), category});
  };

  const std::size_t n = seq.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tok = seq.tokens[i];

    // Month D, YYYY / Month YYYY
    if (is_month(tok) && starts_upper(text, seq.source_spans[i]) && i + 1 < n) {
      const auto g1 = gap(text, seq, i);
      if (g1 == " " && all_digits(seq.tokens[i + 1])) {
        if (seq.tokens[i + 1].size() == 4) {
          emit(i, i + 1, SpanCategory::date);
        } else if (seq.tokens[i + 1].size() <= 2 && i + 2 < n && all_digits(seq.tokens[i + 2]) &&
                   seq.tokens[i + 2].size() == 4) {
          const auto g2 = gap(text, seq, i + 1);
          if (g2 == ", " || g2 == " ") emit(i, i + 2, SpanCategory::date);
        }
      }
    }

    if (all_digits(tok)) {
      std::size_t last = i;
      // 3518.17 and 1,000,000 stay together.
      while (last + 1 < n && all_digits(seq.tokens[last + 1]) &&
             (gap(text, seq, last) == "." || gap(text, seq, last) == ",")) {
        ++last;
      }
      const bool year = last == i && tok.size() == 4 && tok >= "1000" && tok <= "2099";
      emit(i, last, year ? SpanCategory::date : SpanCategory::numeric);
      i = last;
      continue;
    }

    if (capitalized_word(text, seq, i)) {
      std::size_t last = i;
      while (last + 1 < n) {
        if (gap(text, seq, last) == " " && capitalized_word(text, seq, last + 1)) {
          ++last;
        } else if (last + 2 < n && seq.tokens[last + 1] == "of" && gap(text, seq, last) == " " &&
                   gap(text, seq, last + 1) == " " && capitalized_word(text, seq, last + 2)) {
          last += 2;
        } else {
          break;
        }
      }
      if (last > i) {
        emit(i, last, SpanCategory::entity);
      } else if (!sentence_initial(text, seq, i)) {
        emit(i, i, SpanCategory::term);
      }
      i = last;
    }
  }
  return out;
}

ExtractionResult extract_salient_spans(const Document& doc, const SpanExtractor& extractor) {
  ExtractionResult result;
  std::vector<SalientSpan> verified;
  for (auto& cand : extractor.propose(doc)) {
    const bool fits = !cand.surface.empty() && cand.offset <= doc.text.size() &&
                      cand.surface.size() <= doc.text.size() - cand.offset &&
                      doc.text.compare(cand.offset, cand.surface.size(), cand.surface) == 0;
    if (!fits) {
      result.warnings.push_back("rejected span '" + cand.surface + "' at offset " +
                                std::to_string(cand.offset) + ": not present in document '" +
                                doc.doc_id + "'");
      continue;
    }
    verified.push_back({{cand.offset, cand.offset + cand.surface.size()},
                        std::move(cand.surface),
                        cand.category});
  }
  std::stable_sort(verified.begin(), verified.end(), [](const auto& a, const auto& b) {
    if (a.range.begin != b.range.begin) return a.range.begin < b.range.begin;
    return a.range.size() > b.range.size();
  });
  for (auto& span : verified) {
    if (!result.spans.empty() && span.range.begin < result.spans.back().range.end) continue;
    result.spans.push_back(std::move(span));
  }
  return result;
}

std::string reconstruct(const MaskedSample& sample) {
  std::string out;
  std::size_t cursor = 0;
  std::size_t next_gold = 0;
  for (auto pos = sample.context.find(kMaskToken); pos != std::string::npos;
       pos = sample.context.find(kMaskToken, cursor)) {
    if (next_gold >= sample.gold_spans.size()) break;
    out.append(sample.context, cursor, pos - cursor);
    out.append(sample.gold_spans[next_gold++]);
    cursor = pos + kMaskToken.size();
  }
  out.append(sample.context, cursor, std::string::npos);
  return out;
}

void validate_sample(const MaskedSample& sample, std::string_view original) {
  if (sample.k < 1 || sample.k > kMaxMasks) {
    throw InvalidArgument("sample '" + sample.sample_id + "': k must satisfy 0 < k < 5");
  }
  const auto masks = count_occurrences(sample.context, kMaskToken);
  if (masks != static_cast<std::size_t>(sample.k) ||
      sample.gold_spans.size() != static_cast<std::size_t>(sample.k)) {
    throw InvalidArgument("sample '" + sample.sample_id + "': mask count " +
                          std::to_string(masks) + ", k " + std::to_string(sample.k) +
                          " and gold span count " + std::to_string(sample.gold_spans.size()) +
                          " disagree");
  }
  if (reconstruct(sample) != original) {
    throw InvalidArgument("sample '" + sample.sample_id + "' does not reconstruct its document");
  }
}

FrequencyScorer::FrequencyScorer(const DocumentStore& store) {
  for (const auto& doc : store.documents()) {
    for (auto& tok : tokenize_words(doc.text)) {
      ++counts_[tok];
      ++total_;
    }
  }
}

double FrequencyScorer::score(std::string_view, std::string_view candidate) const {
  double best = 0.0;
  for (const auto& tok : tokenize_words(candidate)) {
    auto it = counts_.find(tok);
    const double count = it == counts_.end() ? 0.0 : static_cast<double>(it->second);
    const double p = (count + 1.0) / (static_cast<double>(total_) + 1.0);
    best = std::max(best, -std::log(p));
  }
  return best;
}

MaskedSample select_masks_random(const Document& doc, const std::vector<SalientSpan>& spans,
                                 int k, std::int64_t seed, std::optional<std::string> sample_id) {
  validate_selection_inputs(doc, spans, k);

  std::vector<std::size_t> order(spans.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  // Partial Fisher-Yates: the first k slots become a uniform k-subset.
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, order.size() - i));
    std::swap(order[i], order[j]);
  }
  std::vector<bool> masked(spans.size(), false);
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) masked[order[i]] = true;

  return assemble(doc, spans, masked, k, MaskStrategy::random, seed, std::move(sample_id));
}

MaskedSample select_masks_ppl_greedy(const Document& doc, const std::vector<SalientSpan>& spans,
                                     int k, const SpanScorer& scorer,
                                     std::optional<std::string> sample_id) {
  validate_selection_inputs(doc, spans, k);

  std::vector<bool> masked(spans.size(), false);
  for (int round = 0; round < k; ++round) {
    std::optional<std::size_t> best;
    double best_score = 0.0;
    for (std::size_t i = 0; i < spans.size(); ++i) {
      if (masked[i]) continue;
      masked[i] = true;
      const auto context = build_context(doc, spans, masked);
      masked[i] = false;

      double s = 0.0;
      try {
        s = scorer.score(context, spans[i].surface);
      } catch (const std::exception& e) {
        throw InvalidArgument("scorer failed on span '" + spans[i].surface + "' at offset " +
                              std::to_string(spans[i].range.begin) + ": " + e.what());
      }
      if (!std::isfinite(s) || s < 0.0) {
        throw InvalidArgument("scorer returned invalid score for span '" + spans[i].surface +
                              "' at offset " + std::to_string(spans[i].range.begin));
      }
      if (!best || s > best_score) {
        best = i;
        best_score = s;
      }
    }
    masked[*best] = true;
  }
  return assemble(doc, spans, masked, k, MaskStrategy::ppl_greedy, 0, std::move(sample_id));
}

std::string render_ramp_prompt(const MaskedSample& sample) {
  std::string prompt = sample.context;
  prompt += '\n';
  prompt += kRampInstruction;
  return prompt;
}

std::string to_jsonl(const MaskedSample& sample) {
  nlohmann::ordered_json j;
  j["sample_id"] = sample.sample_id;
  j["doc_id"] = sample.doc_id;
  j["context"] = sample.context;
  j["gold_spans"] = sample.gold_spans;
  j["k"] = sample.k;
  j["strategy"] = to_string(sample.strategy);
  j["seed"] = sample.seed;
  return dump_compact(j);
}

MaskedSample masked_sample_from_json(std::string_view json_line, std::size_t line) {
  try {
    const auto j = nlohmann::json::parse(json_line);
    MaskedSample s;
    s.sample_id = j.at("sample_id").get<std::string>();
    s.doc_id = j.at("doc_id").get<std::string>();
    s.context = j.at("context").get<std::string>();
    s.gold_spans = j.at("gold_spans").get<std::vector<std::string>>();
    s.k = j.at("k").get<int>();
    s.strategy = mask_strategy_from_string(j.at("strategy").get<std::string>());
    s.seed = j.at("seed").get<std::int64_t>();
    validate_sample(s, reconstruct(s));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid masked sample: ") + e.what(), line);
  } catch (const InvalidArgument& e) {
    throw InputError(e.what(), line);
  }
}

std::vector<MaskedSample> load_masked_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open samples file " + path.string());
  std::vector<MaskedSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    samples.push_back(masked_sample_from_json(line, line_no));
  }
  return samples;
}

}  // namespace rampforge
