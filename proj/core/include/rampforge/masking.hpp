// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rampforge/corpus.hpp"

namespace rampforge {

inline constexpr std::string_view kMaskToken = "[mask]";
inline constexpr std::string_view kRampInstruction =
    "Fill in all the [mask] and output the whole paragraph without changing its format.";
inline constexpr int kMaxMasks = 4;

enum class SpanCategory { entity, date, ontology, term, numeric };

std::string_view to_string(SpanCategory category);
SpanCategory span_category_from_string(std::string_view name);

struct SalientSpan {
  ByteRange range;
  std::string surface;
  SpanCategory category = SpanCategory::entity;
};

/// What an extractor proposes; verified against the document before use.
struct SpanCandidate {
  std::size_t offset = 0;
  std::string surface;
  SpanCategory category = SpanCategory::entity;
};

class SpanExtractor {
 public:
  virtual ~SpanExtractor() = default;
  virtual std::vector<SpanCandidate> propose(const Document& doc) const = 0;
};

/// Deterministic rule-based extractor:
///   - runs of two or more capitalized words -> entity
///   - "Month D, YYYY" and standalone years 1000-2099 -> date
///   - other digit groups (with optional decimals) -> numeric
///   - a lone capitalized word that does not start a sentence -> term
class HeuristicExtractor final : public SpanExtractor {
 public:
  std::vector<SpanCandidate> propose(const Document& doc) const override;
};

struct ExtractionResult {
  std::vector<SalientSpan> spans;  // document order, non-overlapping
  std::vector<std::string> warnings;
};

ExtractionResult extract_salient_spans(const Document& doc, const SpanExtractor& extractor);

enum class MaskStrategy { random, ppl_greedy };

std::string_view to_string(MaskStrategy strategy);
MaskStrategy mask_strategy_from_string(std::string_view name);

struct MaskedSample {
  std::string sample_id;
  std::string doc_id;
  std::string context;
  std::vector<std::string> gold_spans;
  int k = 0;
  MaskStrategy strategy = MaskStrategy::random;
  std::int64_t seed = 0;

  friend bool operator==(const MaskedSample&, const MaskedSample&) = default;
};

/// Substitutes gold spans back into the masks in order.
std::string reconstruct(const MaskedSample& sample);

/// Checks the mask-count law and that reconstruction yields `original`.
/// Throws InvalidArgument describing the first violation.
void validate_sample(const MaskedSample& sample, std::string_view original);

/// Scores how hard a span is to restore. `context` carries "[mask]" at every
/// previously selected span and at the candidate itself.
class SpanScorer {
 public:
  virtual ~SpanScorer() = default;
  virtual double score(std::string_view context, std::string_view candidate) const = 0;
};

/// Negative log corpus frequency of the candidate's rarest token, add-one
/// smoothed so that unseen tokens stay finite. Ignores the context.
class FrequencyScorer final : public SpanScorer {
 public:
  explicit FrequencyScorer(const DocumentStore& store);
  double score(std::string_view context, std::string_view candidate) const override;

 private:
  std::unordered_map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

/// Uniformly picks k of the spans. Deterministic per (doc, spans, k, seed).
MaskedSample select_masks_random(const Document& doc, const std::vector<SalientSpan>& spans,
                                 int k, std::int64_t seed,
                                 std::optional<std::string> sample_id = std::nullopt);

/// k greedy rounds, each masking the highest-scoring still-unmasked span
/// (earlier offset wins ties). Scorer exceptions abort with the span named.
MaskedSample select_masks_ppl_greedy(const Document& doc, const std::vector<SalientSpan>& spans,
                                     int k, const SpanScorer& scorer,
                                     std::optional<std::string> sample_id = std::nullopt);

/// Masked context followed by the fill-in instruction on its own line.
std::string render_ramp_prompt(const MaskedSample& sample);

std::string to_jsonl(const MaskedSample& sample);
MaskedSample masked_sample_from_json(std::string_view json_line, std::size_t line = 0);
std::vector<MaskedSample> load_masked_samples(const std::filesystem::path& path);

}  // namespace rampforge
