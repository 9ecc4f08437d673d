// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "rampforge/error.hpp"
#include "rampforge/masking.hpp"
#include "test_support.hpp"

namespace rampforge {
namespace {

using testing::TempDir;

std::size_t count_masks(std::string_view text) {
  std::size_t n = 0;
  for (auto pos = text.find(kMaskToken); pos != std::string_view::npos;
       pos = text.find(kMaskToken, pos + 1)) {
    ++n;
  }
  return n;
}

// Spans for the given surfaces, located left to right.
std::vector<SalientSpan> spans_for(const Document& doc, const std::vector<std::string>& surfaces) {
  std::vector<SalientSpan> out;
  std::size_t from = 0;
  for (const auto& s : surfaces) {
    const auto pos = doc.text.find(s, from);
    if (pos == std::string::npos) throw std::logic_error("surface not found: " + s);
    out.push_back({{pos, pos + s.size()}, s, SpanCategory::entity});
    from = pos + s.size();
  }
  return out;
}

Document hoelscher_doc() {
  const auto line = testing::read_lines(testing::fixture_path("hoelscher_doc.jsonl")).at(0);
  const auto j = nlohmann::json::parse(line);
  return {j.at("id"), j.at("title"), j.at("text")};
}

class MapScorer final : public SpanScorer {
 public:
  explicit MapScorer(std::map<std::string, double> scores) : scores_(std::move(scores)) {}
  double score(std::string_view, std::string_view candidate) const override {
    return scores_.at(std::string(candidate));
  }

 private:
  std::map<std::string, double> scores_;
};

class FakeExtractor final : public SpanExtractor {
 public:
  explicit FakeExtractor(std::vector<SpanCandidate> c) : c_(std::move(c)) {}
  std::vector<SpanCandidate> propose(const Document&) const override { return c_; }

 private:
  std::vector<SpanCandidate> c_;
};

const Document kFive{"five", "", "Alpha Beta met Gamma Delta in 1901 near Epsilon Zeta with Eta Theta and Iota Kappa."};
const std::vector<std::string> kFiveSurfaces{"Alpha Beta", "Gamma Delta", "1901", "Epsilon Zeta",
                                             "Eta Theta"};

TEST(Extract, HeuristicFindsEntityAndYear) {
  const Document doc{"h", "", "David Hoelscher played for the Washington Redskins in 1998."};
  const auto result = extract_salient_spans(doc, HeuristicExtractor{});
  EXPECT_TRUE(result.warnings.empty());
  bool entity = false;
  bool year = false;
  for (const auto& s : result.spans) {
    EXPECT_EQ(doc.text.substr(s.range.begin, s.range.size()), s.surface);
    if (s.surface == "Washington Redskins" && s.category == SpanCategory::entity) entity = true;
    if (s.surface == "1998" && s.category == SpanCategory::date) year = true;
  }
  EXPECT_TRUE(entity);
  EXPECT_TRUE(year);
}

TEST(Extract, NoCapitalsOrDigitsGivesNothing) {
  const Document doc{"l", "", "all lowercase words and no numbers here."};
  const auto result = extract_salient_spans(doc, HeuristicExtractor{});
  EXPECT_TRUE(result.spans.empty());
  EXPECT_TRUE(result.warnings.empty());
}

TEST(Extract, RejectsMisplacedSurfaceKeepsTheRest) {
  const Document doc{"abc", "", "abc"};
  FakeExtractor fake({{0, "XYZ", SpanCategory::term}, {1, "bc", SpanCategory::term}});
  const auto result = extract_salient_spans(doc, fake);
  ASSERT_EQ(result.spans.size(), 1u);
  EXPECT_EQ(result.spans[0].surface, "bc");
  ASSERT_EQ(result.warnings.size(), 1u);
  EXPECT_NE(result.warnings[0].find("XYZ"), std::string::npos);
}

TEST(Extract, OverlapsKeepEarlierThenLonger) {
  const Document doc{"o", "", "New York City Hall"};
  FakeExtractor fake({{4, "York City", SpanCategory::entity},
                      {0, "New York", SpanCategory::entity},
                      {0, "New York City", SpanCategory::entity},
                      {14, "Hall", SpanCategory::term}});
  const auto result = extract_salient_spans(doc, fake);
  ASSERT_EQ(result.spans.size(), 2u);
  EXPECT_EQ(result.spans[0].surface, "New York City");
  EXPECT_EQ(result.spans[1].surface, "Hall");
}

TEST(Extract, HoelscherParagraphSpansAreOrderedAndDisjoint) {
  const auto doc = hoelscher_doc();
  const auto spans = extract_salient_spans(doc, HeuristicExtractor{}).spans;
  ASSERT_GE(spans.size(), 4u);
  for (std::size_t i = 1; i < spans.size(); ++i) {
    EXPECT_LE(spans[i - 1].range.end, spans[i].range.begin);
  }
  const auto has = [&](std::string_view s) {
    return std::any_of(spans.begin(), spans.end(), [&](const auto& x) { return x.surface == s; });
  };
  EXPECT_TRUE(has("National Football League"));
  EXPECT_TRUE(has("Eastern Kentucky University"));
  EXPECT_TRUE(has("November 27, 1975"));
}

TEST(SelectRandom, TwoOfFive) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  const auto s = select_masks_random(kFive, spans, 2, 7);
  EXPECT_EQ(count_masks(s.context), 2u);
  EXPECT_EQ(s.gold_spans.size(), 2u);
  EXPECT_EQ(reconstruct(s), kFive.text);
  EXPECT_NO_THROW(validate_sample(s, kFive.text));
  EXPECT_EQ(s.strategy, MaskStrategy::random);
  EXPECT_EQ(s.seed, 7);
}

TEST(SelectRandom, RejectsBadK) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  try {
    select_masks_random(kFive, spans, 5, 1);
    FAIL() << "k=5 accepted";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("0 < k < 5"), std::string::npos);
  }
  EXPECT_THROW(select_masks_random(kFive, spans, 0, 1), InvalidArgument);
  const std::vector<SalientSpan> two(spans.begin(), spans.begin() + 2);
  EXPECT_THROW(select_masks_random(kFive, two, 3, 1), InvalidArgument);
}

TEST(SelectRandom, DeterministicPerSeed) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  EXPECT_EQ(select_masks_random(kFive, spans, 3, 42), select_masks_random(kFive, spans, 3, 42));
}

TEST(SelectRandom, GoldSpansFollowDocumentOrder) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  for (std::int64_t seed = 0; seed < 50; ++seed) {
    const auto s = select_masks_random(kFive, spans, 4, seed);
    std::vector<std::size_t> pos;
    for (const auto& g : s.gold_spans) pos.push_back(kFive.text.find(g));
    EXPECT_TRUE(std::is_sorted(pos.begin(), pos.end()));
  }
}

TEST(SelectRandom, SeededUniformity) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  constexpr int kDraws = 10000;
  std::map<std::string, int> hits;
  for (int seed = 0; seed < kDraws; ++seed) {
    for (const auto& g : select_masks_random(kFive, spans, 2, seed).gold_spans) ++hits[g];
  }
  for (const auto& surface : kFiveSurfaces) {
    const double freq = static_cast<double>(hits[surface]) / kDraws;
    EXPECT_NEAR(freq, 2.0 / 5.0, 0.05) << surface;
  }
}

TEST(SelectPpl, ConstantScoresPickTopTwo) {
  const Document doc{"p", "", "Aa Bb and Cc Dd and Ee Ff."};
  const auto spans = spans_for(doc, {"Aa Bb", "Cc Dd", "Ee Ff"});
  MapScorer scorer({{"Aa Bb", 5.0}, {"Cc Dd", 1.0}, {"Ee Ff", 3.0}});
  const auto s = select_masks_ppl_greedy(doc, spans, 2, scorer);
  EXPECT_EQ(s.gold_spans, (std::vector<std::string>{"Aa Bb", "Ee Ff"}));
  EXPECT_EQ(s.context, "[mask] and Cc Dd and [mask].");
  EXPECT_EQ(s.strategy, MaskStrategy::ppl_greedy);
}

TEST(SelectPpl, TiesGoToEarliestOffset) {
  const Document doc{"p", "", "Aa Bb and Cc Dd and Ee Ff."};
  const auto spans = spans_for(doc, {"Aa Bb", "Cc Dd", "Ee Ff"});
  MapScorer scorer({{"Aa Bb", 2.0}, {"Cc Dd", 2.0}, {"Ee Ff", 2.0}});
  EXPECT_EQ(select_masks_ppl_greedy(doc, spans, 1, scorer).gold_spans,
            (std::vector<std::string>{"Aa Bb"}));
}

TEST(SelectPpl, RescoresEveryRound) {
  const Document doc{"p", "", "Aa Bb met Cc Dd and Ee Ff."};
  const auto spans = spans_for(doc, {"Aa Bb", "Cc Dd", "Ee Ff"});
  struct RoundScorer final : SpanScorer {
    double score(std::string_view context, std::string_view candidate) const override {
      if (candidate == "Aa Bb") return 5.0;
      if (candidate == "Ee Ff") return 3.0;
      // The first span is already masked only from round two on.
      return context.starts_with("[mask] met [mask]") ? 4.0 : 1.0;
    }
  } scorer;
  const auto s = select_masks_ppl_greedy(doc, spans, 2, scorer);
  EXPECT_EQ(s.gold_spans, (std::vector<std::string>{"Aa Bb", "Cc Dd"}));
}

TEST(SelectPpl, ScorerFailureNamesTheSpan) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  struct Failing final : SpanScorer {
    double score(std::string_view, std::string_view candidate) const override {
      if (candidate == "1901") throw std::runtime_error("backend down");
      return 1.0;
    }
  } failing;
  try {
    select_masks_ppl_greedy(kFive, spans, 1, failing);
    FAIL() << "scorer failure swallowed";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("'1901'"), std::string::npos);
  }
  struct Negative final : SpanScorer {
    double score(std::string_view, std::string_view) const override { return -1.0; }
  } negative;
  EXPECT_THROW(select_masks_ppl_greedy(kFive, spans, 1, negative), InvalidArgument);
  EXPECT_THROW(select_masks_ppl_greedy(kFive, spans, 5, negative), InvalidArgument);
}

TEST(SelectPpl, MatchesBruteForceBestSubset) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dist(0.0, 10.0);
  const std::vector<std::string> names{"Aa Aa", "Bb Bb", "Cc Cc", "Dd Dd",
                                       "Ee Ee", "Ff Ff", "Gg Gg", "Hh Hh"};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::string text;
    std::vector<std::string> surfaces(names.begin(), names.begin() + static_cast<long>(n));
    std::map<std::string, double> scores;
    for (const auto& s : surfaces) {
      text += s + " then ";
      scores[s] = dist(rng);
    }
    const Document doc{"bf", "", text};
    const auto spans = spans_for(doc, surfaces);
    const int k = 1 + static_cast<int>(rng() % std::min<std::size_t>(4, n));
    const auto got = select_masks_ppl_greedy(doc, spans, k, MapScorer(scores));

    double best_sum = -1.0;
    std::vector<std::string> best;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      if (std::popcount(mask) != k) continue;
      double sum = 0.0;
      std::vector<std::string> pick;
      for (std::size_t i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          sum += scores[surfaces[i]];
          pick.push_back(surfaces[i]);
        }
      }
      if (sum > best_sum) {
        best_sum = sum;
        best = pick;
      }
    }
    EXPECT_EQ(got.gold_spans, best) << "trial " << trial;
  }
}

TEST(FrequencyScorer, RarerTokensScoreHigher) {
  const auto store = testing::make_store({{"a", "", "common common common rare"}});
  const FrequencyScorer scorer(store);
  EXPECT_GT(scorer.score("", "rare"), scorer.score("", "common"));
  EXPECT_GT(scorer.score("", "unseen"), scorer.score("", "rare"));
  EXPECT_GE(scorer.score("", "common"), 0.0);
}

TEST(RenderPrompt, HoelscherKThree) {
  const auto doc = hoelscher_doc();
  const auto spans = spans_for(
      doc, {"National Football League", "Washington Redskins", "Eastern Kentucky University"});
  const auto s = select_masks_random(doc, spans, 3, 0, "hoelscher/k3");
  const auto prompt = render_ramp_prompt(s);
  EXPECT_TRUE(prompt.ends_with(
      "Fill in all the [mask] and output the whole paragraph without changing its format."));
  EXPECT_EQ(prompt, s.context + "\n" + std::string(kRampInstruction));
  EXPECT_EQ(count_masks(prompt), 4u);  // three masks plus the instruction's own
  EXPECT_EQ(render_ramp_prompt(s), prompt);
  EXPECT_EQ(s.sample_id, "hoelscher/k3");
}

TEST(RenderPrompt, SingleMaskBody) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  const auto s = select_masks_random(kFive, spans, 1, 3);
  const auto prompt = render_ramp_prompt(s);
  EXPECT_EQ(count_masks(prompt.substr(0, prompt.rfind('\n'))), 1u);
}

TEST(ValidateSample, CatchesBrokenSamples) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  auto s = select_masks_random(kFive, spans, 2, 1);
  auto extra = s;
  extra.gold_spans.push_back("x");
  EXPECT_THROW(validate_sample(extra, kFive.text), InvalidArgument);
  auto wrong = s;
  wrong.gold_spans[0] = "Nope";
  EXPECT_THROW(validate_sample(wrong, kFive.text), InvalidArgument);
  auto big = s;
  big.k = 5;
  EXPECT_THROW(validate_sample(big, kFive.text), InvalidArgument);
}

TEST(MaskedSampleJson, RoundTripAndErrors) {
  const auto spans = spans_for(kFive, kFiveSurfaces);
  const auto s = select_masks_random(kFive, spans, 3, 9);
  const auto line = to_jsonl(s);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(masked_sample_from_json(line), s);

  TempDir dir;
  testing::write_file(dir / "s.jsonl", line + "\n\n" + line + "\n{\"sample_id\":1}\n");
  try {
    load_masked_samples(dir / "s.jsonl");
    FAIL() << "bad line accepted";
  } catch (const InputError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  testing::write_file(dir / "ok.jsonl", line + "\n" + line + "\n");
  EXPECT_EQ(load_masked_samples(dir / "ok.jsonl").size(), 2u);
}

}  // namespace
}  // namespace rampforge
