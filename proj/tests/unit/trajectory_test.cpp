// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "rampforge/error.hpp"
#include "rampforge/rewards.hpp"
#include "rampforge/trajectory.hpp"
#include "test_support.hpp"

namespace rampforge {
namespace {

using testing::TempDir;

std::size_t format_error_offset(std::string_view text) {
  try {
    parse_trajectory(text);
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "parsed: " << text;
  return std::string::npos;
}

TEST(RlTemplate, AppendsQuestion) {
  const auto a = render_rl_template("Who founded X?");
  EXPECT_NE(a.find("can call a search engine by"), std::string::npos);
  EXPECT_TRUE(a.ends_with("Question: Who founded X?"));
  const auto b = render_rl_template("Where is Y?");
  const auto prefix = a.substr(0, a.size() - std::string("Who founded X?").size());
  EXPECT_TRUE(b.starts_with(prefix));
  EXPECT_THROW(render_rl_template(""), InvalidArgument);
  EXPECT_THROW(render_rl_template("  \n"), InvalidArgument);
}

TEST(Parse, FiveSegments) {
  const auto t = parse_trajectory(
      "<think>a</think><search>q</search><information>r</information><think>b</think><answer>z</answer>");
  ASSERT_EQ(t.segments().size(), 5u);
  EXPECT_EQ(t.search_count(), 1);
  ASSERT_TRUE(t.final_answer());
  EXPECT_EQ(*t.final_answer(), "z");
  EXPECT_EQ(t.segments()[2].kind, SegmentKind::information);
  EXPECT_EQ(t.segments()[2].byte_range, (ByteRange{47, 48}));
}

TEST(Parse, HoelscherFixture) {
  const auto text = testing::read_file(testing::fixture_path("hoelscher_response.txt"));
  const auto t = parse_trajectory(text);
  EXPECT_EQ(t.search_count(), 3);
  ASSERT_TRUE(t.final_answer());
  EXPECT_NE(t.final_answer()->find("Washington Redskins"), std::string::npos);
  EXPECT_EQ(format_reward(text), 1);
  for (const auto& seg : t.segments()) {
    EXPECT_EQ(text.substr(seg.byte_range.begin, seg.byte_range.size()), seg.text);
  }
  const auto canonical = serialize_trajectory(t);
  const auto again = parse_trajectory(canonical);
  ASSERT_EQ(again.segments().size(), t.segments().size());
  for (std::size_t i = 0; i < t.segments().size(); ++i) {
    EXPECT_EQ(again.segments()[i].kind, t.segments()[i].kind);
    EXPECT_EQ(again.segments()[i].text, t.segments()[i].text);
  }
  EXPECT_EQ(serialize_trajectory(again), canonical);
}

TEST(Parse, Errors) {
  EXPECT_EQ(format_error_offset("<answer>z</answer><think>a</think>"), 18u);
  EXPECT_EQ(format_error_offset("<think>a</think><answer>x</answer><answer>y</answer>"), 34u);
  EXPECT_EQ(format_error_offset("<think>a</think> junk <answer>z</answer>"), 17u);
  EXPECT_EQ(format_error_offset("<think>a</think><information>r</information>"), 16u);
  EXPECT_EQ(format_error_offset("<information>r</information>"), 0u);
  EXPECT_EQ(format_error_offset("<think>never closed"), 0u);
  EXPECT_EQ(format_error_offset("</think>"), 0u);
  format_error_offset("<think>a<search>b</search></think>");
  format_error_offset("<think>a</search></think>");
  format_error_offset("<thinking>a</thinking>");
}

TEST(Parse, WhitespaceBetweenBlocksIsAllowed) {
  const auto t = parse_trajectory("\n <think>a</think>\n\t<answer> z \n</answer>\n");
  ASSERT_TRUE(t.final_answer());
  EXPECT_EQ(*t.final_answer(), "z");
  EXPECT_EQ(t.segments()[1].text, " z \n");
  EXPECT_EQ(parse_trajectory("").segments().size(), 0u);
}

TEST(Serialize, NewlineSeparated) {
  Trajectory t("s");
  t.append(SegmentKind::think, "a");
  t.append(SegmentKind::answer, "z");
  EXPECT_EQ(serialize_trajectory(t), "<think>a</think>\n<answer>z</answer>");
}

TEST(Serialize, AppendEnforcesGrammar) {
  Trajectory t;
  EXPECT_THROW(t.append(SegmentKind::information, "r"), FormatError);
  t.append(SegmentKind::think, "a");
  EXPECT_THROW(t.append(SegmentKind::think, "x<think>y"), FormatError);
  t.append(SegmentKind::answer, "z");
  EXPECT_THROW(t.append(SegmentKind::think, "late"), FormatError);
}

TEST(Serialize, RoundTripsGeneratedTrajectories) {
  std::uint64_t state = 5;
  for (int i = 0; i < 300; ++i) {
    auto t = testing::random_trajectory(state);
    const auto text = serialize_trajectory(t);
    auto back = parse_trajectory(text);
    back.set_sample_id(t.sample_id());
    ASSERT_EQ(back, t) << text;
    EXPECT_EQ(serialize_trajectory(back), text);
  }
}

TEST(LossMaskTest, NoInformationNoRanges) {
  const auto t = parse_trajectory("<think>a</think><answer>z</answer>");
  EXPECT_TRUE(retrieved_spans(t).excluded_ranges.empty());
}

TEST(LossMaskTest, WidthsAndSlices) {
  Trajectory t;
  t.append(SegmentKind::think, "go");
  t.append(SegmentKind::search, "q1");
  t.append(SegmentKind::information, std::string(10, 'x'));
  t.append(SegmentKind::search, "q2");
  t.append(SegmentKind::information, std::string(20, 'y'));
  t.append(SegmentKind::answer, "done");
  const auto mask = retrieved_spans(t);
  ASSERT_EQ(mask.excluded_ranges.size(), 2u);
  EXPECT_EQ(mask.excluded_ranges[0].size(), 10u);
  EXPECT_EQ(mask.excluded_ranges[1].size(), 20u);
  const auto text = serialize_trajectory(t);
  std::string excluded;
  for (const auto& r : mask.excluded_ranges) excluded += text.substr(r.begin, r.size());
  EXPECT_EQ(excluded, std::string(10, 'x') + std::string(20, 'y'));
}

TEST(LossMaskTest, RangesMatchParsedInformationSegments) {
  std::uint64_t state = 77;
  for (int i = 0; i < 200; ++i) {
    const auto t = testing::random_trajectory(state);
    const auto text = serialize_trajectory(t);
    const auto parsed = parse_trajectory(text);
    std::vector<ByteRange> info;
    for (const auto& seg : parsed.segments()) {
      if (seg.kind == SegmentKind::information) info.push_back(seg.byte_range);
    }
    EXPECT_EQ(retrieved_spans(t).excluded_ranges, info);
  }
}

TEST(Fuzz, ParserNeverCrashes) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> pieces{"<think>", "</think>", "<search>", "</search>",
                                        "<information>", "</information>", "<answer>",
                                        "</answer>", " ", "\n", "x", "<", ">", "/"};
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto n = rng() % 12;
    for (std::size_t j = 0; j < n; ++j) {
      if (rng() % 3 == 0) {
        s += static_cast<char>(rng() % 256);
      } else {
        s += pieces[rng() % pieces.size()];
      }
    }
    try {
      const auto t = parse_trajectory(s);
      EXPECT_EQ(parse_trajectory(serialize_trajectory(t)).segments().size(), t.segments().size());
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), s.size());
    }
  }
}

TEST(TrajectoryJson, RoundTripAndDisagreement) {
  std::uint64_t state = 3;
  const auto t = testing::random_trajectory(state);
  const auto line = to_jsonl(t);
  EXPECT_EQ(trajectory_from_json(line), t);
  EXPECT_THROW(trajectory_from_json(
                   R"({"sample_id":"s","segments":[{"kind":"think","text":"a"},{"kind":"answer","text":"z"}],"final_answer":"other"})",
                   3),
               InputError);
  TempDir dir;
  testing::write_file(dir / "t.jsonl", line + "\n\n" + line + "\n");
  EXPECT_EQ(load_trajectories(dir / "t.jsonl").size(), 2u);
  testing::write_file(dir / "bad.jsonl", line + "\n{\"segments\":[]}\n");
  try {
    load_trajectories(dir / "bad.jsonl");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TagLiterals, Neutralize) {
  EXPECT_TRUE(contains_tag_literal("a </answer> b"));
  EXPECT_FALSE(contains_tag_literal("a < answer > b"));
  const auto safe = neutralize_tags("x<think>y</information>");
  EXPECT_FALSE(contains_tag_literal(safe));
  EXPECT_EQ(safe, "x&lt;think>y&lt;/information>");
}

}  // namespace
}  // namespace rampforge
