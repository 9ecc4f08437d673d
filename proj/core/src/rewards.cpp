// SPDX-License-Identifier: Apache-2.0
#include "rampforge/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "rampforge/corpus.hpp"
#include "rampforge/judge.hpp"
#include "rampforge/trajectory.hpp"

namespace rampforge {

namespace {

std::size_t multiset_overlap(const std::vector<std::string>& gold,
                             const std::vector<std::string>& predicted) {
  std::unordered_map<std::string_view, std::size_t> remaining;
  for (const auto& tok : gold) ++remaining[tok];
  std::size_t common = 0;
  for (const auto& tok : predicted) {
    auto it = remaining.find(tok);
    if (it != remaining.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  return common;
}

}  // namespace

void PenaltyParams::validate() const {
  if (!(alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
}

int format_reward(std::string_view full_response) {
  try {
    const auto t = parse_trajectory(full_response);
    const bool has_think =
        std::any_of(t.segments().begin(), t.segments().end(),
                    [](const auto& s) { return s.kind == SegmentKind::think; });
    return has_think && t.has_answer() ? 1 : 0;
  } catch (const FormatError&) {
    return 0;
  }
}

std::string extract_prediction(std::string_view full_response) {
  if (format_reward(full_response) == 0) return {};
  return *parse_trajectory(full_response).final_answer();
}

double token_recall(std::string_view gold, std::string_view predicted) {
  const auto gold_tokens = tokenize_words(gold);
  if (gold_tokens.empty()) throw InvalidArgument("gold answer has no tokens; recall is undefined");
  const auto common = multiset_overlap(gold_tokens, tokenize_words(predicted));
  return static_cast<double>(common) / static_cast<double>(gold_tokens.size());
}

double length_penalty(std::size_t pred_len, std::size_t gold_len, const PenaltyParams& p) {
  if (gold_len == 0) throw InvalidArgument("gold answer has no tokens; penalty is undefined");
  if (pred_len == 0) return 0.0;
  const double ratio =
      static_cast<double>(pred_len) / (p.beta * static_cast<double>(gold_len));
  return p.alpha * std::min(std::max(std::log2(ratio), 0.0), p.gamma);
}

double penalized_recall(std::string_view gold, std::string_view predicted,
                        const PenaltyParams& p) {
  const auto gold_tokens = tokenize_words(gold);
  if (gold_tokens.empty()) throw InvalidArgument("gold answer has no tokens; recall is undefined");
  const auto pred_tokens = tokenize_words(predicted);
  const double recall = static_cast<double>(multiset_overlap(gold_tokens, pred_tokens)) /
                        static_cast<double>(gold_tokens.size());
  return recall - length_penalty(pred_tokens.size(), gold_tokens.size(), p);
}

JudgeReward judge_reward(std::string_view question, std::string_view gold,
                         std::string_view predicted, ChatClient& judge,
                         std::string_view judge_prompt) {
  const auto outcome = ask_judge(judge, judge_prompt, question, gold, predicted);
  return {outcome.verdict == Verdict::correct ? 1 : 0, outcome.verdict == Verdict::unparseable};
}

std::string_view to_string(AnswerMode mode) {
  switch (mode) {
    case AnswerMode::recall: return "recall";
    case AnswerMode::penalized: return "penalized";
    case AnswerMode::judge: return "judge";
  }
  return "recall";
}

AnswerMode answer_mode_from_string(std::string_view name) {
  if (name == "recall") return AnswerMode::recall;
  if (name == "penalized") return AnswerMode::penalized;
  if (name == "judge") return AnswerMode::judge;
  throw InvalidArgument("unknown answer mode '" + std::string(name) + "'");
}

RewardBreakdown combine_rewards(int format, double answer) {
  return {format, answer, 0.5 * format + 0.5 * answer, false};
}

RewardBreakdown hybrid_reward(std::string_view full_response, std::string_view gold,
                              AnswerMode mode, const RewardDeps& deps) {
  if (mode == AnswerMode::judge && deps.judge == nullptr) {
    throw InvalidArgument("judge answer mode needs a judge client");
  }
  const int format = format_reward(full_response);
  const std::string prediction = format == 1 ? extract_prediction(full_response) : std::string{};

  double answer = 0.0;
  bool unparseable = false;
  switch (mode) {
    case AnswerMode::recall:
      answer = token_recall(gold, prediction);
      break;
    case AnswerMode::penalized:
      answer = penalized_recall(gold, prediction, deps.penalty);
      break;
    case AnswerMode::judge:
      if (!prediction.empty()) {
        const auto r = judge_reward(deps.question, gold, prediction, *deps.judge, deps.judge_prompt);
        answer = r.score;
        unparseable = r.unparseable;
      }
      break;
  }
  auto breakdown = combine_rewards(format, answer);
  breakdown.judge_unparseable = unparseable;
  return breakdown;
}

GroupAdvantage group_advantages(std::span<const double> rewards, ClipParams clip) {
  if (rewards.size() < 2) throw InvalidArgument("a group needs at least two rewards");
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    throw DegenerateGroup("all rewards in the group are equal");
  }
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double stddev = std::sqrt(var / n);
  if (!(stddev > 0.0)) throw DegenerateGroup("reward spread underflows to zero");

  GroupAdvantage g;
  g.rewards.assign(rewards.begin(), rewards.end());
  g.advantages.reserve(rewards.size());
  for (double r : rewards) g.advantages.push_back((r - mean) / stddev);
  g.eps_low = clip.eps_low;
  g.eps_high = clip.eps_high;
  return g;
}

double clipped_objective_term(double ratio, double advantage, ClipParams clip) {
  if (!(ratio > 0.0)) throw InvalidArgument("probability ratio must be positive");
  const double clipped = std::clamp(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

}  // namespace rampforge
