// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rampforge/chat.hpp"
#include "rampforge/error.hpp"

namespace rampforge {

/// Length-penalty strictness: alpha scales, beta sets the free length ratio,
/// gamma caps the log term.
struct PenaltyParams {
  double alpha = 0.2;
  double beta = 8.0;
  double gamma = 4.0;

  /// Throws InvalidArgument unless alpha >= 0, beta > 0, gamma > 0.
  void validate() const;
};

struct ClipParams {
  double eps_low = 0.2;
  double eps_high = 0.28;
};

/// 1 iff the response parses as a trajectory with at least one think block
/// and a terminal answer.
int format_reward(std::string_view full_response);

/// Final answer of a well-formed response, empty otherwise.
std::string extract_prediction(std::string_view full_response);

/// |tokens(predicted) ∩ tokens(gold)| / |tokens(gold)| with multiset
/// (clipped count) intersection. Throws InvalidArgument if gold has no tokens.
double token_recall(std::string_view gold, std::string_view predicted);

/// alpha * min(max(log2(pred_len / (beta * gold_len)), 0), gamma); zero when
/// pred_len is zero. Lengths are token counts.
double length_penalty(std::size_t pred_len, std::size_t gold_len, const PenaltyParams& p);

/// token_recall minus length_penalty on the canonical token counts.
double penalized_recall(std::string_view gold, std::string_view predicted,
                        const PenaltyParams& p = {});

struct JudgeReward {
  int score = 0;
  bool unparseable = false;
};

/// 1 for verdict "A", 0 otherwise; unparseable verdicts are flagged.
JudgeReward judge_reward(std::string_view question, std::string_view gold,
                         std::string_view predicted, ChatClient& judge,
                         std::string_view judge_prompt);

enum class AnswerMode { recall, penalized, judge };

std::string_view to_string(AnswerMode mode);
AnswerMode answer_mode_from_string(std::string_view name);

struct RewardBreakdown {
  int format = 0;
  double answer = 0.0;
  double total = 0.0;
  bool judge_unparseable = false;
};

/// 0.5 * format + 0.5 * answer.
RewardBreakdown combine_rewards(int format, double answer);

struct RewardDeps {
  PenaltyParams penalty;
  ChatClient* judge = nullptr;  // required for AnswerMode::judge
  std::string judge_prompt;     // required for AnswerMode::judge
  std::string question;         // shown to the judge
};

/// Scores a full response. The prediction is taken from the answer block and
/// is empty when the format check fails; an empty prediction earns 0 without
/// consulting the judge.
RewardBreakdown hybrid_reward(std::string_view full_response, std::string_view gold,
                              AnswerMode mode, const RewardDeps& deps);

class DegenerateGroup : public Error {
 public:
  using Error::Error;
};

struct GroupAdvantage {
  std::vector<double> rewards;
  std::vector<double> advantages;
  double eps_low = 0.2;
  double eps_high = 0.28;
};

/// (R_i - mean) / population std. Throws DegenerateGroup when all rewards
/// are equal and InvalidArgument for fewer than two rewards.
GroupAdvantage group_advantages(std::span<const double> rewards, ClipParams clip = {});

/// min(ratio * adv, clip(ratio, 1 - eps_low, 1 + eps_high) * adv).
/// Throws InvalidArgument for a non-positive ratio.
double clipped_objective_term(double ratio, double advantage, ClipParams clip = {});

}  // namespace rampforge
