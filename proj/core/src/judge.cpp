// SPDX-License-Identifier: Apache-2.0
#include "rampforge/judge.hpp"

#include <vector>

#include "rampforge/prompts.hpp"
#include "text_util.hpp"

namespace rampforge {

Verdict parse_verdict(std::string_view raw) {
  const auto v = trim(raw);
  if (v == "A") return Verdict::correct;
  if (v == "B") return Verdict::incorrect;
  return Verdict::unparseable;
}

std::string render_judge_prompt(std::string_view tmpl, std::string_view question,
                                std::string_view target, std::string_view predicted) {
  return prompts::fill(tmpl, {{"question", std::string(question)},
                              {"target", std::string(target)},
                              {"predicted answer", std::string(predicted)}});
}

JudgeOutcome ask_judge(ChatClient& judge, std::string_view tmpl, std::string_view question,
                       std::string_view target, std::string_view predicted) {
  const std::vector<ChatMessage> messages{
      {"user", render_judge_prompt(tmpl, question, target, predicted)}};
  JudgeOutcome outcome;
  outcome.raw = judge.complete(messages);
  outcome.verdict = parse_verdict(outcome.raw);
  return outcome;
}

}  // namespace rampforge
