// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "rampforge/chat.hpp"

namespace rampforge {

enum class Verdict { correct, incorrect, unparseable };

/// "A" -> correct, "B" -> incorrect after trimming whitespace; anything else
/// is unparseable.
Verdict parse_verdict(std::string_view raw);

struct JudgeOutcome {
  Verdict verdict = Verdict::unparseable;
  std::string raw;
};

std::string render_judge_prompt(std::string_view tmpl, std::string_view question,
                                std::string_view target, std::string_view predicted);

/// Sends the rendered judge prompt as a single user message.
JudgeOutcome ask_judge(ChatClient& judge, std::string_view tmpl, std::string_view question,
                       std::string_view target, std::string_view predicted);

}  // namespace rampforge
