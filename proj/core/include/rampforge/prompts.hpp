// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>

namespace rampforge::prompts {

// Placeholders are written {name}; the judge uses {question}, {target} and
// {predicted answer}.
extern const std::string_view kPlanner;    // {task}
extern const std::string_view kRewriter;   // {task} {history} {query}
extern const std::string_view kObserver;   // {task} {history}
extern const std::string_view kJudge;      // {question} {target} {predicted answer}

/// Single-pass substitution: text inserted for one placeholder is never
/// rescanned, so values may themselves contain braces.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

/// Throws InvalidArgument naming `template_name` and the first missing placeholder.
void require_placeholders(std::string_view tmpl, std::string_view template_name,
                          std::initializer_list<std::string_view> placeholders);

/// Reads a whole UTF-8 text file; throws InputError.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace rampforge::prompts
