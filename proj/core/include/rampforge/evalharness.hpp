// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rampforge/chat.hpp"
#include "rampforge/retrieval.hpp"
#include "rampforge/synthesis.hpp"

namespace rampforge {

struct QAExample {
  std::string qid;
  std::string question;
  std::vector<std::string> gold_answers;  // any-of

  friend bool operator==(const QAExample&, const QAExample&) = default;
};

struct LoadedQA {
  std::vector<QAExample> examples;
  std::vector<std::string> rejected;  // "line N: reason"
};

/// Reads {"id","question","answers":[...]} lines in order. Bad lines are
/// skipped and reported; throws InputError for an unreadable file or when no
/// line is valid.
LoadedQA load_qa(const std::filesystem::path& path);

struct ExampleResult {
  double recall = 0.0;
  int search_count = 0;
  bool format_ok = false;
  bool errored = false;  // transport failure; excluded from the mean
  std::string message;

  friend bool operator==(const ExampleResult&, const ExampleResult&) = default;
};

struct EvalReport {
  std::string dataset_name;
  std::size_t n = 0;  // scored examples
  double mean_recall = 0.0;
  std::size_t errored = 0;
  std::map<std::string, ExampleResult> per_example;
};

/// Highest token_recall of `predicted` against any alias.
double best_alias_recall(std::span<const std::string> gold_answers, std::string_view predicted);

/// Runs the search agent on every question and scores its final answer.
/// Examples run concurrently when parallelism > 1; the report never depends
/// on scheduling.
EvalReport evaluate_agent(std::string dataset_name, std::span<const QAExample> dataset,
                          ChatClient& agent, SearchTool& search, const AgentConfig& cfg,
                          int parallelism = 1);

enum class ReportFormat { table, json };

std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace rampforge
