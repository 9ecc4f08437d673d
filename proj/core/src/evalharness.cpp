// SPDX-License-Identifier: Apache-2.0
#include "rampforge/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "rampforge/corpus.hpp"
#include "rampforge/error.hpp"
#include "rampforge/rewards.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

QAExample parse_qa_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw InvalidArgument("not valid JSON");
  }
  if (!j.is_object()) throw InvalidArgument("expected a JSON object");
  for (const char* key : {"id", "question", "answers"}) {
    if (!j.contains(key)) throw InvalidArgument(std::string("missing \"") + key + "\"");
  }
  QAExample ex;
  const auto& id = j["id"];
  if (id.is_string()) {
    ex.qid = id.get<std::string>();
  } else if (id.is_number_integer()) {
    ex.qid = id.dump();
  } else {
    throw InvalidArgument("\"id\" must be a string or integer");
  }
  if (!j["question"].is_string()) throw InvalidArgument("\"question\" must be a string");
  ex.question = j["question"].get<std::string>();
  if (is_blank(ex.question)) throw InvalidArgument("empty question");
  const auto& answers = j["answers"];
  if (!answers.is_array()) throw InvalidArgument("\"answers\" must be an array");
  for (const auto& a : answers) {
    if (!a.is_string()) throw InvalidArgument("answers must be strings");
    if (!is_blank(a.get<std::string>())) ex.gold_answers.push_back(a.get<std::string>());
  }
  if (ex.gold_answers.empty()) throw InvalidArgument("no non-empty gold answer");
  return ex;
}

ExampleResult score_example(const QAExample& ex, ChatClient& agent, SearchTool& search,
                            const AgentConfig& cfg) {
  ExampleResult r;
  SynthesisOutcome outcome;
  try {
    outcome = run_search_agent(ex.question, ex.qid, agent, search, cfg);
  } catch (const Error& e) {
    r.errored = true;
    r.message = e.what();
    return r;
  }
  r.search_count = outcome.trajectory.search_count();
  r.message = outcome.message;
  if (outcome.status == SynthesisStatus::client_error) {
    r.errored = true;
    return r;
  }
  if (!outcome.ok() || !outcome.trajectory.final_answer()) return r;
  r.format_ok = true;
  r.recall = best_alias_recall(ex.gold_answers, *outcome.trajectory.final_answer());
  return r;
}

}  // namespace

LoadedQA load_qa(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  LoadedQA loaded;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      loaded.examples.push_back(parse_qa_line(line));
    } catch (const InvalidArgument& e) {
      loaded.rejected.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (loaded.examples.empty()) {
    throw InputError(path.string() + " has no valid QA examples");
  }
  return loaded;
}

double best_alias_recall(std::span<const std::string> gold_answers, std::string_view predicted) {
  double best = 0.0;
  for (const auto& gold : gold_answers) {
    if (tokenize_words(gold).empty()) continue;
    best = std::max(best, token_recall(gold, predicted));
  }
  return best;
}

EvalReport evaluate_agent(std::string dataset_name, std::span<const QAExample> dataset,
                          ChatClient& agent, SearchTool& search, const AgentConfig& cfg,
                          int parallelism) {
  std::vector<ExampleResult> results(dataset.size());
  const auto workers = static_cast<std::size_t>(std::max(1, parallelism));
  if (workers == 1 || dataset.size() <= 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      results[i] = score_example(dataset[i], agent, search, cfg);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, dataset.size()); ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < dataset.size(); i = next.fetch_add(1)) {
          results[i] = score_example(dataset[i], agent, search, cfg);
        }
      });
    }
  }

  EvalReport report;
  report.dataset_name = std::move(dataset_name);
  double sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& r = results[i];
    if (r.errored) {
      ++report.errored;
    } else {
      ++report.n;
      sum += r.recall;
    }
    report.per_example[dataset[i].qid] = r;
  }
  report.mean_recall = report.n == 0 ? 0.0 : sum / static_cast<double>(report.n);
  return report;
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::json) {
    nlohmann::json j;
    j["dataset_name"] = report.dataset_name;
    j["n"] = report.n;
    j["mean_recall"] = report.mean_recall;
    j["errored"] = report.errored;
    auto per = nlohmann::json::object();
    for (const auto& [qid, r] : report.per_example) {
      per[qid] = {{"recall", r.recall},
                  {"search_count", r.search_count},
                  {"format_ok", r.format_ok},
                  {"errored", r.errored}};
    }
    j["per_example"] = std::move(per);
    return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }

  std::string out = "dataset n recall\n";
  if (report.n == 0) {
    out += report.dataset_name + " n=0 \xe2\x80\x94\n";
  } else {
    char mean[32];
    std::snprintf(mean, sizeof mean, "%.2f", report.mean_recall * 100.0);
    out += report.dataset_name + " " + std::to_string(report.n) + " " + mean + "\n";
  }
  if (report.errored > 0) out += "errored " + std::to_string(report.errored) + "\n";
  return out;
}

}  // namespace rampforge
