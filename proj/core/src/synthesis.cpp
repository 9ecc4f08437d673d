// SPDX-License-Identifier: Apache-2.0
#include "rampforge/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "rampforge/error.hpp"
#include "rampforge/prompts.hpp"
#include "text_util.hpp"

namespace rampforge {

namespace {

class ProtocolError : public Error {
 public:
  using Error::Error;
};

struct AgentReply {
  std::string thought;
  std::optional<std::string> query;
  std::optional<std::string> answer;
};

AgentReply parse_agent_reply(std::string_view raw, std::string_view agent) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw ProtocolError(std::string(agent) + " reply contains no JSON object");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(raw.substr(open, close - open + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string(agent) + " reply is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ProtocolError(std::string(agent) + " reply is not a JSON object");

  auto field = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
      throw ProtocolError(std::string(agent) + " field \"" + key + "\" must be a string");
    }
    return it->get<std::string>();
  };
  AgentReply reply;
  reply.thought = field("thought").value_or("");
  reply.query = field("query");
  reply.answer = field("answer");
  if (reply.query && is_blank(*reply.query)) {
    throw ProtocolError(std::string(agent) + " returned an empty query");
  }
  return reply;
}

std::string ask(ChatClient& client, std::string prompt) {
  const std::vector<ChatMessage> messages{{"user", std::move(prompt)}};
  return client.complete(messages);
}

SynthesisOutcome finish(Trajectory t, SynthesisStatus status, std::string message = {}) {
  return {std::move(t), status, std::move(message)};
}

template <typename Body>
SynthesisOutcome guarded(Trajectory& t, Body&& body) {
  try {
    return body();
  } catch (const ClientError& e) {
    return finish(std::move(t), SynthesisStatus::client_error, e.what());
  } catch (const ProtocolError& e) {
    return finish(std::move(t), SynthesisStatus::protocol_error, e.what());
  } catch (const FormatError& e) {
    return finish(std::move(t), SynthesisStatus::format_error, e.what());
  }
}

std::string partition_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "partition_%03zu.jsonl", index);
  return buf;
}

}  // namespace

AgentConfig AgentConfig::defaults() {
  AgentConfig cfg;
  cfg.planner_prompt = std::string(prompts::kPlanner);
  cfg.rewriter_prompt = std::string(prompts::kRewriter);
  cfg.observer_prompt = std::string(prompts::kObserver);
  cfg.judge_prompt = std::string(prompts::kJudge);
  return cfg;
}

AgentConfig AgentConfig::from_directory(const std::filesystem::path& dir) {
  auto cfg = defaults();
  for (auto [name, slot] : {std::pair{"planner.txt", &cfg.planner_prompt},
                            std::pair{"rewriter.txt", &cfg.rewriter_prompt},
                            std::pair{"observer.txt", &cfg.observer_prompt},
                            std::pair{"judge.txt", &cfg.judge_prompt}}) {
    const auto path = dir / name;
    if (std::filesystem::exists(path)) *slot = prompts::read_text_file(path);
  }
  return cfg;
}

void AgentConfig::validate() const {
  if (max_steps < 1) throw InvalidArgument("max_steps must be at least 1");
  if (top_k < 1) throw InvalidArgument("top_k must be at least 1");
  prompts::require_placeholders(planner_prompt, "planner_prompt", {"task"});
  prompts::require_placeholders(rewriter_prompt, "rewriter_prompt", {"task", "history", "query"});
  prompts::require_placeholders(observer_prompt, "observer_prompt", {"task", "history"});
  prompts::require_placeholders(judge_prompt, "judge_prompt",
                                {"question", "target", "predicted answer"});
}

std::string_view to_string(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::ok: return "ok";
    case SynthesisStatus::step_limit: return "step_limit";
    case SynthesisStatus::client_error: return "client_error";
    case SynthesisStatus::protocol_error: return "protocol_error";
    case SynthesisStatus::format_error: return "format_error";
  }
  return "unknown";
}

std::string render_information(const std::vector<SearchHit>& hits) {
  std::string out = "\n";
  if (hits.empty()) out += "No results.\n";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    out += std::to_string(i + 1) + ". " + hits[i].title + ": " + hits[i].snippet + "\n";
  }
  return neutralize_tags(out);
}

SynthesisOutcome synthesize_multiagent(const MaskedSample& sample, ChatClient& client,
                                       SearchTool& search, const AgentConfig& cfg) {
  Trajectory t(sample.sample_id);
  return guarded(t, [&]() -> SynthesisOutcome {
    const auto task = render_ramp_prompt(sample);

    auto plan = parse_agent_reply(ask(client, prompts::fill(cfg.planner_prompt, {{"task", task}})),
                                  "planner");
    if (!plan.query) throw ProtocolError("planner reply has no \"query\"");
    t.append(SegmentKind::think, neutralize_tags(plan.thought));
    std::string candidate = *plan.query;

    while (true) {
      if (t.search_count() >= cfg.max_steps) {
        return finish(std::move(t), SynthesisStatus::step_limit,
                      "no answer after " + std::to_string(cfg.max_steps) + " searches");
      }
      auto rewrite = parse_agent_reply(
          ask(client, prompts::fill(cfg.rewriter_prompt, {{"task", task},
                                                          {"history", serialize_trajectory(t)},
                                                          {"query", candidate}})),
          "rewriter");
      if (!rewrite.query) throw ProtocolError("rewriter reply has no \"query\"");
      const auto query = neutralize_tags(*rewrite.query);
      t.append(SegmentKind::search, query);
      t.append(SegmentKind::information, render_information(search.search(query, cfg.top_k)));

      auto observe = parse_agent_reply(
          ask(client, prompts::fill(cfg.observer_prompt,
                                    {{"task", task}, {"history", serialize_trajectory(t)}})),
          "observer");
      if (observe.answer && observe.query) {
        throw ProtocolError("observer reply has both \"answer\" and \"query\"");
      }
      if (!observe.answer && !observe.query) {
        throw ProtocolError("observer reply has neither \"answer\" nor \"query\"");
      }
      t.append(SegmentKind::think, neutralize_tags(observe.thought));
      if (observe.answer) {
        t.append(SegmentKind::answer, neutralize_tags(*observe.answer));
        return finish(std::move(t), SynthesisStatus::ok);
      }
      candidate = *observe.query;
    }
  });
}

SynthesisOutcome run_search_agent(std::string_view question, std::string sample_id,
                                  ChatClient& model, SearchTool& search, const AgentConfig& cfg) {
  Trajectory t(std::move(sample_id));
  return guarded(t, [&]() -> SynthesisOutcome {
    std::vector<ChatMessage> messages{{"user", render_rl_template(question)}};
    constexpr std::string_view kSearchClose = "</search>";

    while (true) {
      const auto reply = model.complete(messages);
      const auto cut = reply.find(kSearchClose);
      const std::string turn =
          cut == std::string::npos ? reply : reply.substr(0, cut + kSearchClose.size());

      Trajectory part;
      try {
        part = parse_trajectory(turn);
      } catch (const FormatError& e) {
        throw FormatError(std::string("model output: ") + e.what(), e.offset());
      }
      for (const auto& seg : part.segments()) {
        if (seg.kind == SegmentKind::information) {
          throw FormatError("model emitted an <information> block", seg.byte_range.begin);
        }
        if (seg.kind == SegmentKind::search && t.search_count() >= cfg.max_steps) {
          return finish(std::move(t), SynthesisStatus::step_limit,
                        "no answer after " + std::to_string(cfg.max_steps) + " searches");
        }
        t.append(seg.kind, seg.text);
      }
      if (t.has_answer()) return finish(std::move(t), SynthesisStatus::ok);
      if (part.segments().empty() || part.segments().back().kind != SegmentKind::search) {
        throw FormatError("turn ended without <search> or <answer>", turn.size());
      }

      const auto info =
          render_information(search.search(trim(part.segments().back().text), cfg.top_k));
      t.append(SegmentKind::information, info);
      messages.push_back({"assistant", turn});
      messages.push_back({"user", "<information>" + info + "</information>"});
    }
  });
}

SynthesisOutcome distill_single_model(const MaskedSample& sample, ChatClient& teacher,
                                      SearchTool& search, const AgentConfig& cfg) {
  return run_search_agent(render_ramp_prompt(sample), sample.sample_id, teacher, search, cfg);
}

FilterVerdict judge_filter(const MaskedSample& sample, const Trajectory& t, ChatClient& judge,
                           const AgentConfig& cfg) {
  if (!t.final_answer()) {
    throw InvalidArgument("trajectory '" + t.sample_id() + "' has no final answer to judge");
  }
  const auto outcome = ask_judge(judge, cfg.judge_prompt, render_ramp_prompt(sample),
                                 reconstruct(sample), *t.final_answer());
  FilterVerdict v;
  v.keep = outcome.verdict == Verdict::correct;
  v.unparseable = outcome.verdict == Verdict::unparseable;
  v.raw = outcome.raw;
  return v;
}

std::size_t BatchResult::count_unparseable() const {
  return static_cast<std::size_t>(std::count_if(reports.begin(), reports.end(), [](const auto& r) {
    return r.verdict && r.verdict->unparseable;
  }));
}

BatchResult synthesize_batch(std::span<const MaskedSample> samples, Generator generator,
                             ChatClient& client, SearchTool& search, ChatClient& judge,
                             const AgentConfig& cfg, int parallelism) {
  cfg.validate();
  struct Slot {
    SampleReport report;
    std::optional<Trajectory> kept;
  };
  std::vector<Slot> slots(samples.size());

  auto process = [&](std::size_t i) {
    const auto& sample = samples[i];
    auto& slot = slots[i];
    slot.report.sample_id = sample.sample_id;
    try {
      auto outcome = generator == Generator::multiagent
                         ? synthesize_multiagent(sample, client, search, cfg)
                         : distill_single_model(sample, client, search, cfg);
      slot.report.status = outcome.status;
      slot.report.message = outcome.message;
      if (!outcome.ok()) return;
      try {
        slot.report.verdict = judge_filter(sample, outcome.trajectory, judge, cfg);
      } catch (const ClientError& e) {
        slot.report.judge_failed = true;
        slot.report.message = e.what();
        return;
      }
      if (slot.report.verdict->keep) slot.kept = std::move(outcome.trajectory);
    } catch (const Error& e) {
      slot.report.status = SynthesisStatus::client_error;
      slot.report.message = e.what();
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, parallelism));
  if (workers == 1 || samples.size() <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, samples.size()); ++w) {
      pool.emplace_back([&] {
        for (auto i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) process(i);
      });
    }
  }

  BatchResult result;
  for (auto& slot : slots) {
    if (slot.kept) result.kept.push_back(std::move(*slot.kept));
    result.reports.push_back(std::move(slot.report));
  }
  return result;
}

void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& t : trajectories) out << to_jsonl(t) << '\n';
  if (!out) throw InputError("write failure on " + path.string());
}

std::optional<std::size_t> DistillationState::next_threshold() const {
  if (next_threshold_index >= thresholds.size()) return std::nullopt;
  return thresholds[next_threshold_index];
}

bool DistillationState::add_partition(std::string path, std::size_t size) {
  partitions.push_back(std::move(path));
  partition_sizes.push_back(size);
  accumulated_count += size;
  bool crossed = false;
  while (next_threshold_index < thresholds.size() &&
         accumulated_count >= thresholds[next_threshold_index]) {
    ++next_threshold_index;
    crossed = true;
  }
  return crossed;
}

std::string DistillationState::to_json() const {
  nlohmann::ordered_json j;
  j["round"] = round;
  auto parts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < partitions.size(); ++i) {
    parts.push_back({{"path", partitions[i]}, {"size", partition_sizes[i]}});
  }
  j["partitions"] = std::move(parts);
  j["accumulated_count"] = accumulated_count;
  j["thresholds"] = thresholds;
  j["next_threshold_index"] = next_threshold_index;
  j["next_threshold"] = next_threshold() ? nlohmann::ordered_json(*next_threshold()) : nullptr;
  return j.dump(2);
}

DistillationState DistillationState::from_json(std::string_view text) {
  DistillationState s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.round = j.at("round").get<int>();
    for (const auto& p : j.at("partitions")) {
      s.partitions.push_back(p.at("path").get<std::string>());
      s.partition_sizes.push_back(p.at("size").get<std::size_t>());
    }
    s.accumulated_count = j.at("accumulated_count").get<std::size_t>();
    s.thresholds = j.at("thresholds").get<std::vector<std::size_t>>();
    s.next_threshold_index = j.at("next_threshold_index").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid distillation state: ") + e.what());
  }
  const auto sum = std::accumulate(s.partition_sizes.begin(), s.partition_sizes.end(), std::size_t{0});
  if (sum != s.accumulated_count) {
    throw InputError("distillation state: accumulated_count does not match partition sizes");
  }
  return s;
}

RoundReport self_evolve_round(const DistillationState& state, std::span<const MaskedSample> samples,
                              ChatClient& teacher, SearchTool& search, const AgentConfig& cfg,
                              ChatClient& judge, const std::filesystem::path& out_dir,
                              int parallelism) {
  RoundReport report;
  report.state = state;
  report.batch = synthesize_batch(samples, Generator::single_model, teacher, search, judge, cfg,
                                  parallelism);
  std::filesystem::create_directories(out_dir);
  report.partition = out_dir / partition_name(state.partitions.size());
  write_trajectories(report.partition, report.batch.kept);
  report.train_teacher_now =
      report.state.add_partition(report.partition.string(), report.batch.kept.size());
  report.state.round += 1;
  return report;
}

}  // namespace rampforge
