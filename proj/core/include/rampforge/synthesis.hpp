// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rampforge/chat.hpp"
#include "rampforge/judge.hpp"
#include "rampforge/masking.hpp"
#include "rampforge/retrieval.hpp"
#include "rampforge/trajectory.hpp"

namespace rampforge {

struct AgentConfig {
  std::string planner_prompt;
  std::string rewriter_prompt;
  std::string observer_prompt;
  std::string judge_prompt;
  int max_steps = 8;  // search calls per trajectory
  int top_k = kDefaultTopK;

  /// Shipped templates with default limits.
  static AgentConfig defaults();

  /// Defaults overridden by planner.txt / rewriter.txt / observer.txt /
  /// judge.txt found in `dir`.
  static AgentConfig from_directory(const std::filesystem::path& dir);

  /// Throws InvalidArgument on a bad limit or a template missing a placeholder.
  void validate() const;
};

enum class SynthesisStatus {
  ok,
  step_limit,      // max_steps searches without an answer
  client_error,    // chat or search transport failed after retries
  protocol_error,  // agent reply was not the expected JSON envelope
  format_error,    // model output broke the trajectory grammar
};

std::string_view to_string(SynthesisStatus status);

struct SynthesisOutcome {
  Trajectory trajectory;  // partial unless status == ok
  SynthesisStatus status = SynthesisStatus::ok;
  std::string message;

  bool ok() const noexcept { return status == SynthesisStatus::ok; }
};

/// Numbered "i. <title>: <snippet>" lines, one per hit, framed by newlines.
std::string render_information(const std::vector<SearchHit>& hits);

/// Planner -> (rewriter -> search -> observer)* loop. Each agent answers with
/// one JSON object ({"thought","query"} or {"thought","answer"}); the harness
/// turns replies into segments and authors every information block itself.
SynthesisOutcome synthesize_multiagent(const MaskedSample& sample, ChatClient& client,
                                       SearchTool& search, const AgentConfig& cfg);

/// One model driven by the RL template. Each reply is cut after its first
/// </search>; the harness runs the query and sends the information block back
/// as the next user turn. Stops at <answer> or after max_steps searches.
SynthesisOutcome run_search_agent(std::string_view question, std::string sample_id,
                                  ChatClient& model, SearchTool& search, const AgentConfig& cfg);

/// run_search_agent on the rendered RAMP prompt of `sample`.
SynthesisOutcome distill_single_model(const MaskedSample& sample, ChatClient& teacher,
                                      SearchTool& search, const AgentConfig& cfg);

struct FilterVerdict {
  bool keep = false;
  bool unparseable = false;
  std::string raw;
};

/// Judges the final answer against the reconstructed paragraph.
/// Throws InvalidArgument when the trajectory has no final answer.
FilterVerdict judge_filter(const MaskedSample& sample, const Trajectory& t, ChatClient& judge,
                           const AgentConfig& cfg);

enum class Generator { multiagent, single_model };

struct SampleReport {
  std::string sample_id;
  SynthesisStatus status = SynthesisStatus::ok;
  std::string message;
  std::optional<FilterVerdict> verdict;  // set when the generator succeeded
  bool judge_failed = false;
};

struct BatchResult {
  std::vector<Trajectory> kept;  // input order
  std::vector<SampleReport> reports;

  std::size_t count_unparseable() const;
};

/// Generates and judges every sample. Up to `parallelism` samples are in
/// flight; output order always follows the input. Clients and the search tool
/// must tolerate concurrent calls when parallelism > 1.
BatchResult synthesize_batch(std::span<const MaskedSample> samples, Generator generator,
                             ChatClient& client, SearchTool& search, ChatClient& judge,
                             const AgentConfig& cfg, int parallelism = 1);

void write_trajectories(const std::filesystem::path& path, std::span<const Trajectory> trajectories);

/// Bookkeeping for the self-evolve loop: partitions D_0..D_j and the dataset
/// sizes at which a new teacher should be trained.
struct DistillationState {
  int round = 0;
  std::vector<std::string> partitions;
  std::vector<std::size_t> partition_sizes;
  std::size_t accumulated_count = 0;
  std::vector<std::size_t> thresholds{500, 1000, 2000};
  std::size_t next_threshold_index = 0;

  std::optional<std::size_t> next_threshold() const;

  /// Records a partition; true when the running total crossed at least one
  /// pending threshold (all crossed thresholds are consumed).
  bool add_partition(std::string path, std::size_t size);

  std::string to_json() const;
  static DistillationState from_json(std::string_view text);
};

struct RoundReport {
  DistillationState state;
  std::filesystem::path partition;
  BatchResult batch;
  bool train_teacher_now = false;
};

/// Synthesizes with the current teacher, keeps judge-approved trajectories,
/// writes them to `out_dir/partition_<j+1>.jsonl` and returns the advanced state.
RoundReport self_evolve_round(const DistillationState& state, std::span<const MaskedSample> samples,
                              ChatClient& teacher, SearchTool& search, const AgentConfig& cfg,
                              ChatClient& judge, const std::filesystem::path& out_dir,
                              int parallelism = 1);

}  // namespace rampforge
