// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rampforge/chat.hpp"
#include "rampforge/curriculum.hpp"
#include "rampforge/error.hpp"
#include "rampforge/masking.hpp"
#include "rampforge/retrieval.hpp"
#include "rampforge/rewards.hpp"

namespace rampforge::cli {

/// Invalid configuration; field() is the dotted path, e.g. "rewards.alpha".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct EndpointSpec {
  enum class Kind { none, http, scripted } kind = Kind::none;
  EndpointConfig http;
  std::filesystem::path replay;  // scripted replay file
  std::filesystem::path record;  // optional: append live exchanges here
};

enum class SynthesisMode { multiagent, distill, self_evolve };

std::string_view to_string(SynthesisMode mode);

struct PipelineConfig {
  nlohmann::json effective;  // defaults + file + overrides

  std::filesystem::path corpus;
  std::filesystem::path output_dir;

  Bm25Params bm25;
  int top_k = kDefaultTopK;
  std::string bind;

  MaskStrategy mask_strategy = MaskStrategy::random;
  std::map<int, std::size_t> k_distribution;
  std::int64_t mask_seed = 0;

  SynthesisMode synthesis_mode = SynthesisMode::multiagent;
  EndpointSpec client;
  EndpointSpec judge;
  int max_steps = 8;
  std::vector<std::size_t> thresholds;
  std::filesystem::path prompts_dir;
  std::string search_url;
  int parallelism = 1;

  AnswerMode reward_mode = AnswerMode::penalized;
  PenaltyParams penalty;
  ClipParams clip;

  OrderStrategy curriculum_strategy = OrderStrategy::curriculum;
  StageMix stage_mix;
  std::uint64_t curriculum_seed = 0;

  struct Inputs {
    std::filesystem::path samples;
    std::filesystem::path trajectories;
    std::filesystem::path qa;
    std::filesystem::path plan;
    std::filesystem::path state;
    std::filesystem::path downstream;
  } inputs;
};

/// Built-in defaults as JSON.
nlohmann::json default_config();

/// Applies "a.b.c=value"; the value is parsed as JSON when possible and
/// taken as a plain string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

/// Converts and range-checks the merged JSON. Throws ConfigError.
PipelineConfig parse_config(const nlohmann::json& effective);

/// Reads `path` (optional), merges it over the defaults, applies overrides.
nlohmann::json load_effective_config(const std::optional<std::filesystem::path>& path,
                                     const std::vector<std::string>& overrides);

/// Throws ConfigError unless `path` is set and names an existing file.
void require_file(const std::filesystem::path& path, std::string_view field);

}  // namespace rampforge::cli
