// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rampforge::cli {

namespace {

using nlohmann::json;

const json& at_path(const json& root, std::string_view dotted) {
  const json* node = &root;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const auto dot = dotted.find('.', pos);
    const auto key = std::string(dotted.substr(pos, dot == std::string_view::npos ? dotted.npos : dot - pos));
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError(std::string(dotted), "missing");
    }
    node = &(*node)[key];
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  return *node;
}

double number(const json& root, std::string_view field) {
  const auto& v = at_path(root, field);
  if (!v.is_number()) throw ConfigError(std::string(field), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(std::string(field), "must be finite");
  return d;
}

std::int64_t integer(const json& root, std::string_view field) {
  const auto& v = at_path(root, field);
  if (!v.is_number_integer()) throw ConfigError(std::string(field), "expected an integer");
  return v.get<std::int64_t>();
}

std::string string(const json& root, std::string_view field) {
  const auto& v = at_path(root, field);
  if (!v.is_string()) throw ConfigError(std::string(field), "expected a string");
  return v.get<std::string>();
}

template <typename Enum, typename Parse>
Enum enumeration(const json& root, std::string_view field, Parse parse) {
  const auto name = string(root, field);
  try {
    return parse(name);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(field), e.what());
  }
}

void reject_unknown_keys(const json& node, const json& schema, const std::string& prefix) {
  if (!node.is_object()) {
    throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  }
  for (const auto& [key, value] : node.items()) {
    const auto field = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ConfigError(field, "unknown key");
    const auto& expected = schema[key];
    // Endpoint objects and k-keyed maps are checked where they are parsed.
    if (expected.is_object() && !expected.empty() && key != "k_distribution" && key != "stage_mix") {
      reject_unknown_keys(value, expected, field);
    }
  }
}

EndpointSpec parse_endpoint(const json& root, const std::string& field) {
  EndpointSpec spec;
  const auto& node = at_path(root, field);
  if (node.is_null()) return spec;
  if (!node.is_object()) throw ConfigError(field, "expected an object or null");
  static const std::set<std::string> known{"type",    "base_url",    "path",   "model",
                                           "timeout_seconds", "max_retries", "temperature",
                                           "api_key_env", "replay", "record"};
  for (const auto& [key, value] : node.items()) {
    if (!known.contains(key)) throw ConfigError(field + "." + key, "unknown key");
  }
  const auto type = string(root, field + ".type");
  if (type == "scripted") {
    spec.kind = EndpointSpec::Kind::scripted;
    spec.replay = string(root, field + ".replay");
    require_file(spec.replay, field + ".replay");
    return spec;
  }
  if (type != "http") throw ConfigError(field + ".type", "expected \"http\" or \"scripted\"");
  spec.kind = EndpointSpec::Kind::http;
  spec.http.base_url = string(root, field + ".base_url");
  if (spec.http.base_url.empty()) throw ConfigError(field + ".base_url", "must not be empty");
  if (node.contains("path")) spec.http.path = string(root, field + ".path");
  if (node.contains("model")) spec.http.model = string(root, field + ".model");
  if (node.contains("timeout_seconds")) {
    spec.http.timeout_seconds = static_cast<int>(integer(root, field + ".timeout_seconds"));
    if (spec.http.timeout_seconds <= 0) throw ConfigError(field + ".timeout_seconds", "must be positive");
  }
  if (node.contains("max_retries")) {
    spec.http.max_retries = static_cast<int>(integer(root, field + ".max_retries"));
    if (spec.http.max_retries < 0) throw ConfigError(field + ".max_retries", "must be non-negative");
  }
  if (node.contains("temperature")) {
    spec.http.temperature = number(root, field + ".temperature");
    if (spec.http.temperature < 0.0) throw ConfigError(field + ".temperature", "must be non-negative");
  }
  if (node.contains("api_key_env")) spec.http.api_key_env = string(root, field + ".api_key_env");
  if (node.contains("record")) spec.record = string(root, field + ".record");
  return spec;
}

std::map<int, std::size_t> k_counts(const json& root, const std::string& field, bool allow_downstream,
                                    std::size_t* downstream) {
  const auto& node = at_path(root, field);
  if (!node.is_object()) throw ConfigError(field, "expected an object keyed by k");
  std::map<int, std::size_t> out;
  for (const auto& [key, value] : node.items()) {
    const auto sub = field + "." + key;
    if (!value.is_number_integer() || value.get<std::int64_t>() < 0) {
      throw ConfigError(sub, "expected a non-negative integer");
    }
    const auto count = value.get<std::size_t>();
    if (allow_downstream && key == "downstream") {
      *downstream = count;
      continue;
    }
    if (key.size() != 1 || key[0] < '1' || key[0] > '4') {
      throw ConfigError(sub, "k must satisfy 0 < k < 5");
    }
    out[key[0] - '0'] = count;
  }
  return out;
}

}  // namespace

std::string_view to_string(SynthesisMode mode) {
  switch (mode) {
    case SynthesisMode::multiagent: return "multiagent";
    case SynthesisMode::distill: return "distill";
    case SynthesisMode::self_evolve: return "self_evolve";
  }
  return "multiagent";
}

json default_config() {
  return json::parse(R"({
    "corpus": "",
    "output_dir": "out",
    "index": {"k1": 1.2, "b": 0.75, "top_k": 5, "bind": "127.0.0.1:8080"},
    "masking": {"strategy": "random", "k_distribution": {"1": 1, "2": 1, "3": 1, "4": 1}, "seed": 0},
    "synthesis": {"mode": "multiagent", "client": null, "judge": null, "max_steps": 8,
                  "thresholds": [500, 1000, 2000], "prompts_dir": "", "search_url": "",
                  "parallelism": 1},
    "rewards": {"mode": "penalized", "alpha": 0.2, "beta": 8, "gamma": 4,
                "eps_low": 0.2, "eps_high": 0.28},
    "curriculum": {"strategy": "curriculum",
                   "stage_mix": {"1": 100, "2": 100, "3": 100, "4": 100, "downstream": 60},
                   "seed": 0},
    "inputs": {"samples": "", "trajectories": "", "qa": "", "plan": "", "state": "",
               "downstream": ""}
  })");
}

void apply_override(json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(std::string(assignment), "override must look like key.path=value");
  }
  const auto key = assignment.substr(0, eq);
  const auto raw = std::string(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &config;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const auto part = std::string(key.substr(pos, dot == std::string_view::npos ? key.npos : dot - pos));
    if (part.empty()) throw ConfigError(std::string(key), "empty path component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string_view::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

void require_file(const std::filesystem::path& path, std::string_view field) {
  if (path.empty()) throw ConfigError(std::string(field), "required but not set");
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ConfigError(std::string(field), "no such file: " + path.string());
  }
}

json load_effective_config(const std::optional<std::filesystem::path>& path,
                           const std::vector<std::string>& overrides) {
  auto config = default_config();
  if (path) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ConfigError("--config", "cannot read " + path->string());
    std::stringstream buf;
    buf << in.rdbuf();
    json user;
    try {
      user = json::parse(buf.str());
    } catch (const json::parse_error& e) {
      throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    if (!user.is_object()) throw ConfigError("<root>", "expected an object");
    // k-maps replace the defaults wholesale instead of merging.
    for (const char* section : {"masking", "curriculum"}) {
      const char* map_key = std::string_view(section) == "masking" ? "k_distribution" : "stage_mix";
      if (user.contains(section) && user[section].is_object() && user[section].contains(map_key)) {
        config[section][map_key] = user[section][map_key];
      }
    }
    config.merge_patch(user);
    // merge_patch drops keys patched with null.
    for (const char* endpoint : {"client", "judge"}) {
      if (!config["synthesis"].contains(endpoint)) config["synthesis"][endpoint] = nullptr;
    }
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

PipelineConfig parse_config(const json& effective) {
  reject_unknown_keys(effective, default_config(), "");
  PipelineConfig c;
  c.effective = effective;

  c.corpus = string(effective, "corpus");
  c.output_dir = string(effective, "output_dir");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");

  c.bm25.k1 = number(effective, "index.k1");
  if (!(c.bm25.k1 > 0.0)) throw ConfigError("index.k1", "must be positive");
  c.bm25.b = number(effective, "index.b");
  if (c.bm25.b < 0.0 || c.bm25.b > 1.0) throw ConfigError("index.b", "must lie in [0, 1]");
  c.top_k = static_cast<int>(integer(effective, "index.top_k"));
  if (c.top_k <= 0) throw ConfigError("index.top_k", "must be positive");
  c.bind = string(effective, "index.bind");
  try {
    parse_bind_address(c.bind);
  } catch (const InvalidArgument& e) {
    throw ConfigError("index.bind", e.what());
  }

  c.mask_strategy = enumeration<MaskStrategy>(effective, "masking.strategy", mask_strategy_from_string);
  c.k_distribution = k_counts(effective, "masking.k_distribution", false, nullptr);
  c.mask_seed = integer(effective, "masking.seed");

  c.synthesis_mode = enumeration<SynthesisMode>(effective, "synthesis.mode", [](std::string_view n) {
    if (n == "multiagent") return SynthesisMode::multiagent;
    if (n == "distill") return SynthesisMode::distill;
    if (n == "self_evolve") return SynthesisMode::self_evolve;
    throw InvalidArgument("expected multiagent, distill or self_evolve");
  });
  c.client = parse_endpoint(effective, "synthesis.client");
  c.judge = parse_endpoint(effective, "synthesis.judge");
  c.max_steps = static_cast<int>(integer(effective, "synthesis.max_steps"));
  if (c.max_steps <= 0) throw ConfigError("synthesis.max_steps", "must be positive");
  const auto& thresholds = at_path(effective, "synthesis.thresholds");
  if (!thresholds.is_array()) throw ConfigError("synthesis.thresholds", "expected an array");
  for (const auto& t : thresholds) {
    if (!t.is_number_integer() || t.get<std::int64_t>() <= 0) {
      throw ConfigError("synthesis.thresholds", "entries must be positive integers");
    }
    const auto v = t.get<std::size_t>();
    if (!c.thresholds.empty() && v <= c.thresholds.back()) {
      throw ConfigError("synthesis.thresholds", "must be strictly increasing");
    }
    c.thresholds.push_back(v);
  }
  c.prompts_dir = string(effective, "synthesis.prompts_dir");
  if (!c.prompts_dir.empty() && !std::filesystem::is_directory(c.prompts_dir)) {
    throw ConfigError("synthesis.prompts_dir", "no such directory: " + c.prompts_dir.string());
  }
  c.search_url = string(effective, "synthesis.search_url");
  c.parallelism = static_cast<int>(integer(effective, "synthesis.parallelism"));
  if (c.parallelism <= 0) throw ConfigError("synthesis.parallelism", "must be positive");

  c.reward_mode = enumeration<AnswerMode>(effective, "rewards.mode", answer_mode_from_string);
  c.penalty.alpha = number(effective, "rewards.alpha");
  if (c.penalty.alpha < 0.0) throw ConfigError("rewards.alpha", "must be non-negative");
  c.penalty.beta = number(effective, "rewards.beta");
  if (!(c.penalty.beta > 0.0)) throw ConfigError("rewards.beta", "must be positive");
  c.penalty.gamma = number(effective, "rewards.gamma");
  if (!(c.penalty.gamma > 0.0)) throw ConfigError("rewards.gamma", "must be positive");
  c.clip.eps_low = number(effective, "rewards.eps_low");
  if (c.clip.eps_low < 0.0 || c.clip.eps_low >= 1.0) {
    throw ConfigError("rewards.eps_low", "must lie in [0, 1)");
  }
  c.clip.eps_high = number(effective, "rewards.eps_high");
  if (c.clip.eps_high < 0.0) throw ConfigError("rewards.eps_high", "must be non-negative");

  c.curriculum_strategy =
      enumeration<OrderStrategy>(effective, "curriculum.strategy", order_strategy_from_string);
  c.stage_mix.per_k = k_counts(effective, "curriculum.stage_mix", true, &c.stage_mix.downstream);
  const auto seed = integer(effective, "curriculum.seed");
  if (seed < 0) throw ConfigError("curriculum.seed", "must be non-negative");
  c.curriculum_seed = static_cast<std::uint64_t>(seed);

  c.inputs.samples = string(effective, "inputs.samples");
  c.inputs.trajectories = string(effective, "inputs.trajectories");
  c.inputs.qa = string(effective, "inputs.qa");
  c.inputs.plan = string(effective, "inputs.plan");
  c.inputs.state = string(effective, "inputs.state");
  c.inputs.downstream = string(effective, "inputs.downstream");
  return c;
}

}  // namespace rampforge::cli
