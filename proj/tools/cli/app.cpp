// SPDX-License-Identifier: Apache-2.0
#include "app.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "config.hpp"
#include "rampforge/chat.hpp"
#include "rampforge/corpus.hpp"
#include "rampforge/curriculum.hpp"
#include "rampforge/evalharness.hpp"
#include "rampforge/masking.hpp"
#include "rampforge/prompts.hpp"
#include "rampforge/random.hpp"
#include "rampforge/retrieval.hpp"
#include "rampforge/rewards.hpp"
#include "rampforge/synthesis.hpp"
#include "rampforge/trajectory.hpp"

namespace rampforge::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::string_view kVersion = "0.1.0";

std::atomic<bool> g_stop_requested{false};

extern "C" void on_stop_signal(int) { g_stop_requested = true; }

struct Context {
  PipelineConfig cfg;
  std::string subcommand;
  std::vector<std::string> args;
  std::ostream& out;
  std::shared_ptr<spdlog::logger> log;
  std::optional<std::string> mode;
  ordered_json counts = ordered_json::object();
  std::vector<std::string> outputs;

  fs::path output(const std::string& name) {
    const auto path = cfg.output_dir / name;
    outputs.push_back(path.string());
    return path;
  }
};

/// A ChatClient assembled from an endpoint section, optionally recording.
class ConfiguredClient final : public ChatClient {
 public:
  explicit ConfiguredClient(const EndpointSpec& spec) {
    if (spec.kind == EndpointSpec::Kind::scripted) {
      base_ = std::make_unique<ScriptedChatClient>(spec.replay);
    } else {
      base_ = std::make_unique<HttpChatClient>(spec.http);
    }
    if (!spec.record.empty()) recorder_ = std::make_unique<RecordingChatClient>(*base_, spec.record);
  }

  std::string complete(std::span<const ChatMessage> messages) override {
    return recorder_ ? recorder_->complete(messages) : base_->complete(messages);
  }

 private:
  std::unique_ptr<ChatClient> base_;
  std::unique_ptr<ChatClient> recorder_;
};

std::unique_ptr<ChatClient> make_client(const EndpointSpec& spec, const std::string& field) {
  if (spec.kind == EndpointSpec::Kind::none) throw ConfigError(field, "required but not set");
  return std::make_unique<ConfiguredClient>(spec);
}

struct SearchBackend {
  std::unique_ptr<InvertedIndex> index;
  std::unique_ptr<SearchTool> tool;
};

InvertedIndex build_index(Context& ctx) {
  const auto store = ingest_corpus(ctx.cfg.corpus);
  auto index = InvertedIndex::build(store, ctx.cfg.bm25);
  ctx.log->info("indexed {} documents, {} terms", index.doc_count(), index.vocabulary_size());
  return index;
}

SearchBackend make_search(Context& ctx) {
  SearchBackend backend;
  if (!ctx.cfg.search_url.empty()) {
    backend.tool = std::make_unique<HttpSearch>(ctx.cfg.search_url);
    ctx.log->info("using search service at {}", ctx.cfg.search_url);
    return backend;
  }
  require_file(ctx.cfg.corpus, "corpus");
  backend.index = std::make_unique<InvertedIndex>(build_index(ctx));
  backend.tool = std::make_unique<LocalSearch>(*backend.index);
  return backend;
}

AgentConfig agent_config(const PipelineConfig& cfg) {
  auto agent = cfg.prompts_dir.empty() ? AgentConfig::defaults()
                                       : AgentConfig::from_directory(cfg.prompts_dir);
  agent.max_steps = cfg.max_steps;
  agent.top_k = cfg.top_k;
  try {
    agent.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("synthesis.prompts_dir", e.what());
  }
  return agent;
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("write failure on " + path.string());
}

std::string read_text(const fs::path& path) { return prompts::read_text_file(path); }

std::string report_line(const SampleReport& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["status"] = to_string(r.status);
  j["keep"] = r.verdict ? r.verdict->keep : false;
  j["unparseable"] = r.verdict ? r.verdict->unparseable : false;
  j["judge_failed"] = r.judge_failed;
  j["message"] = r.message;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void record_batch(Context& ctx, const BatchResult& batch, const fs::path& report_path) {
  std::string lines;
  std::map<std::string, std::size_t> statuses;
  for (const auto& r : batch.reports) {
    lines += report_line(r) + "\n";
    ++statuses[std::string(to_string(r.status))];
  }
  write_text(report_path, lines);
  ctx.counts["samples"] = batch.reports.size();
  ctx.counts["kept"] = batch.kept.size();
  ctx.counts["judge_unparseable"] = batch.count_unparseable();
  for (const auto& [status, n] : statuses) ctx.counts["status_" + status] = n;
  if (batch.count_unparseable() > 0) {
    ctx.log->warn("{} judge verdicts were unparseable and dropped", batch.count_unparseable());
  }
}

// --- subcommands -----------------------------------------------------------

void cmd_ingest(Context& ctx) {
  require_file(ctx.cfg.corpus, "corpus");
  const auto store = ingest_corpus(ctx.cfg.corpus);
  std::string lines;
  for (const auto& doc : store.documents()) lines += to_jsonl(doc) + "\n";
  write_text(ctx.output("corpus.jsonl"), lines);
  ctx.counts["documents"] = store.count();
  ctx.out << "ingested " << store.count() << " documents\n";
}

void cmd_index(Context& ctx) {
  require_file(ctx.cfg.corpus, "corpus");
  const auto index = build_index(ctx);
  ordered_json stats;
  stats["documents"] = index.doc_count();
  stats["vocabulary"] = index.vocabulary_size();
  stats["avg_doc_length"] = index.avg_doc_length();
  stats["k1"] = index.params().k1;
  stats["b"] = index.params().b;
  write_text(ctx.output("index_stats.json"), stats.dump(2) + "\n");
  ctx.counts["documents"] = index.doc_count();
  ctx.counts["vocabulary"] = index.vocabulary_size();
  ctx.out << fmt::format("{} documents, {} terms, avg length {:.2f}\n", index.doc_count(),
                         index.vocabulary_size(), index.avg_doc_length());
}

void cmd_serve_search(Context& ctx, const std::function<void()>& write_manifest) {
  require_file(ctx.cfg.corpus, "corpus");
  const auto index = build_index(ctx);
  const auto [host, port] = parse_bind_address(ctx.cfg.bind);
  SearchService service(index, host, port);
  service.start();
  ctx.counts["documents"] = index.doc_count();
  ctx.counts["port"] = service.port();
  write_manifest();
  ctx.out << "serving on " << service.base_url() << std::endl;
  g_stop_requested = false;
  auto prev_int = std::signal(SIGINT, on_stop_signal);
  auto prev_term = std::signal(SIGTERM, on_stop_signal);
  while (!g_stop_requested) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  service.stop();
  ctx.log->info("search service stopped");
}

void cmd_mask(Context& ctx) {
  require_file(ctx.cfg.corpus, "corpus");
  const auto store = ingest_corpus(ctx.cfg.corpus);
  const HeuristicExtractor extractor;
  std::vector<std::vector<SalientSpan>> spans;
  spans.reserve(store.count());
  for (const auto& doc : store.documents()) {
    auto result = extract_salient_spans(doc, extractor);
    for (const auto& w : result.warnings) ctx.log->debug("{}: {}", doc.doc_id, w);
    spans.push_back(std::move(result.spans));
  }
  std::optional<FrequencyScorer> scorer;
  if (ctx.cfg.mask_strategy == MaskStrategy::ppl_greedy) scorer.emplace(store);

  const auto docs = store.documents();
  const auto base_seed = ctx.cfg.mask_seed;
  std::string lines;
  std::size_t n = 0;
  for (const auto& [k, count] : ctx.cfg.k_distribution) {
    if (count == 0) continue;
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (spans[i].size() >= static_cast<std::size_t>(k)) candidates.push_back(i);
    }
    if (candidates.empty()) {
      throw Error(fmt::format("no document has at least {} salient spans", k));
    }
    seeded_shuffle(candidates, static_cast<std::uint64_t>(base_seed) + static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < count; ++i, ++n) {
      const auto d = candidates[i % candidates.size()];
      const auto id = fmt::format("{}/k{}/{}", docs[d].doc_id, k, n);
      const auto sample_seed = base_seed + static_cast<std::int64_t>(n);
      const auto sample =
          ctx.cfg.mask_strategy == MaskStrategy::random
              ? select_masks_random(docs[d], spans[d], k, sample_seed, id)
              : select_masks_ppl_greedy(docs[d], spans[d], k, *scorer, id);
      lines += to_jsonl(sample) + "\n";
    }
    ctx.counts["k" + std::to_string(k)] = count;
  }
  write_text(ctx.output("samples.jsonl"), lines);
  ctx.counts["samples"] = n;
  ctx.out << "wrote " << n << " masked samples\n";
}

void cmd_synthesize(Context& ctx) {
  auto mode = ctx.cfg.synthesis_mode;
  if (ctx.mode) {
    if (*ctx.mode == "multiagent") mode = SynthesisMode::multiagent;
    else if (*ctx.mode == "distill") mode = SynthesisMode::distill;
    else if (*ctx.mode == "self_evolve") mode = SynthesisMode::self_evolve;
    else throw ConfigError("--mode", "expected multiagent, distill or self_evolve");
    ctx.cfg.effective["synthesis"]["mode"] = *ctx.mode;
  }
  require_file(ctx.cfg.inputs.samples, "inputs.samples");
  if (mode == SynthesisMode::self_evolve && !ctx.cfg.inputs.state.empty()) {
    require_file(ctx.cfg.inputs.state, "inputs.state");
  }
  const auto agent = agent_config(ctx.cfg);
  auto client = make_client(ctx.cfg.client, "synthesis.client");
  auto judge = make_client(ctx.cfg.judge, "synthesis.judge");
  const auto samples = load_masked_samples(ctx.cfg.inputs.samples);
  auto search = make_search(ctx);
  ctx.log->info("synthesizing {} samples ({})", samples.size(), to_string(mode));

  if (mode == SynthesisMode::self_evolve) {
    DistillationState state;
    state.thresholds = ctx.cfg.thresholds;
    if (!ctx.cfg.inputs.state.empty()) state = DistillationState::from_json(read_text(ctx.cfg.inputs.state));
    auto report = self_evolve_round(state, samples, *client, *search.tool, agent, *judge,
                                    ctx.cfg.output_dir, ctx.cfg.parallelism);
    ctx.outputs.push_back(report.partition.string());
    record_batch(ctx, report.batch, ctx.output("synthesis_report.jsonl"));
    write_text(ctx.output("state.json"), report.state.to_json() + "\n");
    ctx.counts["accumulated"] = report.state.accumulated_count;
    ctx.counts["train_teacher_now"] = report.train_teacher_now;
    ctx.out << fmt::format("round {}: kept {} of {} ({} accumulated)\n", report.state.round,
                           report.batch.kept.size(), samples.size(),
                           report.state.accumulated_count);
    if (report.train_teacher_now) ctx.out << "threshold reached: train the next teacher\n";
    return;
  }

  const auto generator = mode == SynthesisMode::multiagent ? Generator::multiagent : Generator::single_model;
  const auto batch = synthesize_batch(samples, generator, *client, *search.tool, *judge, agent,
                                      ctx.cfg.parallelism);
  write_trajectories(ctx.output("trajectories.jsonl"), batch.kept);
  record_batch(ctx, batch, ctx.output("synthesis_report.jsonl"));
  ctx.out << fmt::format("kept {} of {} trajectories\n", batch.kept.size(), samples.size());
}

void cmd_judge(Context& ctx) {
  require_file(ctx.cfg.inputs.samples, "inputs.samples");
  require_file(ctx.cfg.inputs.trajectories, "inputs.trajectories");
  const auto agent = agent_config(ctx.cfg);
  auto judge = make_client(ctx.cfg.judge, "synthesis.judge");
  const auto samples = load_masked_samples(ctx.cfg.inputs.samples);
  const auto trajectories = load_trajectories(ctx.cfg.inputs.trajectories);
  std::map<std::string, const MaskedSample*> by_id;
  for (const auto& s : samples) by_id[s.sample_id] = &s;

  std::vector<Trajectory> kept;
  std::string lines;
  std::size_t unparseable = 0;
  for (const auto& t : trajectories) {
    auto it = by_id.find(t.sample_id());
    if (it == by_id.end()) throw InputError("trajectory '" + t.sample_id() + "' has no sample");
    const auto verdict = judge_filter(*it->second, t, *judge, agent);
    ordered_json j;
    j["sample_id"] = t.sample_id();
    j["keep"] = verdict.keep;
    j["unparseable"] = verdict.unparseable;
    j["raw"] = verdict.raw;
    lines += j.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    if (verdict.unparseable) ++unparseable;
    if (verdict.keep) kept.push_back(t);
  }
  write_text(ctx.output("judgements.jsonl"), lines);
  write_trajectories(ctx.output("kept.jsonl"), kept);
  ctx.counts["judged"] = trajectories.size();
  ctx.counts["kept"] = kept.size();
  ctx.counts["unparseable"] = unparseable;
  ctx.out << fmt::format("kept {} of {} ({} unparseable)\n", kept.size(), trajectories.size(),
                         unparseable);
}

void cmd_reward(Context& ctx) {
  auto mode = ctx.cfg.reward_mode;
  if (ctx.mode) {
    try {
      mode = answer_mode_from_string(*ctx.mode);
    } catch (const InvalidArgument& e) {
      throw ConfigError("--mode", e.what());
    }
    ctx.cfg.effective["rewards"]["mode"] = *ctx.mode;
  }
  require_file(ctx.cfg.inputs.trajectories, "inputs.trajectories");
  if (ctx.cfg.inputs.qa.empty() && ctx.cfg.inputs.samples.empty()) {
    throw ConfigError("inputs.qa", "reward needs inputs.qa or inputs.samples for gold answers");
  }
  struct Gold {
    std::vector<std::string> answers;
    std::string question;
  };
  std::map<std::string, Gold> golds;
  if (!ctx.cfg.inputs.qa.empty()) {
    require_file(ctx.cfg.inputs.qa, "inputs.qa");
    for (const auto& ex : load_qa(ctx.cfg.inputs.qa).examples) golds[ex.qid] = {ex.gold_answers, ex.question};
  }
  if (!ctx.cfg.inputs.samples.empty()) {
    require_file(ctx.cfg.inputs.samples, "inputs.samples");
    for (const auto& s : load_masked_samples(ctx.cfg.inputs.samples)) {
      golds.try_emplace(s.sample_id, Gold{{reconstruct(s)}, render_ramp_prompt(s)});
    }
  }
  std::unique_ptr<ChatClient> judge;
  RewardDeps deps;
  deps.penalty = ctx.cfg.penalty;
  if (mode == AnswerMode::judge) {
    judge = make_client(ctx.cfg.judge, "synthesis.judge");
    deps.judge = judge.get();
    deps.judge_prompt = agent_config(ctx.cfg).judge_prompt;
  }

  const auto trajectories = load_trajectories(ctx.cfg.inputs.trajectories);
  std::string lines;
  double sum = 0.0;
  for (const auto& t : trajectories) {
    auto it = golds.find(t.sample_id());
    if (it == golds.end()) throw InputError("no gold answer for '" + t.sample_id() + "'");
    deps.question = it->second.question;
    const auto response = serialize_trajectory(t);
    std::optional<RewardBreakdown> best;
    for (const auto& gold : it->second.answers) {
      const auto r = hybrid_reward(response, gold, mode, deps);
      if (!best || r.total > best->total) best = r;
    }
    ordered_json j;
    j["sample_id"] = t.sample_id();
    j["format"] = best->format;
    j["answer"] = best->answer;
    j["total"] = best->total;
    j["mode"] = to_string(mode);
    j["judge_unparseable"] = best->judge_unparseable;
    lines += j.dump() + "\n";
    sum += best->total;
  }
  write_text(ctx.output("rewards.jsonl"), lines);
  ctx.counts["scored"] = trajectories.size();
  const double mean = trajectories.empty() ? 0.0 : sum / static_cast<double>(trajectories.size());
  ctx.out << fmt::format("scored {} responses ({}), mean total {:.4f}\n", trajectories.size(),
                         to_string(mode), mean);
}

void cmd_curriculum(Context& ctx) {
  require_file(ctx.cfg.inputs.samples, "inputs.samples");
  auto loaded = load_masked_samples(ctx.cfg.inputs.samples);
  if (!ctx.cfg.inputs.trajectories.empty()) {
    // Plan only samples that produced a kept trajectory.
    require_file(ctx.cfg.inputs.trajectories, "inputs.trajectories");
    std::set<std::string> kept;
    for (const auto& t : load_trajectories(ctx.cfg.inputs.trajectories)) kept.insert(t.sample_id());
    std::erase_if(loaded, [&](const MaskedSample& s) { return !kept.contains(s.sample_id); });
  }
  const auto samples = apply_stage_mix(loaded, ctx.cfg.stage_mix);
  std::vector<std::string> downstream;
  if (!ctx.cfg.inputs.downstream.empty()) {
    require_file(ctx.cfg.inputs.downstream, "inputs.downstream");
    for (const auto& ex : load_qa(ctx.cfg.inputs.downstream).examples) {
      if (downstream.size() == ctx.cfg.stage_mix.downstream) break;
      downstream.push_back(ex.qid);
    }
  }
  CurriculumPlan plan;
  if (ctx.cfg.curriculum_strategy == OrderStrategy::curriculum) {
    plan = curriculum_order(samples);
    append_downstream(plan, downstream, downstream.size());
  } else {
    auto pool = samples;
    for (const auto& id : downstream) {
      MaskedSample pseudo;
      pseudo.sample_id = id;
      pool.push_back(std::move(pseudo));
    }
    plan = mixed_order(pool, ctx.cfg.curriculum_seed);
  }
  write_text(ctx.output("plan.json"), plan.to_json() + "\n");
  ctx.counts["planned"] = plan.ordered_ids.size();
  ctx.counts["downstream"] = downstream.size();
  ctx.out << fmt::format("planned {} records ({})\n", plan.ordered_ids.size(),
                         to_string(plan.strategy));
}

void cmd_emit_sft(Context& ctx) {
  require_file(ctx.cfg.inputs.plan, "inputs.plan");
  require_file(ctx.cfg.inputs.samples, "inputs.samples");
  require_file(ctx.cfg.inputs.trajectories, "inputs.trajectories");
  const auto plan = CurriculumPlan::from_json(read_text(ctx.cfg.inputs.plan));
  const auto samples = load_masked_samples(ctx.cfg.inputs.samples);
  const auto trajectories = load_trajectories(ctx.cfg.inputs.trajectories);
  auto sources = ramp_sft_sources(samples, trajectories);
  if (!ctx.cfg.inputs.qa.empty()) {
    require_file(ctx.cfg.inputs.qa, "inputs.qa");
    std::map<std::string, const Trajectory*> by_id;
    for (const auto& t : trajectories) by_id[t.sample_id()] = &t;
    for (const auto& ex : load_qa(ctx.cfg.inputs.qa).examples) {
      auto it = by_id.find(ex.qid);
      if (it == by_id.end() || sources.contains(ex.qid)) continue;
      sources[ex.qid] = SftSource{render_rl_template(ex.question), 0, *it->second};
    }
  }
  const auto n = emit_sft_records(plan, sources, ctx.output("sft.jsonl"));
  ctx.counts["records"] = n;
  ctx.out << "wrote " << n << " SFT records\n";
}

void cmd_eval(Context& ctx) {
  require_file(ctx.cfg.inputs.qa, "inputs.qa");
  const auto agent = agent_config(ctx.cfg);
  auto client = make_client(ctx.cfg.client, "synthesis.client");
  const auto loaded = load_qa(ctx.cfg.inputs.qa);
  for (const auto& r : loaded.rejected) ctx.log->warn("{}: {}", ctx.cfg.inputs.qa.string(), r);
  auto search = make_search(ctx);
  const auto report = evaluate_agent(ctx.cfg.inputs.qa.stem().string(), loaded.examples, *client,
                                     *search.tool, agent, ctx.cfg.parallelism);
  write_text(ctx.output("eval_report.json"), render_report(report, ReportFormat::json));
  ctx.counts["examples"] = loaded.examples.size();
  ctx.counts["rejected_lines"] = loaded.rejected.size();
  ctx.counts["scored"] = report.n;
  ctx.counts["errored"] = report.errored;
  ctx.out << render_report(report, ReportFormat::table);
}

void write_manifest(Context& ctx) {
  ordered_json m;
  m["tool"] = "ramp-forge";
  m["version"] = kVersion;
  m["subcommand"] = ctx.subcommand;
  m["args"] = ctx.args;
  const auto canonical = ctx.cfg.effective.dump(-1, ' ', false, json::error_handler_t::replace);
  m["config_sha256"] = sha256_hex(canonical);
  m["config"] = ctx.cfg.effective;
  m["seeds"] = {{"masking", ctx.cfg.mask_seed}, {"curriculum", ctx.cfg.curriculum_seed}};
  m["counts"] = ctx.counts;
  m["outputs"] = ctx.outputs;
  write_text(ctx.cfg.output_dir / (ctx.subcommand + ".manifest.json"), m.dump(2) + "\n");
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("ramp-forge", std::move(sink));
  logger->set_pattern("[%l] %v");
  const char* env = std::getenv("RAMP_FORGE_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "info") {
    logger->set_level(spdlog::level::info);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    throw ConfigError("RAMP_FORGE_LOG", "expected error, info or debug");
  }
  return logger;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"RAMP data synthesis, rewards and evaluation", "ramp-forge"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  std::optional<std::int64_t> seed;
  std::optional<std::string> mode;
  app.add_option("--config", config_path, "Pipeline config JSON");
  app.add_option("--set", overrides, "Override a config value: dotted.key=value")
      ->allow_extra_args(false)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_dir, "Output directory (overrides output_dir)");
  app.add_option("--seed", seed, "Seed for masking and mixed ordering");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "Validate a corpus and write it back normalized"},
      {"index", "Build the BM25 index and report its statistics"},
      {"serve-search", "Serve the index over HTTP until interrupted"},
      {"mask", "Generate masked RAMP samples"},
      {"synthesize", "Generate and judge trajectories"},
      {"judge", "Judge existing trajectories"},
      {"reward", "Score trajectories with the hybrid reward"},
      {"curriculum", "Order samples into a training plan"},
      {"emit-sft", "Write SFT records for a plan"},
      {"eval", "Evaluate an agent on a QA dataset"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "synthesize" || name == "reward") {
      sub->add_option("--mode", mode, name == "synthesize" ? "multiagent | distill | self_evolve"
                                                           : "recall | penalized | judge");
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  const auto subcommand = app.get_subcommands().front()->get_name();
  std::shared_ptr<spdlog::logger> log;
  std::optional<Context> ctx;
  try {
    log = make_logger(err);
    auto effective = load_effective_config(config_path ? std::optional<fs::path>(*config_path) : std::nullopt,
                                           overrides);
    if (out_dir) effective["output_dir"] = *out_dir;
    if (seed) {
      effective["masking"]["seed"] = *seed;
      effective["curriculum"]["seed"] = *seed;
    }
    ctx.emplace(Context{parse_config(effective), subcommand, args, out, log, mode,
                        ordered_json::object(), {}});
    fs::create_directories(ctx->cfg.output_dir);
    if (subcommand == "ingest") cmd_ingest(*ctx);
    else if (subcommand == "index") cmd_index(*ctx);
    else if (subcommand == "serve-search") cmd_serve_search(*ctx, [&] { write_manifest(*ctx); });
    else if (subcommand == "mask") cmd_mask(*ctx);
    else if (subcommand == "synthesize") cmd_synthesize(*ctx);
    else if (subcommand == "judge") cmd_judge(*ctx);
    else if (subcommand == "reward") cmd_reward(*ctx);
    else if (subcommand == "curriculum") cmd_curriculum(*ctx);
    else if (subcommand == "emit-sft") cmd_emit_sft(*ctx);
    else if (subcommand == "eval") cmd_eval(*ctx);
    write_manifest(*ctx);
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    if (log) {
      log->error("{}", e.what());
    } else {
      err << "error: " << e.what() << "\n";
    }
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace rampforge::cli
