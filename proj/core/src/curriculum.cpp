// SPDX-License-Identifier: Apache-2.0
#include "rampforge/curriculum.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "rampforge/random.hpp"
#include "rampforge/error.hpp"
#include "text_util.hpp"

namespace rampforge {

std::string_view to_string(OrderStrategy strategy) {
  return strategy == OrderStrategy::curriculum ? "curriculum" : "mixed";
}

OrderStrategy order_strategy_from_string(std::string_view name) {
  if (name == "curriculum") return OrderStrategy::curriculum;
  if (name == "mixed") return OrderStrategy::mixed;
  throw InvalidArgument("unknown curriculum strategy '" + std::string(name) + "'");
}

CurriculumPlan curriculum_order(std::span<const MaskedSample> samples) {
  for (const auto& s : samples) {
    if (s.k < 1 || s.k > kMaxMasks) {
      throw InvalidArgument("sample '" + s.sample_id + "' has k=" + std::to_string(s.k) +
                            " outside [1, 4]");
    }
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return samples[a].k < samples[b].k; });

  CurriculumPlan plan;
  plan.strategy = OrderStrategy::curriculum;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& s = samples[order[pos]];
    plan.ordered_ids.push_back(s.sample_id);
    plan.ks.push_back(s.k);
    auto [it, inserted] = plan.stage_boundaries.try_emplace(s.k, IndexRange{pos, pos + 1});
    if (!inserted) it->second.end = pos + 1;
  }
  return plan;
}

CurriculumPlan mixed_order(std::span<const MaskedSample> samples, std::uint64_t seed) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  seeded_shuffle(order, seed);

  CurriculumPlan plan;
  plan.strategy = OrderStrategy::mixed;
  plan.seed = seed;
  for (auto i : order) {
    plan.ordered_ids.push_back(samples[i].sample_id);
    plan.ks.push_back(samples[i].k);
  }
  return plan;
}

std::vector<MaskedSample> apply_stage_mix(std::span<const MaskedSample> samples,
                                          const StageMix& mix) {
  std::map<int, std::size_t> taken;
  std::vector<MaskedSample> out;
  for (const auto& s : samples) {
    auto quota = mix.per_k.find(s.k);
    if (quota == mix.per_k.end() || taken[s.k] >= quota->second) continue;
    ++taken[s.k];
    out.push_back(s);
  }
  return out;
}

void append_downstream(CurriculumPlan& plan, std::span<const std::string> ids, std::size_t limit) {
  const std::size_t begin = plan.ordered_ids.size();
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) {
    plan.ordered_ids.push_back(ids[i]);
    plan.ks.push_back(0);
  }
  if (plan.ordered_ids.size() > begin) plan.downstream = IndexRange{begin, plan.ordered_ids.size()};
}

std::string CurriculumPlan::to_json() const {
  nlohmann::ordered_json j;
  j["strategy"] = rampforge::to_string(strategy);
  j["seed"] = seed;
  j["ordered_ids"] = ordered_ids;
  j["ks"] = ks;
  auto stages = nlohmann::ordered_json::object();
  for (const auto& [k, range] : stage_boundaries) {
    stages[std::to_string(k)] = {range.begin, range.end};
  }
  j["stage_boundaries"] = std::move(stages);
  j["downstream"] = downstream ? nlohmann::ordered_json{downstream->begin, downstream->end}
                               : nlohmann::ordered_json(nullptr);
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

CurriculumPlan CurriculumPlan::from_json(std::string_view text) {
  CurriculumPlan plan;
  try {
    const auto j = nlohmann::json::parse(text);
    plan.strategy = order_strategy_from_string(j.at("strategy").get<std::string>());
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.ordered_ids = j.at("ordered_ids").get<std::vector<std::string>>();
    plan.ks = j.at("ks").get<std::vector<int>>();
    for (const auto& [key, range] : j.at("stage_boundaries").items()) {
      plan.stage_boundaries[std::stoi(key)] = {range.at(0).get<std::size_t>(),
                                               range.at(1).get<std::size_t>()};
    }
    if (const auto& d = j.at("downstream"); !d.is_null()) {
      plan.downstream = IndexRange{d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid curriculum plan: ") + e.what());
  }
  if (plan.ks.size() != plan.ordered_ids.size()) {
    throw InputError("curriculum plan: ks and ordered_ids differ in length");
  }
  return plan;
}

std::map<std::string, SftSource> ramp_sft_sources(std::span<const MaskedSample> samples,
                                                  std::span<const Trajectory> trajectories) {
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : trajectories) by_id[t.sample_id()] = &t;
  std::map<std::string, SftSource> sources;
  for (const auto& s : samples) {
    auto it = by_id.find(s.sample_id);
    if (it == by_id.end()) continue;
    sources[s.sample_id] = SftSource{render_ramp_prompt(s), s.k, *it->second};
  }
  return sources;
}

std::vector<SftRecord> build_sft_records(const CurriculumPlan& plan,
                                         const std::map<std::string, SftSource>& sources) {
  std::vector<SftRecord> records;
  records.reserve(plan.ordered_ids.size());
  for (const auto& id : plan.ordered_ids) {
    auto it = sources.find(id);
    if (it == sources.end()) {
      throw InvalidArgument("no kept trajectory for sample '" + id + "'");
    }
    const auto& src = it->second;
    SftRecord rec;
    rec.sample_id = id;
    rec.prompt = src.prompt;
    rec.completion = serialize_trajectory(src.trajectory);
    rec.loss_excluded_ranges = retrieved_spans(src.trajectory).excluded_ranges;
    rec.k = src.k;

    // The completion must re-parse to the same information blocks.
    const auto reparsed = parse_trajectory(rec.completion);
    if (retrieved_spans(reparsed).excluded_ranges != rec.loss_excluded_ranges) {
      throw InvalidArgument("record '" + id + "' loss mask disagrees with its completion");
    }
    for (const auto& r : rec.loss_excluded_ranges) {
      if (r.end > rec.completion.size() || r.begin > r.end) {
        throw InvalidArgument("record '" + id + "' has an out-of-range loss mask");
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::string to_jsonl(const SftRecord& record) {
  nlohmann::ordered_json j;
  j["sample_id"] = record.sample_id;
  j["prompt"] = record.prompt;
  j["completion"] = record.completion;
  auto ranges = nlohmann::ordered_json::array();
  for (const auto& r : record.loss_excluded_ranges) ranges.push_back({r.begin, r.end});
  j["loss_excluded_ranges"] = std::move(ranges);
  j["k"] = record.k;
  return dump_compact(j);
}

SftRecord sft_record_from_json(std::string_view json_line) {
  try {
    const auto j = nlohmann::json::parse(json_line);
    SftRecord rec;
    rec.sample_id = j.at("sample_id").get<std::string>();
    rec.prompt = j.at("prompt").get<std::string>();
    rec.completion = j.at("completion").get<std::string>();
    for (const auto& r : j.at("loss_excluded_ranges")) {
      rec.loss_excluded_ranges.push_back({r.at(0).get<std::size_t>(), r.at(1).get<std::size_t>()});
    }
    rec.k = j.at("k").get<int>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid SFT record: ") + e.what());
  }
}

std::size_t emit_sft_records(const CurriculumPlan& plan,
                             const std::map<std::string, SftSource>& sources,
                             const std::filesystem::path& path) {
  const auto records = build_sft_records(plan, sources);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& rec : records) out << to_jsonl(rec) << '\n';
  if (!out) throw InputError("write failure on " + path.string());
  return records.size();
}

}  // namespace rampforge
