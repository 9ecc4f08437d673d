// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rampforge/masking.hpp"
#include "rampforge/trajectory.hpp"

namespace rampforge {

enum class OrderStrategy { curriculum, mixed };

std::string_view to_string(OrderStrategy strategy);
OrderStrategy order_strategy_from_string(std::string_view name);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct CurriculumPlan {
  std::vector<std::string> ordered_ids;
  std::vector<int> ks;                      // parallel to ordered_ids; 0 for downstream data
  std::map<int, IndexRange> stage_boundaries;  // curriculum plans only
  std::optional<IndexRange> downstream;     // trailing downstream-task stage, if any
  OrderStrategy strategy = OrderStrategy::curriculum;
  std::uint64_t seed = 0;

  std::string to_json() const;
  static CurriculumPlan from_json(std::string_view text);
};

/// Stable sort by mask count; stages run k = 1, 2, 3, 4. Throws
/// InvalidArgument for a sample whose k is outside [1, 4].
CurriculumPlan curriculum_order(std::span<const MaskedSample> samples);

/// Seeded uniform shuffle of the inputs.
CurriculumPlan mixed_order(std::span<const MaskedSample> samples, std::uint64_t seed);

/// How many RAMP samples to draw per mask count and how many downstream-task
/// records to append after the last stage.
struct StageMix {
  std::map<int, std::size_t> per_k{{1, 100}, {2, 100}, {3, 100}, {4, 100}};
  std::size_t downstream = 60;
};

/// The first per_k[k] samples of each mask count, input order preserved.
std::vector<MaskedSample> apply_stage_mix(std::span<const MaskedSample> samples, const StageMix& mix);

/// Appends up to `limit` downstream ids as a final stage.
void append_downstream(CurriculumPlan& plan, std::span<const std::string> ids, std::size_t limit);

struct SftSource {
  std::string prompt;
  int k = 0;
  Trajectory trajectory;
};

struct SftRecord {
  std::string sample_id;
  std::string prompt;
  std::string completion;
  std::vector<ByteRange> loss_excluded_ranges;
  int k = 0;

  friend bool operator==(const SftRecord&, const SftRecord&) = default;
};

/// Prompt/k/trajectory for each sample that has a trajectory.
std::map<std::string, SftSource> ramp_sft_sources(std::span<const MaskedSample> samples,
                                                  std::span<const Trajectory> trajectories);

/// One record per plan id, in plan order. Throws InvalidArgument when an id
/// has no source or a record fails its own consistency check.
std::vector<SftRecord> build_sft_records(const CurriculumPlan& plan,
                                         const std::map<std::string, SftSource>& sources);

std::string to_jsonl(const SftRecord& record);
SftRecord sft_record_from_json(std::string_view json_line);

/// build_sft_records written as JSONL; returns the record count.
std::size_t emit_sft_records(const CurriculumPlan& plan,
                             const std::map<std::string, SftSource>& sources,
                             const std::filesystem::path& path);

}  // namespace rampforge
