#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "ckagg/model.hpp"
#include "ckagg/planner.hpp"

namespace ckagg {

enum class Strategy { file_per_process, posix_aggregate, collective_aggregate, leader_aggregate };

std::string_view to_string(Strategy s);
/// Throws InvalidArgument on an unknown name.
Strategy parse_strategy(std::string_view name);

inline constexpr Strategy kAllStrategies[] = {Strategy::file_per_process, Strategy::posix_aggregate,
                                              Strategy::collective_aggregate, Strategy::leader_aggregate};

struct StrategyConfig {
  Strategy strategy = Strategy::leader_aggregate;
  std::optional<std::uint32_t> leaders;  // M; defaults to min(node_count, io_server_count)
  std::uint32_t io_threads = 4;
  planner::ElectionWeights weights;
};

/// min(node_count, io_server_count): no more concurrent writers than servers.
std::uint32_t default_leader_count(const ClusterSpec& cluster, const StripeLayout& layout);

// One destination file per rank, written by the rank's own node.
FlushPlan plan_file_per_process(const CheckpointSet& ckpts, const ClusterSpec& cluster);

// One shared file; every backend writes its ranks at their prefix-sum offset.
FlushPlan plan_posix_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster, const StripeLayout& layout);

/// The first `leaders` nodes gather and write over disjoint stripe ranges.
/// One phase per local checkpoint index: phase j carries every node's j-th
/// rank, and phases run one after another.
FlushPlan plan_collective_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster,
                                    const StripeLayout& layout, std::uint32_t leaders);

/// Elected leaders own stripe-aligned ranges; senders split their data at
/// leader boundaries. Single phase, one writer per stripe.
FlushPlan plan_leader_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster, const StripeLayout& layout,
                                std::uint32_t leaders, const planner::ElectionWeights& weights);

FlushPlan make_plan(const StrategyConfig& config, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                    const StripeLayout& layout);

}  // namespace ckagg
