#include "ckagg/strategies.hpp"

#include <algorithm>
#include <numeric>

namespace ckagg {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::file_per_process: return "file_per_process";
    case Strategy::posix_aggregate: return "posix_aggregate";
    case Strategy::collective_aggregate: return "collective_aggregate";
    case Strategy::leader_aggregate: return "leader_aggregate";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  throw InvalidArgument("unknown strategy '" + std::string(name) +
                        "' (expected file_per_process, posix_aggregate, collective_aggregate or leader_aggregate)");
}

std::uint32_t default_leader_count(const ClusterSpec& cluster, const StripeLayout& layout) {
  return std::min(cluster.node_count, layout.io_server_count);
}

FlushPlan plan_file_per_process(const CheckpointSet& ckpts, const ClusterSpec& cluster) {
  cluster.validate();
  ckpts.validate(cluster);
  FlushPlan plan;
  plan.strategy_name = std::string(to_string(Strategy::file_per_process));
  plan.file_sizes = ckpts.sizes;
  plan.placements.resize(ckpts.rank_count());
  for (RankId r = 0; r < ckpts.rank_count(); ++r) {
    plan.placements[r] = {r, 0};
    if (ckpts.sizes[r] == 0) continue;
    plan.extents.push_back({cluster.node_of(r), r, 0, ckpts.sizes[r], {{r, 0, ckpts.sizes[r]}}});
  }
  return plan;
}

FlushPlan plan_posix_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster, const StripeLayout& layout) {
  cluster.validate();
  ckpts.validate(cluster);
  layout.validate();
  const auto scan = planner::exclusive_prefix_sum(ckpts.sizes);

  FlushPlan plan;
  plan.strategy_name = std::string(to_string(Strategy::posix_aggregate));
  plan.file_sizes = {scan.total};
  plan.placements.resize(ckpts.rank_count());
  for (RankId r = 0; r < ckpts.rank_count(); ++r) {
    plan.placements[r] = {0, scan.offsets[r]};
    if (ckpts.sizes[r] == 0) continue;
    plan.extents.push_back({cluster.node_of(r), 0, scan.offsets[r], ckpts.sizes[r], {{r, 0, ckpts.sizes[r]}}});
  }
  return plan;
}

FlushPlan plan_collective_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster,
                                    const StripeLayout& layout, std::uint32_t leaders) {
  cluster.validate();
  ckpts.validate(cluster);
  layout.validate();
  if (leaders < 1 || leaders > cluster.node_count) {
    throw InvalidArgument("collective_aggregate: leader count " + std::to_string(leaders) + " outside [1, " +
                          std::to_string(cluster.node_count) + "]");
  }
  std::vector<NodeId> first_nodes(leaders);
  std::iota(first_nodes.begin(), first_nodes.end(), NodeId{0});
  const Bytes total = ckpts.total_bytes();
  const auto assignment = planner::assign_stripe_sets(first_nodes, total, layout);

  const planner::LeaderDirectory directory{assignment.leaders, assignment.stripe_sets, layout.stripe_size, total,
                                           layout.destination_file_count};
  const auto views = planner::piggyback_scan(ckpts.sizes, directory);
  const planner::GlobalSpace space(total, layout);

  FlushPlan plan;
  plan.strategy_name = std::string(to_string(Strategy::collective_aggregate));
  plan.file_sizes = space.file_sizes();
  plan.leaders = assignment.leaders;
  for (const auto& v : views) {
    const auto loc = space.locate(v.offset);
    plan.placements.push_back({loc.file_index, loc.offset});
  }

  std::vector<planner::TransferMove> all_moves;
  for (std::uint32_t j = 0; j < cluster.ranks_per_node; ++j) {
    std::vector<planner::TransferMove> phase_moves;
    for (NodeId n = 0; n < cluster.node_count; ++n) {
      const RankId r = n * cluster.ranks_per_node + j;
      auto mine = planner::moves_for_participant(r, n, ckpts.sizes[r], views[r]);
      phase_moves.insert(phase_moves.end(), mine.begin(), mine.end());
    }
    auto extents = planner::extents_from_moves(phase_moves);
    std::vector<std::size_t> phase;
    for (auto& e : extents) {
      phase.push_back(plan.extents.size());
      plan.extents.push_back(std::move(e));
    }
    plan.phases.push_back(std::move(phase));
    all_moves.insert(all_moves.end(), phase_moves.begin(), phase_moves.end());
  }
  plan.transfers = planner::transfers_from_moves(all_moves);
  return plan;
}

FlushPlan plan_leader_aggregate(const CheckpointSet& ckpts, const ClusterSpec& cluster, const StripeLayout& layout,
                                std::uint32_t leaders, const planner::ElectionWeights& weights) {
  cluster.validate();
  ckpts.validate(cluster);
  layout.validate();
  const auto node_bytes = ckpts.node_bytes(cluster);
  const auto elected = planner::elect_leaders(cluster, node_bytes, leaders, weights);
  auto assignment = planner::assign_stripe_sets(elected.leaders, ckpts.total_bytes(), layout);
  assignment.leader_scores = elected.leader_scores;
  auto result = planner::build_transfer_schedule(ckpts, cluster, assignment, layout);
  result.plan.strategy_name = std::string(to_string(Strategy::leader_aggregate));
  return std::move(result.plan);
}

FlushPlan make_plan(const StrategyConfig& config, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                    const StripeLayout& layout) {
  const std::uint32_t m = config.leaders.value_or(default_leader_count(cluster, layout));
  switch (config.strategy) {
    case Strategy::file_per_process: return plan_file_per_process(ckpts, cluster);
    case Strategy::posix_aggregate: return plan_posix_aggregate(ckpts, cluster, layout);
    case Strategy::collective_aggregate: return plan_collective_aggregate(ckpts, cluster, layout, m);
    case Strategy::leader_aggregate: return plan_leader_aggregate(ckpts, cluster, layout, m, config.weights);
  }
  throw InvalidArgument("unknown strategy");
}

}  // namespace ckagg
