#pragma once

// Experiment configuration: a JSON document. Unknown keys are rejected.
//
// {
//   "cluster":   {"node_count", "ranks_per_node", "local_write_bandwidth",
//                 "network_bandwidth", "node_load", "topology_coord"},
//   "checkpoint": {"uniform_bytes"} or {"sizes"},
//   "seed", "strategy" (name or list), "leaders", "io_threads",
//   "layout":    {"stripe_size", "io_server_count", "destination_file_count"},
//   "pfs":       {"per_server_bandwidth", "stripe_penalty"},
//   "interference": {"app_network_demand", "spare_cores"},
//   "weights":   {"size", "load", "topology"},
//   "mode" (simulate|execute|both), "format" (csv|json), "out", "run_dir",
//   "execute_byte_limit", "sweep_threads",
//   "grid":      {"node_count": [...], "ranks_per_node": [...], "strategy": [...]}
// }
//
// Required: cluster.node_count, cluster.ranks_per_node, checkpoint,
// layout.stripe_size, layout.io_server_count, strategy.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ckagg/report.hpp"
#include "ckagg/simkernel.hpp"
#include "ckagg/strategies.hpp"

namespace ckagg::config {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Mode { simulate, execute, both };
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct Grid {
  std::vector<std::uint32_t> node_count;
  std::vector<std::uint32_t> ranks_per_node;
  std::vector<Strategy> strategies;
};

struct ExperimentConfig {
  ClusterSpec cluster;
  bool explicit_node_arrays = false;
  std::optional<Bytes> uniform_bytes;
  std::vector<Bytes> sizes;
  std::uint64_t seed = 1;
  StripeLayout layout;
  sim::PfsModel pfs;
  sim::InterferenceModel interference;
  std::vector<Strategy> strategies;
  std::optional<std::uint32_t> leaders;
  std::uint32_t io_threads = 4;
  planner::ElectionWeights weights;
  Mode mode = Mode::simulate;
  report::Format format = report::Format::json;
  std::string out = "report.json";
  std::string run_dir = "run";
  Bytes execute_byte_limit = Bytes{1} << 30;
  std::uint32_t sweep_threads = 1;
  std::optional<Grid> grid;

  /// Cluster resized to the given scale; node arrays must then be defaults.
  ClusterSpec cluster_at(std::uint32_t nodes, std::uint32_t ranks_per_node) const;
  CheckpointSet checkpoints_for(const ClusterSpec& cluster) const;
  StrategyConfig strategy_config(Strategy s) const;
  sim::Scenario scenario(Strategy s, const ClusterSpec& cluster) const;

  /// Canonical document; parsing it yields an identical configuration.
  nlohmann::ordered_json to_json() const;
};

/// Throws ConfigError naming the offending key.
ExperimentConfig parse_config(const nlohmann::json& doc);
/// Parse errors carry line and column.
ExperimentConfig load_config(const std::filesystem::path& path);

/// 4 nodes x 8 ranks x 4 MiB, 1 MiB stripes, 4 I/O servers.
ExperimentConfig default_config();

}  // namespace ckagg::config
