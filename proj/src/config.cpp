#include "ckagg/config.hpp"

#include <fstream>
#include <set>

namespace ckagg::config {

namespace {

using json = nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.contains(key)) {
      throw ConfigError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!obj.contains(key)) throw ConfigError("config: missing required key '" + path + "'");
    throw ConfigError("config: bad value for '" + path + "': " + e.what());
  }
}

template <typename T>
void get_optional(const json& obj, const char* key, const std::string& where, T& out) {
  if (obj.contains(key)) out = get<T>(obj, key, where);
}

const json& child(const json& doc, const char* key) {
  if (!doc.contains(key)) throw ConfigError(std::string("config: missing required key '") + key + "'");
  return doc.at(key);
}

std::vector<Strategy> parse_strategies(const json& value, const std::string& where) {
  std::vector<Strategy> out;
  try {
    if (value.is_string()) {
      out.push_back(parse_strategy(value.get<std::string>()));
    } else if (value.is_array()) {
      for (const auto& v : value) out.push_back(parse_strategy(v.get<std::string>()));
    } else {
      throw ConfigError("config: '" + where + "' must be a strategy name or a list of names");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
  if (out.empty()) throw ConfigError("config: '" + where + "' is empty");
  return out;
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::simulate: return "simulate";
    case Mode::execute: return "execute";
    case Mode::both: return "both";
  }
  return "unknown";
}

Mode parse_mode(std::string_view name) {
  if (name == "simulate") return Mode::simulate;
  if (name == "execute") return Mode::execute;
  if (name == "both") return Mode::both;
  throw ConfigError("unknown mode '" + std::string(name) + "' (expected simulate, execute or both)");
}

ClusterSpec ExperimentConfig::cluster_at(std::uint32_t nodes, std::uint32_t ranks_per_node) const {
  if (nodes == cluster.node_count && ranks_per_node == cluster.ranks_per_node) return cluster;
  if (explicit_node_arrays && nodes != cluster.node_count) {
    throw ConfigError("config: node_load/topology_coord fix the node count; remove them to sweep node_count");
  }
  ClusterSpec c = explicit_node_arrays ? cluster : ClusterSpec::uniform(nodes, ranks_per_node);
  c.node_count = nodes;
  c.ranks_per_node = ranks_per_node;
  c.local_write_bandwidth = cluster.local_write_bandwidth;
  c.network_bandwidth = cluster.network_bandwidth;
  return c;
}

CheckpointSet ExperimentConfig::checkpoints_for(const ClusterSpec& c) const {
  if (uniform_bytes) return CheckpointSet::uniform(c, *uniform_bytes, seed);
  if (sizes.size() != c.rank_count()) {
    throw ConfigError("config: checkpoint.sizes has " + std::to_string(sizes.size()) + " entries, need " +
                      std::to_string(c.rank_count()));
  }
  return CheckpointSet{sizes, seed};
}

StrategyConfig ExperimentConfig::strategy_config(Strategy s) const {
  StrategyConfig sc;
  sc.strategy = s;
  sc.leaders = leaders;
  sc.io_threads = io_threads;
  sc.weights = weights;
  return sc;
}

sim::Scenario ExperimentConfig::scenario(Strategy s, const ClusterSpec& c) const {
  return {strategy_config(s), c, checkpoints_for(c), layout, pfs, interference};
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json doc;
  auto& c = doc["cluster"];
  c["node_count"] = cluster.node_count;
  c["ranks_per_node"] = cluster.ranks_per_node;
  c["local_write_bandwidth"] = cluster.local_write_bandwidth;
  c["network_bandwidth"] = cluster.network_bandwidth;
  if (explicit_node_arrays) {
    c["node_load"] = cluster.node_load;
    c["topology_coord"] = cluster.topology_coord;
  }
  if (uniform_bytes) {
    doc["checkpoint"]["uniform_bytes"] = *uniform_bytes;
  } else {
    doc["checkpoint"]["sizes"] = sizes;
  }
  doc["seed"] = seed;
  doc["layout"] = {{"stripe_size", layout.stripe_size},
                   {"io_server_count", layout.io_server_count},
                   {"destination_file_count", layout.destination_file_count}};
  doc["pfs"] = {{"per_server_bandwidth", pfs.per_server_bandwidth}, {"stripe_penalty", pfs.stripe_penalty}};
  doc["interference"] = {{"app_network_demand", interference.app_network_demand},
                         {"spare_cores", interference.spare_cores}};
  auto& names = doc["strategy"] = nlohmann::ordered_json::array();
  for (Strategy s : strategies) names.push_back(std::string(ckagg::to_string(s)));
  if (leaders) doc["leaders"] = *leaders;
  doc["io_threads"] = io_threads;
  doc["weights"] = {{"size", weights.size}, {"load", weights.load}, {"topology", weights.topology}};
  doc["mode"] = std::string(to_string(mode));
  doc["format"] = format == report::Format::csv ? "csv" : "json";
  doc["out"] = out;
  doc["run_dir"] = run_dir;
  doc["execute_byte_limit"] = execute_byte_limit;
  doc["sweep_threads"] = sweep_threads;
  if (grid) {
    auto& g = doc["grid"];
    g["node_count"] = grid->node_count;
    g["ranks_per_node"] = grid->ranks_per_node;
    auto& gs = g["strategy"] = nlohmann::ordered_json::array();
    for (Strategy s : grid->strategies) gs.push_back(std::string(ckagg::to_string(s)));
  }
  return doc;
}

ExperimentConfig parse_config(const json& doc) {
  reject_unknown(doc, "",
                 {"cluster", "checkpoint", "seed", "layout", "pfs", "interference", "strategy", "leaders", "io_threads",
                  "weights", "mode", "format", "out", "run_dir", "execute_byte_limit", "sweep_threads", "grid"});
  ExperimentConfig cfg;

  const auto& c = child(doc, "cluster");
  reject_unknown(c, "cluster",
                 {"node_count", "ranks_per_node", "local_write_bandwidth", "network_bandwidth", "node_load",
                  "topology_coord"});
  const auto nodes = get<std::uint32_t>(c, "node_count", "cluster");
  const auto rpn = get<std::uint32_t>(c, "ranks_per_node", "cluster");
  if (nodes < 1 || rpn < 1) throw ConfigError("config: cluster.node_count and cluster.ranks_per_node must be >= 1");
  cfg.cluster = ClusterSpec::uniform(nodes, rpn);
  get_optional(c, "local_write_bandwidth", "cluster", cfg.cluster.local_write_bandwidth);
  get_optional(c, "network_bandwidth", "cluster", cfg.cluster.network_bandwidth);
  if (c.contains("node_load") || c.contains("topology_coord")) cfg.explicit_node_arrays = true;
  get_optional(c, "node_load", "cluster", cfg.cluster.node_load);
  get_optional(c, "topology_coord", "cluster", cfg.cluster.topology_coord);
  try {
    cfg.cluster.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const auto& ck = child(doc, "checkpoint");
  reject_unknown(ck, "checkpoint", {"uniform_bytes", "sizes"});
  if (ck.contains("uniform_bytes") == ck.contains("sizes")) {
    throw ConfigError("config: checkpoint needs exactly one of 'uniform_bytes' or 'sizes'");
  }
  if (ck.contains("uniform_bytes")) {
    cfg.uniform_bytes = get<Bytes>(ck, "uniform_bytes", "checkpoint");
  } else {
    cfg.sizes = get<std::vector<Bytes>>(ck, "sizes", "checkpoint");
  }
  get_optional(doc, "seed", "", cfg.seed);

  const auto& l = child(doc, "layout");
  reject_unknown(l, "layout", {"stripe_size", "io_server_count", "destination_file_count"});
  cfg.layout.stripe_size = get<Bytes>(l, "stripe_size", "layout");
  cfg.layout.io_server_count = get<std::uint32_t>(l, "io_server_count", "layout");
  get_optional(l, "destination_file_count", "layout", cfg.layout.destination_file_count);

  if (doc.contains("pfs")) {
    const auto& p = doc.at("pfs");
    reject_unknown(p, "pfs", {"per_server_bandwidth", "stripe_penalty"});
    get_optional(p, "per_server_bandwidth", "pfs", cfg.pfs.per_server_bandwidth);
    get_optional(p, "stripe_penalty", "pfs", cfg.pfs.stripe_penalty);
  }
  if (doc.contains("interference")) {
    const auto& i = doc.at("interference");
    reject_unknown(i, "interference", {"app_network_demand", "spare_cores"});
    get_optional(i, "app_network_demand", "interference", cfg.interference.app_network_demand);
    get_optional(i, "spare_cores", "interference", cfg.interference.spare_cores);
  }

  cfg.strategies = parse_strategies(child(doc, "strategy"), "strategy");
  if (doc.contains("leaders")) cfg.leaders = get<std::uint32_t>(doc, "leaders", "");
  get_optional(doc, "io_threads", "", cfg.io_threads);
  if (doc.contains("weights")) {
    const auto& w = doc.at("weights");
    reject_unknown(w, "weights", {"size", "load", "topology"});
    get_optional(w, "size", "weights", cfg.weights.size);
    get_optional(w, "load", "weights", cfg.weights.load);
    get_optional(w, "topology", "weights", cfg.weights.topology);
  }
  if (doc.contains("mode")) cfg.mode = parse_mode(get<std::string>(doc, "mode", ""));
  if (doc.contains("format")) {
    try {
      cfg.format = report::parse_format(get<std::string>(doc, "format", ""));
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  get_optional(doc, "out", "", cfg.out);
  get_optional(doc, "run_dir", "", cfg.run_dir);
  get_optional(doc, "execute_byte_limit", "", cfg.execute_byte_limit);
  get_optional(doc, "sweep_threads", "", cfg.sweep_threads);

  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    reject_unknown(g, "grid", {"node_count", "ranks_per_node", "strategy"});
    Grid grid;
    grid.node_count = g.contains("node_count") ? get<std::vector<std::uint32_t>>(g, "node_count", "grid")
                                               : std::vector<std::uint32_t>{cfg.cluster.node_count};
    grid.ranks_per_node = g.contains("ranks_per_node") ? get<std::vector<std::uint32_t>>(g, "ranks_per_node", "grid")
                                                       : std::vector<std::uint32_t>{cfg.cluster.ranks_per_node};
    grid.strategies = g.contains("strategy") ? parse_strategies(g.at("strategy"), "grid.strategy") : cfg.strategies;
    for (auto v : grid.node_count) {
      if (v < 1) throw ConfigError("config: grid.node_count entries must be >= 1");
    }
    for (auto v : grid.ranks_per_node) {
      if (v < 1) throw ConfigError("config: grid.ranks_per_node entries must be >= 1");
    }
    cfg.grid = std::move(grid);
  }

  try {
    cfg.layout.validate();
    cfg.pfs.validate();
    cfg.interference.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.io_threads < 1) throw ConfigError("config: io_threads must be >= 1");
  if (cfg.weights.size < 0 || cfg.weights.load < 0 || cfg.weights.topology < 0) {
    throw ConfigError("config: weights must be non-negative");
  }
  if (!cfg.uniform_bytes) (void)cfg.checkpoints_for(cfg.cluster);
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

ExperimentConfig default_config() {
  const json doc = {
      {"cluster", {{"node_count", 4}, {"ranks_per_node", 8}}},
      {"checkpoint", {{"uniform_bytes", 4 << 20}}},
      {"seed", 1},
      {"layout", {{"stripe_size", 1 << 20}, {"io_server_count", 4}}},
      {"strategy", {"file_per_process", "posix_aggregate", "collective_aggregate", "leader_aggregate"}},
  };
  return parse_config(doc);
}

}  // namespace ckagg::config
