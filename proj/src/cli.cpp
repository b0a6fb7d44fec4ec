#include "ckagg/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "ckagg/config.hpp"
#include "ckagg/planner.hpp"
#include "ckagg/report.hpp"
#include "ckagg/simkernel.hpp"

namespace ckagg::cli {

namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::string config;
  std::string strategy;
  std::string mode;
  std::string out;
  std::string format;
  std::optional<std::uint64_t> seed;
};

config::ExperimentConfig resolve(const Overrides& o) {
  auto cfg = o.config.empty() ? config::default_config() : config::load_config(o.config);
  try {
    if (!o.strategy.empty()) cfg.strategies = {parse_strategy(o.strategy)};
    if (!o.format.empty()) cfg.format = report::parse_format(o.format);
  } catch (const InvalidArgument& e) {
    throw config::ConfigError(e.what());
  }
  if (!o.mode.empty()) cfg.mode = config::parse_mode(o.mode);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw exec::IoError("cannot write " + path.string());
}

void write_report(const config::ExperimentConfig& cfg, const report::ComparisonTable& table) {
  write_text(cfg.out, report::emit_report(table, cfg.format));
  write_text(cfg.out + ".config.json", cfg.to_json().dump(2) + "\n");
}

// Checks a run directory from its manifest alone.
int verify_directory(const exec::RunDirectory& dir, std::ostream& out, std::ostream& err) {
  exec::Manifest m;
  try {
    m = exec::read_manifest(dir);
  } catch (const exec::IoError& e) {
    err << "verify: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "verify: " << e.what() << '\n';
    return kExitVerifyFailed;
  }
  if (m.ckpts.sizes.size() != static_cast<std::size_t>(m.node_count) * m.ranks_per_node) {
    err << "verify: manifest sizes do not match " << m.node_count << "x" << m.ranks_per_node << " ranks\n";
    return kExitVerifyFailed;
  }
  if (auto check = plan_coverage_check(m.plan, m.ckpts); !check) {
    err << "verify: manifest plan does not cover the checkpoints: " << check.message << '\n';
    return kExitVerifyFailed;
  }
  const auto result = exec::verify_aggregate(dir, m.ckpts, m.plan);
  if (!result) {
    err << "verify: MISMATCH in " << result.file << " at offset " << result.offset << ": " << result.message << '\n';
    return kExitVerifyFailed;
  }
  out << "verify: ok (" << m.plan.file_count() << " file(s), " << m.ckpts.total_bytes() << " bytes, strategy "
      << m.plan.strategy_name << ")\n";
  return kExitOk;
}

void clear_run_directory(const exec::RunDirectory& dir) {
  fs::remove_all(dir.root() / "local");
  fs::remove_all(dir.dest_dir());
  fs::remove(dir.manifest_path());
}

int cmd_run(const config::ExperimentConfig& cfg, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  const ClusterSpec& cluster = cfg.cluster;
  const CheckpointSet ckpts = cfg.checkpoints_for(cluster);
  const bool simulate = cfg.mode != config::Mode::execute;
  const bool execute = cfg.mode != config::Mode::simulate;
  if (execute && ckpts.total_bytes() > cfg.execute_byte_limit) {
    err << "config: execute mode would write " << ckpts.total_bytes() << " bytes, above execute_byte_limit "
        << cfg.execute_byte_limit << '\n';
    return kExitUsage;
  }

  report::ComparisonTable table;
  int status = kExitOk;
  for (Strategy s : cfg.strategies) {
    const auto scenario = cfg.scenario(s, cluster);
    const FlushPlan plan = make_plan(scenario.strategy, ckpts, cluster, cfg.layout);
    if (simulate) {
      const auto rep =
          sim::simulate(plan, ckpts, cluster, cfg.layout, cfg.pfs, cfg.interference, cfg.io_threads);
      table.add(report::row_from(scenario, rep));
      out << to_string(s) << ": simulated flush " << report::format_number(rep.flush_seconds) << " s, "
          << report::format_number(rep.flush_throughput) << " B/s, " << rep.conflicted_stripe_count
          << " conflicted stripes\n";
    }
    if (execute) {
      const exec::RunDirectory dir(fs::path(cfg.run_dir) / std::string(to_string(s)));
      clear_run_directory(dir);
      const auto local = exec::run_local_phase(ckpts, cluster, dir);
      exec::write_manifest(dir, plan, ckpts, cluster);
      const auto flush = exec::run_flush_phase(plan, ckpts, cluster, dir, cfg.io_threads);
      if (hooks.after_flush) hooks.after_flush(dir);

      report::TableRow row;
      row.strategy = std::string(to_string(s));
      row.node_count = cluster.node_count;
      row.ranks_per_node = cluster.ranks_per_node;
      row.mode = "execute";
      const double bytes = static_cast<double>(ckpts.total_bytes());
      row.local_throughput = local.seconds > 0 ? bytes / local.seconds : 0.0;
      row.flush_throughput = flush.seconds > 0 ? bytes / flush.seconds : 0.0;
      row.conflicts = planner::stripe_conflicts(plan.extents, cfg.layout).conflicted_stripe_count;
      row.network_bytes = plan.network_bytes();
      table.add(std::move(row));

      const auto direct = exec::verify_aggregate(dir, ckpts, plan);
      if (!direct) {
        err << to_string(s) << ": MISMATCH in " << direct.file << " at offset " << direct.offset << ": "
            << direct.message << '\n';
        status = kExitVerifyFailed;
        continue;
      }
      if (verify_directory(dir, out, err) != kExitOk) status = kExitVerifyFailed;
    }
  }
  write_report(cfg, table);
  out << "report: " << cfg.out << '\n';
  return status;
}

int cmd_sweep(const config::ExperimentConfig& cfg, const std::string& plot_metric, std::ostream& out) {
  if (!cfg.grid) throw config::ConfigError("config: sweep needs a 'grid' section");
  const auto& g = *cfg.grid;
  if (g.node_count.empty() || g.ranks_per_node.empty() || g.strategies.empty()) {
    throw config::ConfigError("config: sweep grid is empty");
  }
  std::vector<sim::Scenario> scenarios;
  for (auto nodes : g.node_count) {
    for (auto rpn : g.ranks_per_node) {
      const auto cluster = cfg.cluster_at(nodes, rpn);
      for (Strategy s : g.strategies) scenarios.push_back(cfg.scenario(s, cluster));
    }
  }
  const auto results = sim::sweep(scenarios, cfg.sweep_threads);
  const auto table = report::make_table(results);
  write_report(cfg, table);
  out << "sweep: " << results.size() << " scenarios -> " << cfg.out << '\n';
  if (!plot_metric.empty()) {
    const auto series = report::emit_plot_series(table, plot_metric);
    const std::string path = cfg.out + "." + plot_metric + (cfg.format == report::Format::csv ? ".csv" : ".json");
    write_text(path, report::format_plot_series(series, cfg.format));
    out << "series: " << path << '\n';
  }
  return kExitOk;
}

int cmd_plan(const config::ExperimentConfig& cfg, bool out_given, std::ostream& out) {
  const auto ckpts = cfg.checkpoints_for(cfg.cluster);
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (Strategy s : cfg.strategies) {
    doc.push_back(exec::plan_to_json(make_plan(cfg.strategy_config(s), ckpts, cfg.cluster, cfg.layout)));
  }
  const std::string text = (doc.size() == 1 ? doc[0] : doc).dump(2) + "\n";
  if (out_given) {
    write_text(cfg.out, text);
  } else {
    out << text;
  }
  return kExitOk;
}

void add_common(CLI::App* cmd, Overrides& o, bool with_mode) {
  cmd->add_option("--config", o.config, "Experiment configuration (JSON)");
  cmd->add_option("--strategy", o.strategy, "file_per_process | posix_aggregate | collective_aggregate | leader_aggregate");
  if (with_mode) cmd->add_option("--mode", o.mode, "simulate | execute | both");
  cmd->add_option("--out", o.out, "Report path");
  cmd->add_option("--format", o.format, "csv | json");
  cmd->add_option("--seed", o.seed, "Content seed (u64)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks) {
  CLI::App app{"Plan, simulate, execute and verify aggregated checkpoint flushes", "ckagg"};
  app.require_subcommand(1);

  Overrides run_o, sweep_o, plan_o;
  std::string plot_metric;
  std::string verify_dir;

  auto* run_cmd = app.add_subcommand("run", "Plan, simulate and/or execute the configured strategies");
  add_common(run_cmd, run_o, true);
  auto* sweep_cmd = app.add_subcommand("sweep", "Simulate the configured scenario grid");
  add_common(sweep_cmd, sweep_o, false);
  sweep_cmd->add_option("--plot", plot_metric, "Also write per-strategy series of this metric");
  auto* verify_cmd = app.add_subcommand("verify", "Re-check a run directory against its manifest");
  verify_cmd->add_option("run_directory", verify_dir, "Run directory")->required();
  auto* plan_cmd = app.add_subcommand("plan", "Print the flush plan as JSON");
  add_common(plan_cmd, plan_o, false);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(resolve(run_o), out, err, hooks);
    if (*sweep_cmd) return cmd_sweep(resolve(sweep_o), plot_metric, out);
    if (*plan_cmd) return cmd_plan(resolve(plan_o), !plan_o.out.empty(), out);
    if (*verify_cmd) return verify_directory(exec::RunDirectory(verify_dir), out, err);
  } catch (const config::ConfigError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitVerifyFailed;
  }
  return kExitUsage;
}

}  // namespace ckagg::cli
