#include "ckagg/report.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace ckagg::report {

namespace {

const std::vector<std::string> kColumns = {"strategy",         "node_count", "ranks_per_node", "mode",
                                           "local_throughput", "flush_throughput", "conflicts",  "network_bytes",
                                           "barrier_wait",     "slowdown"};

// Rounds through the printed form so JSON and CSV carry the same value.
double rounded(double v) {
  const std::string s = format_number(v);
  double out = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), out);
  return out;
}

double metric_of(const TableRow& r, std::string_view metric) {
  if (metric == "local_throughput") return r.local_throughput;
  if (metric == "flush_throughput") return r.flush_throughput;
  if (metric == "conflicts") return static_cast<double>(r.conflicts);
  if (metric == "network_bytes") return static_cast<double>(r.network_bytes);
  if (metric == "barrier_wait") return r.barrier_wait;
  if (metric == "slowdown") return r.slowdown;
  throw InvalidArgument("unknown metric '" + std::string(metric) + "'");
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::string_view column) {
  T value{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw InvalidArgument("report: bad value '" + std::string(field) + "' in column " + std::string(column));
  }
  return value;
}

}  // namespace

void ComparisonTable::add(TableRow row) {
  for (const auto& r : rows) {
    if (std::tie(r.strategy, r.node_count, r.ranks_per_node, r.mode) ==
        std::tie(row.strategy, row.node_count, row.ranks_per_node, row.mode)) {
      throw InvalidArgument("report: duplicate row for " + row.strategy + " at " + std::to_string(row.node_count) +
                            "x" + std::to_string(row.ranks_per_node));
    }
  }
  rows.push_back(std::move(row));
}

TableRow row_from(const sim::Scenario& scenario, const sim::SimReport& report) {
  TableRow row;
  row.strategy = std::string(to_string(scenario.strategy.strategy));
  row.node_count = scenario.cluster.node_count;
  row.ranks_per_node = scenario.cluster.ranks_per_node;
  row.local_throughput = report.local_throughput;
  row.flush_throughput = report.flush_throughput;
  row.conflicts = report.conflicted_stripe_count;
  row.network_bytes = report.total_network_bytes;
  row.barrier_wait = report.phase_barrier_wait_seconds;
  row.slowdown = report.app_slowdown_estimate;
  return row;
}

ComparisonTable make_table(std::span<const sim::SweepResult> results) {
  ComparisonTable table;
  for (const auto& r : results) table.add(row_from(r.scenario, r.report));
  return table;
}

Format parse_format(std::string_view name) {
  if (name == "csv") return Format::csv;
  if (name == "json") return Format::json;
  throw InvalidArgument("unknown output format '" + std::string(name) + "' (expected csv or json)");
}

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> metrics(kColumns.begin() + 4, kColumns.end());
  return metrics;
}

std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
  if (ec != std::errc()) throw std::logic_error("format_number failed");
  return std::string(buf, ptr);
}

std::string emit_report(const ComparisonTable& table, Format format) {
  if (table.rows.empty()) throw InvalidArgument("report: no results to emit");
  if (format == Format::csv) {
    std::ostringstream out;
    for (std::size_t i = 0; i < kColumns.size(); ++i) out << (i ? "," : "") << kColumns[i];
    out << '\n';
    for (const auto& r : table.rows) {
      out << r.strategy << ',' << r.node_count << ',' << r.ranks_per_node << ',' << r.mode << ','
          << format_number(r.local_throughput) << ',' << format_number(r.flush_throughput) << ',' << r.conflicts
          << ',' << r.network_bytes << ',' << format_number(r.barrier_wait) << ',' << format_number(r.slowdown)
          << '\n';
    }
    return out.str();
  }
  auto doc = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json row;
    row["strategy"] = r.strategy;
    row["node_count"] = r.node_count;
    row["ranks_per_node"] = r.ranks_per_node;
    row["mode"] = r.mode;
    row["local_throughput"] = rounded(r.local_throughput);
    row["flush_throughput"] = rounded(r.flush_throughput);
    row["conflicts"] = r.conflicts;
    row["network_bytes"] = r.network_bytes;
    row["barrier_wait"] = rounded(r.barrier_wait);
    row["slowdown"] = rounded(r.slowdown);
    doc.push_back(std::move(row));
  }
  return doc.dump(2) + "\n";
}

ComparisonTable parse_report(std::string_view text, Format format) {
  ComparisonTable table;
  if (format == Format::csv) {
    auto lines = split(text, '\n');
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw InvalidArgument("report: empty CSV");
    const auto header = split(lines[0], ',');
    if (header.size() != kColumns.size() || !std::equal(header.begin(), header.end(), kColumns.begin())) {
      throw InvalidArgument("report: unexpected CSV header");
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto f = split(lines[i], ',');
      if (f.size() != kColumns.size()) throw InvalidArgument("report: wrong field count on line " + std::to_string(i + 1));
      TableRow r;
      r.strategy = std::string(f[0]);
      r.node_count = parse_number<std::uint32_t>(f[1], kColumns[1]);
      r.ranks_per_node = parse_number<std::uint32_t>(f[2], kColumns[2]);
      r.mode = std::string(f[3]);
      r.local_throughput = parse_number<double>(f[4], kColumns[4]);
      r.flush_throughput = parse_number<double>(f[5], kColumns[5]);
      r.conflicts = parse_number<std::uint64_t>(f[6], kColumns[6]);
      r.network_bytes = parse_number<std::uint64_t>(f[7], kColumns[7]);
      r.barrier_wait = parse_number<double>(f[8], kColumns[8]);
      r.slowdown = parse_number<double>(f[9], kColumns[9]);
      table.add(std::move(r));
    }
    return table;
  }
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& j : doc) {
      TableRow r;
      r.strategy = j.at("strategy").get<std::string>();
      r.node_count = j.at("node_count").get<std::uint32_t>();
      r.ranks_per_node = j.at("ranks_per_node").get<std::uint32_t>();
      r.mode = j.at("mode").get<std::string>();
      r.local_throughput = j.at("local_throughput").get<double>();
      r.flush_throughput = j.at("flush_throughput").get<double>();
      r.conflicts = j.at("conflicts").get<std::uint64_t>();
      r.network_bytes = j.at("network_bytes").get<std::uint64_t>();
      r.barrier_wait = j.at("barrier_wait").get<double>();
      r.slowdown = j.at("slowdown").get<double>();
      table.add(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("report: ") + e.what());
  }
  return table;
}

std::vector<PlotSeries> emit_plot_series(const ComparisonTable& table, std::string_view metric) {
  const auto& metrics = metric_columns();
  if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end()) {
    throw InvalidArgument("unknown metric '" + std::string(metric) + "'");
  }
  std::map<std::pair<std::string, std::uint32_t>, std::vector<std::pair<double, double>>> grouped;
  std::vector<std::pair<std::string, std::uint32_t>> first_seen;
  for (const auto& r : table.rows) {
    const auto key = std::make_pair(r.strategy + (r.mode == "simulate" ? "" : "/" + r.mode), r.node_count);
    if (!grouped.contains(key)) first_seen.push_back(key);
    grouped[key].emplace_back(static_cast<double>(r.ranks_per_node), metric_of(r, metric));
  }
  std::vector<PlotSeries> out;
  for (const auto& key : first_seen) {
    auto points = grouped[key];
    std::sort(points.begin(), points.end());
    PlotSeries s{key.first, key.second, {}, {}};
    for (const auto& [x, y] : points) {
      s.x.push_back(x);
      s.y.push_back(y);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_plot_series(const std::vector<PlotSeries>& series, Format format) {
  if (format == Format::csv) {
    std::ostringstream out;
    out << "series,node_count,x,y\n";
    for (const auto& s : series) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << s.strategy << ',' << s.node_count << ',' << format_number(s.x[i]) << ',' << format_number(s.y[i])
            << '\n';
      }
    }
    return out.str();
  }
  auto doc = nlohmann::ordered_json::array();
  for (const auto& s : series) {
    nlohmann::ordered_json j;
    j["series"] = s.strategy;
    j["node_count"] = s.node_count;
    std::vector<double> x, y;
    for (double v : s.x) x.push_back(rounded(v));
    for (double v : s.y) y.push_back(rounded(v));
    j["x"] = x;
    j["y"] = y;
    doc.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

}  // namespace ckagg::report
