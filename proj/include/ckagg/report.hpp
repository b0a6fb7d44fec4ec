#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckagg/simkernel.hpp"

namespace ckagg::report {

struct TableRow {
  std::string strategy;
  std::uint32_t node_count = 0;
  std::uint32_t ranks_per_node = 0;
  std::string mode = "simulate";  // simulate | execute
  double local_throughput = 0.0;
  double flush_throughput = 0.0;
  std::uint64_t conflicts = 0;
  std::uint64_t network_bytes = 0;
  double barrier_wait = 0.0;
  double slowdown = 0.0;

  friend bool operator==(const TableRow&, const TableRow&) = default;
};

struct ComparisonTable {
  std::vector<TableRow> rows;

  /// Throws InvalidArgument when (strategy, node_count, ranks_per_node, mode)
  /// is already present.
  void add(TableRow row);
};

TableRow row_from(const sim::Scenario& scenario, const sim::SimReport& report);
ComparisonTable make_table(std::span<const sim::SweepResult> results);

enum class Format { csv, json };
Format parse_format(std::string_view name);

/// Numeric columns that can be plotted or compared.
const std::vector<std::string>& metric_columns();

/// Six significant digits, locale independent.
std::string format_number(double value);

/// CSV: header plus one LF-terminated line per row. JSON: array of row
/// objects. Throws InvalidArgument on an empty table.
std::string emit_report(const ComparisonTable& table, Format format);
ComparisonTable parse_report(std::string_view text, Format format);

struct PlotSeries {
  std::string strategy;
  std::uint32_t node_count = 0;
  std::vector<double> x;  // ranks per node, ascending
  std::vector<double> y;
};

/// One series per (strategy, node_count), x = ranks_per_node. Throws
/// InvalidArgument on an unknown metric.
std::vector<PlotSeries> emit_plot_series(const ComparisonTable& table, std::string_view metric);
std::string format_plot_series(const std::vector<PlotSeries>& series, Format format);

}  // namespace ckagg::report
