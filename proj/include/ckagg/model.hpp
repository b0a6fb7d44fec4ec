#pragma once

// Domain types shared by the planner, the strategies, the executor and the
// simulator. Everything here is a plain value type; once built, instances are
// only read, so they can be shared freely between threads.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ckagg {

using Bytes = std::uint64_t;
using NodeId = std::uint32_t;
using RankId = std::uint32_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Byte counters left the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

struct ClusterSpec {
  std::uint32_t node_count = 1;
  std::uint32_t ranks_per_node = 1;
  double local_write_bandwidth = 2.0e9;  // bytes/s per node
  double network_bandwidth = 10.0e9;     // bytes/s per node link
  std::vector<double> node_load;          // [0,1] per node
  std::vector<std::uint64_t> topology_coord;

  /// Nodes with zero load and linear coordinates 0..n-1.
  static ClusterSpec uniform(std::uint32_t nodes, std::uint32_t ranks_per_node);

  std::uint32_t rank_count() const { return node_count * ranks_per_node; }
  NodeId node_of(RankId rank) const { return rank / ranks_per_node; }
  std::uint32_t local_index(RankId rank) const { return rank % ranks_per_node; }

  /// Throws InvalidArgument when an invariant does not hold.
  void validate() const;
};

struct CheckpointSet {
  std::vector<Bytes> sizes;  // node-major rank order
  std::uint64_t content_seed = 0;

  static CheckpointSet uniform(const ClusterSpec& cluster, Bytes size, std::uint64_t seed);

  std::uint32_t rank_count() const { return static_cast<std::uint32_t>(sizes.size()); }
  /// Checked sum; throws OverflowError.
  Bytes total_bytes() const;
  /// Per-node sums in node order.
  std::vector<Bytes> node_bytes(const ClusterSpec& cluster) const;
  void validate(const ClusterSpec& cluster) const;
};

struct StripeLayout {
  Bytes stripe_size = 1 << 20;
  std::uint32_t io_server_count = 1;
  std::uint32_t destination_file_count = 1;

  std::uint64_t stripe_of(Bytes offset) const { return offset / stripe_size; }
  std::uint32_t server_of(std::uint64_t stripe_index) const {
    return static_cast<std::uint32_t>(stripe_index % io_server_count);
  }
  // Each file starts its round-robin on a different server, the way a
  // striped file system spreads the first stripe of new files. File 0
  // reduces to server_of(stripe).
  std::uint32_t server_of(std::uint32_t file_index, std::uint64_t stripe_index) const {
    return static_cast<std::uint32_t>((stripe_index + file_index) % io_server_count);
  }

  void validate() const;
};

/// A slice of one rank's checkpoint.
struct SourceRange {
  RankId rank = 0;
  Bytes offset = 0;
  Bytes length = 0;

  friend bool operator==(const SourceRange&, const SourceRange&) = default;
};

struct WriteExtent {
  NodeId writer = 0;
  std::uint32_t file_index = 0;
  Bytes offset = 0;
  Bytes length = 0;
  std::vector<SourceRange> sources;  // fill [offset, offset+length) in order

  Bytes end() const { return offset + length; }
  friend bool operator==(const WriteExtent&, const WriteExtent&) = default;
};

struct Transfer {
  NodeId from = 0;
  NodeId to = 0;
  Bytes bytes = 0;

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

/// Where the first byte of a rank's checkpoint lands.
struct RankPlacement {
  std::uint32_t file_index = 0;
  Bytes offset = 0;

  friend bool operator==(const RankPlacement&, const RankPlacement&) = default;
};

struct FlushPlan {
  std::string strategy_name;
  std::vector<Transfer> transfers;  // network gathers only
  std::vector<WriteExtent> extents;
  std::vector<std::vector<std::size_t>> phases;  // extent indices; empty = one unsynchronized phase
  std::vector<Bytes> file_sizes;
  std::vector<NodeId> leaders;
  std::vector<RankPlacement> placements;  // per rank

  std::uint32_t file_count() const { return static_cast<std::uint32_t>(file_sizes.size()); }
  Bytes extent_bytes() const;
  Bytes network_bytes() const;
};

struct CoverageReport {
  bool ok = true;
  std::string message;
  std::optional<std::size_t> extent;        // first violating extent
  std::optional<std::size_t> other_extent;  // overlap partner
  std::optional<RankId> rank;

  explicit operator bool() const { return ok; }
};

/// Checks extent non-overlap per file and exact once-coverage of every
/// checkpoint byte. A violation is reported, never thrown.
CoverageReport plan_coverage_check(const FlushPlan& plan, const CheckpointSet& ckpts);

/// a + b, throwing OverflowError on wrap.
Bytes checked_add(Bytes a, Bytes b);

}  // namespace ckagg
