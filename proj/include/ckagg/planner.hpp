#pragma once

// Pure planning algorithms: offset scan, stripe-conflict analysis, leader
// election, stripe-aligned leader ranges and the per-participant transfer
// schedule. Nothing here touches shared mutable state.

#include <cstdint>
#include <span>
#include <vector>

#include "ckagg/model.hpp"

namespace ckagg::planner {

struct PrefixSum {
  std::vector<Bytes> offsets;
  Bytes total = 0;
};

/// offsets[i] = sizes[0] + ... + sizes[i-1]. Throws OverflowError when the
/// total does not fit in 64 bits.
PrefixSum exclusive_prefix_sum(std::span<const Bytes> sizes);

/// A run of stripes in one file touched by the same set of >= 2 writers.
struct ConflictedRange {
  std::uint32_t file_index = 0;
  std::uint64_t first_stripe = 0;
  std::uint64_t end_stripe = 0;  // exclusive
  std::vector<NodeId> writers;   // ascending

  std::uint64_t stripe_count() const { return end_stripe - first_stripe; }
};

struct StripeConflicts {
  std::uint64_t conflicted_stripe_count = 0;
  std::vector<ConflictedRange> ranges;  // ordered by (file, stripe)

  /// Writers of a conflicted stripe; empty when it has fewer than two.
  std::vector<NodeId> writers_of(std::uint32_t file_index, std::uint64_t stripe) const;
};

/// A stripe is conflicted when two or more distinct writers touch it.
/// Zero-length extents are ignored.
StripeConflicts stripe_conflicts(std::span<const WriteExtent> extents, const StripeLayout& layout);

struct ElectionWeights {
  double size = 1.0;
  double load = 1.0;
  double topology = 1.0;
};

/// Half-open range of global stripe indices.
struct StripeRange {
  std::uint64_t first = 0;
  std::uint64_t end = 0;

  bool empty() const { return end <= first; }
  friend bool operator==(const StripeRange&, const StripeRange&) = default;
};

struct LeaderAssignment {
  std::vector<NodeId> leaders;           // ascending node index
  std::vector<StripeRange> stripe_sets;  // per leader
  std::vector<double> leader_scores;     // per node
  std::vector<Bytes> capacity;           // per leader, bytes
};

/// Per-node election score, see elect_leaders.
std::vector<double> election_scores(const ClusterSpec& cluster, std::span<const Bytes> node_bytes,
                                    const ElectionWeights& weights);

/// score = w_size * bytes/max_bytes + w_load * (1 - load) + w_topo * centrality,
/// centrality = 1 - mean|coord distance| / max over nodes of that mean.
/// The `count` best nodes win; ties go to the lower node index.
LeaderAssignment elect_leaders(const ClusterSpec& cluster, std::span<const Bytes> node_bytes,
                               std::uint32_t count, const ElectionWeights& weights);

/// Splits the T = ceil(total / stripe) global stripes into contiguous runs of
/// ceil(T / leaders) stripes, in leader order.
LeaderAssignment assign_stripe_sets(std::span<const NodeId> leaders, Bytes total_bytes,
                                    const StripeLayout& layout);

/// The global byte space of an aggregated checkpoint, cut into
/// layout.destination_file_count files at stripe boundaries.
class GlobalSpace {
 public:
  GlobalSpace(Bytes total_bytes, const StripeLayout& layout);

  struct Location {
    std::uint32_t file_index;
    Bytes offset;
  };

  /// File and in-file offset of a global byte; the end of the space maps to
  /// the end of the last file.
  Location locate(Bytes global_offset) const;
  /// Global offset where the file containing `global_offset` ends.
  Bytes file_end(Bytes global_offset) const;
  std::vector<Bytes> file_sizes() const;
  Bytes total() const { return total_; }

 private:
  Bytes total_;
  Bytes file_span_;  // bytes per file except possibly the last
  std::uint32_t files_;
};

struct LeaderDirectory {
  std::vector<NodeId> leaders;
  std::vector<StripeRange> stripe_sets;
  Bytes stripe_size = 0;
  Bytes total_bytes = 0;
  std::uint32_t file_count = 1;

  friend bool operator==(const LeaderDirectory&, const LeaderDirectory&) = default;
};

/// What one participant learns from the scan.
struct ScanView {
  Bytes offset = 0;
  LeaderDirectory directory;
};

/// One pass that carries the running offset together with the leader
/// directory, so every participant ends up with both. Offsets are those of
/// exclusive_prefix_sum.
std::vector<ScanView> piggyback_scan(std::span<const Bytes> sizes, const LeaderDirectory& directory);

struct TransferMove {
  NodeId source_node = 0;
  NodeId leader_node = 0;
  RankId rank = 0;
  Bytes source_offset = 0;
  Bytes length = 0;
  std::uint32_t dest_file = 0;
  Bytes dest_offset = 0;

  friend bool operator==(const TransferMove&, const TransferMove&) = default;
};

struct TransferSchedule {
  std::vector<TransferMove> moves;                    // global byte order
  std::vector<std::vector<std::size_t>> arrival_order;  // per leader, move indices
};

/// The moves one participant derives on its own from its scan view: its byte
/// range cut at leader range and file boundaries.
std::vector<TransferMove> moves_for_participant(RankId rank, NodeId node, Bytes size, const ScanView& view);

struct ScheduleResult {
  TransferSchedule schedule;
  FlushPlan plan;
};

/// Lays ranks out in canonical order, cuts each rank at leader boundaries and
/// returns the moves together with a one-writer-per-stripe FlushPlan.
/// Throws InvalidArgument when the assignment capacity differs from the
/// checkpoint total.
ScheduleResult build_transfer_schedule(const CheckpointSet& ckpts, const ClusterSpec& cluster,
                                       const LeaderAssignment& assignment, const StripeLayout& layout);

/// Extents from moves in the given order, merging byte-contiguous moves of
/// the same leader and file.
std::vector<WriteExtent> extents_from_moves(std::span<const TransferMove> moves);

/// Network gathers (source != leader) summed per (from, to) pair.
std::vector<Transfer> transfers_from_moves(std::span<const TransferMove> moves);

}  // namespace ckagg::planner
