#pragma once

// Deterministic fluid-flow simulation of a flush onto a striped parallel
// file system.
//
// Cost model:
//  * Local phase: every node writes its ranks at local_write_bandwidth; the
//    phase lasts as long as the slowest node.
//  * Each extent is cut into per-stripe requests. A request occupies one of
//    the writer's io_threads from the moment it is picked until it finishes.
//  * Requests on one stripe from different writers serialize through a FIFO
//    lock; a request that takes the lock over from another writer costs
//    stripe_penalty times its normal service demand.
//  * Servers are processor-sharing channels of per_server_bandwidth. A
//    request of b bytes demands b / min(1, b / stripe_size) bytes of service,
//    so any sub-stripe request costs a full stripe.
//  * Gathers (source node != writer) are flows over the sender's egress and
//    the receiver's ingress, each offering
//    network_bandwidth * (1 - app_network_demand), fairly shared.
//  * Without phases a request may start once its own gathered bytes arrived.
//    With phases, phase k+1 starts when phase k is complete everywhere, and
//    no write of a phase starts before all gathers of that phase are done.

#include <cstdint>
#include <span>
#include <vector>

#include "ckagg/model.hpp"
#include "ckagg/strategies.hpp"

namespace ckagg::sim {

struct PfsModel {
  double per_server_bandwidth = 500.0e6;  // bytes/s
  double stripe_penalty = 1.5;

  /// min(1, req_bytes / stripe_size)
  static double request_efficiency(Bytes req_bytes, Bytes stripe_size);
  void validate() const;
};

struct InterferenceModel {
  double app_network_demand = 0.5;  // fraction of a node link the application keeps busy
  std::uint32_t spare_cores = 4;    // cores per node the application leaves idle

  void validate() const;
};

struct TimelineEvent {
  enum class Kind { gather, write, barrier_wait };

  NodeId node = 0;
  Kind kind = Kind::write;
  double start = 0.0;
  double end = 0.0;
  std::uint32_t file_index = 0;
  std::uint64_t stripe = 0;
  Bytes bytes = 0;
  bool penalized = false;
};

struct SimReport {
  double local_phase_seconds = 0.0;
  double flush_seconds = 0.0;
  double local_throughput = 0.0;  // bytes/s
  double flush_throughput = 0.0;  // bytes/s
  std::uint64_t conflicted_stripe_count = 0;
  Bytes total_bytes = 0;
  Bytes total_network_bytes = 0;
  double phase_barrier_wait_seconds = 0.0;
  double app_slowdown_estimate = 0.0;
  std::uint64_t penalized_requests = 0;
  std::vector<Bytes> server_bytes;
  std::vector<TimelineEvent> timeline;  // per writer, in completion order
};

/// Throws InvalidArgument when the plan does not cover ckpts exactly.
SimReport simulate(const FlushPlan& plan, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                   const StripeLayout& layout, const PfsModel& pfs, const InterferenceModel& interference,
                   std::uint32_t io_threads);

struct Scenario {
  StrategyConfig strategy;
  ClusterSpec cluster;
  CheckpointSet ckpts;
  StripeLayout layout;
  PfsModel pfs;
  InterferenceModel interference;
};

struct SweepResult {
  Scenario scenario;
  SimReport report;
};

/// Plans and simulates every grid point; results keep grid order. Points
/// are independent and may run on up to `threads` threads.
std::vector<SweepResult> sweep(std::span<const Scenario> grid, std::uint32_t threads = 1);

}  // namespace ckagg::sim
