#include "ckagg/planner.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "ckagg/kernels.hpp"

namespace ckagg::planner {

PrefixSum exclusive_prefix_sum(std::span<const Bytes> sizes) {
  // With non-negative inputs the scan wraps iff the total does, so a checked
  // reduction up front lets the vector kernel run unchecked.
  Bytes total = 0;
  for (Bytes s : sizes) total = checked_add(total, s);

  PrefixSum out;
  out.offsets.resize(sizes.size());
  out.total = kernels::active().exclusive_scan(sizes.data(), out.offsets.data(), sizes.size());
  return out;
}

std::vector<NodeId> StripeConflicts::writers_of(std::uint32_t file_index, std::uint64_t stripe) const {
  for (const auto& r : ranges) {
    if (r.file_index == file_index && stripe >= r.first_stripe && stripe < r.end_stripe) return r.writers;
  }
  return {};
}

StripeConflicts stripe_conflicts(std::span<const WriteExtent> extents, const StripeLayout& layout) {
  layout.validate();
  // file -> writer -> stripe intervals
  std::map<std::uint32_t, std::map<NodeId, std::vector<StripeRange>>> touched;
  for (const auto& e : extents) {
    if (e.length == 0) continue;
    const std::uint64_t first = layout.stripe_of(e.offset);
    const std::uint64_t last = layout.stripe_of(e.offset + (e.length - 1));
    touched[e.file_index][e.writer].push_back({first, last + 1});
  }

  StripeConflicts out;
  for (auto& [file, by_writer] : touched) {
    struct Event {
      std::uint64_t at;
      int delta;
      NodeId writer;
    };
    std::vector<Event> events;
    for (auto& [writer, ranges] : by_writer) {
      std::sort(ranges.begin(), ranges.end(),
                [](const StripeRange& a, const StripeRange& b) { return a.first < b.first; });
      StripeRange cur = ranges.front();
      for (std::size_t i = 1; i < ranges.size(); ++i) {
        if (ranges[i].first <= cur.end) {
          cur.end = std::max(cur.end, ranges[i].end);
        } else {
          events.push_back({cur.first, +1, writer});
          events.push_back({cur.end, -1, writer});
          cur = ranges[i];
        }
      }
      events.push_back({cur.first, +1, writer});
      events.push_back({cur.end, -1, writer});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      if (a.at != b.at) return a.at < b.at;
      return a.writer < b.writer;
    });

    std::set<NodeId> active;
    std::size_t i = 0;
    while (i < events.size()) {
      const std::uint64_t at = events[i].at;
      for (; i < events.size() && events[i].at == at; ++i) {
        if (events[i].delta > 0) {
          active.insert(events[i].writer);
        } else {
          active.erase(events[i].writer);
        }
      }
      if (i == events.size() || active.size() < 2) continue;
      const std::uint64_t next = events[i].at;
      std::vector<NodeId> writers(active.begin(), active.end());
      if (!out.ranges.empty() && out.ranges.back().file_index == file && out.ranges.back().end_stripe == at &&
          out.ranges.back().writers == writers) {
        out.ranges.back().end_stripe = next;
      } else {
        out.ranges.push_back({file, at, next, std::move(writers)});
      }
      out.conflicted_stripe_count += next - at;
    }
  }
  return out;
}

std::vector<double> election_scores(const ClusterSpec& cluster, std::span<const Bytes> node_bytes,
                                    const ElectionWeights& weights) {
  cluster.validate();
  if (node_bytes.size() != cluster.node_count) {
    throw InvalidArgument("elect_leaders: node_bytes must have node_count entries");
  }
  if (!(weights.size >= 0) || !(weights.load >= 0) || !(weights.topology >= 0)) {
    throw InvalidArgument("elect_leaders: weights must be non-negative");
  }
  const std::size_t n = cluster.node_count;
  const Bytes max_bytes = *std::max_element(node_bytes.begin(), node_bytes.end());

  std::vector<double> mean_distance(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto a = cluster.topology_coord[i];
      const auto b = cluster.topology_coord[j];
      sum += static_cast<double>(a > b ? a - b : b - a);
    }
    mean_distance[i] = sum / static_cast<double>(n);
  }
  const double max_mean = *std::max_element(mean_distance.begin(), mean_distance.end());

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double size_term =
        max_bytes == 0 ? 0.0 : static_cast<double>(node_bytes[i]) / static_cast<double>(max_bytes);
    const double load_term = 1.0 - cluster.node_load[i];
    const double centrality = max_mean > 0.0 ? 1.0 - mean_distance[i] / max_mean : 1.0;
    scores[i] = weights.size * size_term + weights.load * load_term + weights.topology * centrality;
  }
  return scores;
}

LeaderAssignment elect_leaders(const ClusterSpec& cluster, std::span<const Bytes> node_bytes,
                               std::uint32_t count, const ElectionWeights& weights) {
  if (count < 1 || count > cluster.node_count) {
    throw InvalidArgument("elect_leaders: leader count " + std::to_string(count) + " outside [1, " +
                          std::to_string(cluster.node_count) + "]");
  }
  LeaderAssignment out;
  out.leader_scores = election_scores(cluster, node_bytes, weights);

  std::vector<NodeId> order(cluster.node_count);
  std::iota(order.begin(), order.end(), NodeId{0});
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    return out.leader_scores[a] > out.leader_scores[b];
  });
  out.leaders.assign(order.begin(), order.begin() + count);
  std::sort(out.leaders.begin(), out.leaders.end());
  return out;
}

LeaderAssignment assign_stripe_sets(std::span<const NodeId> leaders, Bytes total_bytes,
                                    const StripeLayout& layout) {
  layout.validate();
  if (leaders.empty()) throw InvalidArgument("assign_stripe_sets: no leaders");
  const std::uint64_t stripes = total_bytes / layout.stripe_size + (total_bytes % layout.stripe_size != 0);
  const std::uint64_t m = leaders.size();
  const std::uint64_t per = stripes / m + (stripes % m != 0);

  LeaderAssignment out;
  out.leaders.assign(leaders.begin(), leaders.end());
  for (std::uint64_t k = 0; k < m; ++k) {
    const std::uint64_t first = std::min(k * per, stripes);
    const std::uint64_t end = std::min((k + 1) * per, stripes);
    out.stripe_sets.push_back({first, end});
    const Bytes begin_byte = first * layout.stripe_size;
    const Bytes end_byte = std::min<Bytes>(end * layout.stripe_size, total_bytes);
    out.capacity.push_back(end_byte > begin_byte ? end_byte - begin_byte : 0);
  }
  return out;
}

GlobalSpace::GlobalSpace(Bytes total_bytes, const StripeLayout& layout)
    : total_(total_bytes), files_(layout.destination_file_count) {
  layout.validate();
  const std::uint64_t stripes = total_bytes / layout.stripe_size + (total_bytes % layout.stripe_size != 0);
  const std::uint64_t per_file = stripes / files_ + (stripes % files_ != 0);
  file_span_ = std::max<Bytes>(per_file, 1) * layout.stripe_size;
}

GlobalSpace::Location GlobalSpace::locate(Bytes global_offset) const {
  if (total_ == 0) return {0, 0};
  if (global_offset >= total_) {
    const auto f = static_cast<std::uint32_t>((total_ - 1) / file_span_);
    return {f, total_ - f * file_span_};
  }
  const auto f = static_cast<std::uint32_t>(global_offset / file_span_);
  return {f, global_offset - f * file_span_};
}

Bytes GlobalSpace::file_end(Bytes global_offset) const {
  const auto loc = locate(global_offset);
  return std::min<Bytes>((static_cast<Bytes>(loc.file_index) + 1) * file_span_, total_);
}

std::vector<Bytes> GlobalSpace::file_sizes() const {
  std::vector<Bytes> out(files_, 0);
  for (std::uint32_t f = 0; f < files_; ++f) {
    const Bytes begin = static_cast<Bytes>(f) * file_span_;
    if (begin < total_) out[f] = std::min(file_span_, total_ - begin);
  }
  return out;
}

std::vector<ScanView> piggyback_scan(std::span<const Bytes> sizes, const LeaderDirectory& directory) {
  Bytes total = 0;
  for (Bytes s : sizes) total = checked_add(total, s);
  (void)total;

  // The carry is (running offset, directory); each participant receives the
  // carry as it arrives and forwards it with its own size added.
  struct Carry {
    Bytes offset;
    const LeaderDirectory* directory;
  };
  std::vector<ScanView> views;
  views.reserve(sizes.size());
  Carry carry{0, &directory};
  for (Bytes s : sizes) {
    views.push_back({carry.offset, *carry.directory});
    carry.offset += s;
  }
  return views;
}

std::vector<TransferMove> moves_for_participant(RankId rank, NodeId node, Bytes size, const ScanView& view) {
  std::vector<TransferMove> out;
  if (size == 0) return out;
  const auto& dir = view.directory;
  StripeLayout layout;
  layout.stripe_size = dir.stripe_size;
  layout.destination_file_count = dir.file_count;
  const GlobalSpace space(dir.total_bytes, layout);

  const Bytes begin = view.offset;
  const Bytes end = checked_add(begin, size);
  if (end > dir.total_bytes) throw InvalidArgument("participant range exceeds the directory total");

  for (std::size_t k = 0; k < dir.leaders.size(); ++k) {
    const auto& set = dir.stripe_sets[k];
    if (set.empty()) continue;
    const Bytes lo = std::max(begin, set.first * dir.stripe_size);
    const Bytes hi = std::min({end, set.end * dir.stripe_size, dir.total_bytes});
    Bytes at = lo;
    while (at < hi) {
      const auto loc = space.locate(at);
      const Bytes piece_end = std::min(hi, space.file_end(at));
      out.push_back({node, dir.leaders[k], rank, at - begin, piece_end - at, loc.file_index, loc.offset});
      at = piece_end;
    }
  }
  return out;
}

std::vector<WriteExtent> extents_from_moves(std::span<const TransferMove> moves) {
  std::vector<WriteExtent> out;
  for (const auto& m : moves) {
    if (m.length == 0) continue;
    if (!out.empty()) {
      auto& last = out.back();
      if (last.writer == m.leader_node && last.file_index == m.dest_file && last.end() == m.dest_offset) {
        last.length += m.length;
        last.sources.push_back({m.rank, m.source_offset, m.length});
        continue;
      }
    }
    out.push_back({m.leader_node, m.dest_file, m.dest_offset, m.length, {{m.rank, m.source_offset, m.length}}});
  }
  return out;
}

std::vector<Transfer> transfers_from_moves(std::span<const TransferMove> moves) {
  std::map<std::pair<NodeId, NodeId>, Bytes> sums;
  for (const auto& m : moves) {
    if (m.source_node == m.leader_node || m.length == 0) continue;
    auto& slot = sums[{m.source_node, m.leader_node}];
    slot = checked_add(slot, m.length);
  }
  std::vector<Transfer> out;
  for (const auto& [key, bytes] : sums) out.push_back({key.first, key.second, bytes});
  return out;
}

ScheduleResult build_transfer_schedule(const CheckpointSet& ckpts, const ClusterSpec& cluster,
                                       const LeaderAssignment& assignment, const StripeLayout& layout) {
  cluster.validate();
  ckpts.validate(cluster);
  layout.validate();
  if (assignment.leaders.empty() || assignment.stripe_sets.size() != assignment.leaders.size()) {
    throw InvalidArgument("build_transfer_schedule: malformed leader assignment");
  }
  const Bytes total = ckpts.total_bytes();
  Bytes capacity = 0;
  for (Bytes c : assignment.capacity) capacity = checked_add(capacity, c);
  if (capacity != total) {
    throw InvalidArgument("build_transfer_schedule: leader capacity " + std::to_string(capacity) +
                          " does not match checkpoint total " + std::to_string(total));
  }

  LeaderDirectory directory{assignment.leaders, assignment.stripe_sets, layout.stripe_size, total,
                            layout.destination_file_count};
  const auto views = piggyback_scan(ckpts.sizes, directory);

  ScheduleResult out;
  auto& moves = out.schedule.moves;
  for (RankId r = 0; r < ckpts.rank_count(); ++r) {
    auto mine = moves_for_participant(r, cluster.node_of(r), ckpts.sizes[r], views[r]);
    moves.insert(moves.end(), mine.begin(), mine.end());
  }

  out.schedule.arrival_order.resize(assignment.leaders.size());
  for (std::size_t i = 0; i < moves.size(); ++i) {
    const auto it = std::find(assignment.leaders.begin(), assignment.leaders.end(), moves[i].leader_node);
    out.schedule.arrival_order[static_cast<std::size_t>(it - assignment.leaders.begin())].push_back(i);
  }

  const GlobalSpace space(total, layout);
  auto& plan = out.plan;
  plan.extents = extents_from_moves(moves);
  plan.transfers = transfers_from_moves(moves);
  plan.file_sizes = space.file_sizes();
  plan.leaders = assignment.leaders;
  plan.placements.reserve(views.size());
  for (const auto& v : views) {
    const auto loc = space.locate(v.offset);
    plan.placements.push_back({loc.file_index, loc.offset});
  }
  return out;
}

}  // namespace ckagg::planner
