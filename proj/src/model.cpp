#include "ckagg/model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace ckagg {

Bytes checked_add(Bytes a, Bytes b) {
  Bytes out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw OverflowError("byte counter overflow: configuration too large");
  }
  return out;
}

ClusterSpec ClusterSpec::uniform(std::uint32_t nodes, std::uint32_t ranks_per_node) {
  ClusterSpec c;
  c.node_count = nodes;
  c.ranks_per_node = ranks_per_node;
  c.node_load.assign(nodes, 0.0);
  c.topology_coord.resize(nodes);
  std::iota(c.topology_coord.begin(), c.topology_coord.end(), std::uint64_t{0});
  return c;
}

void ClusterSpec::validate() const {
  if (node_count < 1) throw InvalidArgument("cluster: node_count must be >= 1");
  if (ranks_per_node < 1) throw InvalidArgument("cluster: ranks_per_node must be >= 1");
  if (!(local_write_bandwidth > 0) || !(network_bandwidth > 0)) {
    throw InvalidArgument("cluster: bandwidths must be > 0");
  }
  if (node_load.size() != node_count) {
    throw InvalidArgument("cluster: node_load must have node_count entries");
  }
  for (double l : node_load) {
    if (!(l >= 0.0 && l <= 1.0)) throw InvalidArgument("cluster: node_load entries must lie in [0,1]");
  }
  if (topology_coord.size() != node_count) {
    throw InvalidArgument("cluster: topology_coord must have node_count entries");
  }
  if (static_cast<std::uint64_t>(node_count) * ranks_per_node > UINT32_MAX) {
    throw InvalidArgument("cluster: rank count exceeds 32 bits");
  }
}

CheckpointSet CheckpointSet::uniform(const ClusterSpec& cluster, Bytes size, std::uint64_t seed) {
  CheckpointSet s;
  s.sizes.assign(cluster.rank_count(), size);
  s.content_seed = seed;
  return s;
}

Bytes CheckpointSet::total_bytes() const {
  Bytes total = 0;
  for (Bytes s : sizes) total = checked_add(total, s);
  return total;
}

std::vector<Bytes> CheckpointSet::node_bytes(const ClusterSpec& cluster) const {
  std::vector<Bytes> out(cluster.node_count, 0);
  for (RankId r = 0; r < sizes.size(); ++r) {
    auto& slot = out.at(cluster.node_of(r));
    slot = checked_add(slot, sizes[r]);
  }
  return out;
}

void CheckpointSet::validate(const ClusterSpec& cluster) const {
  if (sizes.size() != cluster.rank_count()) {
    std::ostringstream msg;
    msg << "checkpoints: expected " << cluster.rank_count() << " sizes, got " << sizes.size();
    throw InvalidArgument(msg.str());
  }
  (void)total_bytes();
}

void StripeLayout::validate() const {
  if (stripe_size == 0) throw InvalidArgument("layout: stripe_size must be > 0");
  if (io_server_count < 1) throw InvalidArgument("layout: io_server_count must be >= 1");
  if (destination_file_count < 1) throw InvalidArgument("layout: destination_file_count must be >= 1");
}

Bytes FlushPlan::extent_bytes() const {
  Bytes total = 0;
  for (const auto& e : extents) total = checked_add(total, e.length);
  return total;
}

Bytes FlushPlan::network_bytes() const {
  Bytes total = 0;
  for (const auto& t : transfers) {
    if (t.from != t.to) total = checked_add(total, t.bytes);
  }
  return total;
}

namespace {

CoverageReport violation(std::string message) {
  CoverageReport r;
  r.ok = false;
  r.message = std::move(message);
  return r;
}

struct Piece {
  Bytes begin;
  Bytes end;
  std::size_t extent;
};

}  // namespace

CoverageReport plan_coverage_check(const FlushPlan& plan, const CheckpointSet& ckpts) {
  std::vector<std::vector<Piece>> per_rank(ckpts.sizes.size());

  for (std::size_t i = 0; i < plan.extents.size(); ++i) {
    const auto& e = plan.extents[i];
    Bytes covered = 0;
    for (const auto& src : e.sources) {
      if (src.rank >= ckpts.sizes.size()) {
        auto r = violation("extent " + std::to_string(i) + " references unknown rank " +
                           std::to_string(src.rank));
        r.extent = i;
        r.rank = src.rank;
        return r;
      }
      Bytes src_end = 0;
      if (__builtin_add_overflow(src.offset, src.length, &src_end) ||
          src_end > ckpts.sizes[src.rank]) {
        auto r = violation("extent " + std::to_string(i) + " reads past the end of rank " +
                           std::to_string(src.rank));
        r.extent = i;
        r.rank = src.rank;
        return r;
      }
      if (__builtin_add_overflow(covered, src.length, &covered)) {
        auto r = violation("extent " + std::to_string(i) + " source lengths overflow");
        r.extent = i;
        return r;
      }
      if (src.length > 0) per_rank[src.rank].push_back({src.offset, src_end, i});
    }
    if (covered != e.length) {
      auto r = violation("extent " + std::to_string(i) + " has length " + std::to_string(e.length) +
                         " but its sources sum to " + std::to_string(covered));
      r.extent = i;
      return r;
    }
    if (!plan.file_sizes.empty()) {
      Bytes end = 0;
      if (e.file_index >= plan.file_sizes.size() ||
          __builtin_add_overflow(e.offset, e.length, &end) ||
          (e.length > 0 && end > plan.file_sizes[e.file_index])) {
        auto r = violation("extent " + std::to_string(i) + " lies outside its destination file");
        r.extent = i;
        return r;
      }
    }
  }

  // Pairwise non-overlap within each file: sort and compare neighbours.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < plan.extents.size(); ++i) {
    if (plan.extents[i].length > 0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = plan.extents[a];
    const auto& y = plan.extents[b];
    if (x.file_index != y.file_index) return x.file_index < y.file_index;
    if (x.offset != y.offset) return x.offset < y.offset;
    return a < b;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const auto& prev = plan.extents[order[k - 1]];
    const auto& cur = plan.extents[order[k]];
    if (prev.file_index == cur.file_index && cur.offset < prev.end()) {
      std::ostringstream msg;
      msg << "extents " << std::min(order[k - 1], order[k]) << " and " << std::max(order[k - 1], order[k])
          << " overlap at offset " << cur.offset << " in file " << cur.file_index;
      auto r = violation(msg.str());
      r.extent = std::min(order[k - 1], order[k]);
      r.other_extent = std::max(order[k - 1], order[k]);
      return r;
    }
  }

  for (RankId rank = 0; rank < per_rank.size(); ++rank) {
    auto& pieces = per_rank[rank];
    std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) {
      return a.begin != b.begin ? a.begin < b.begin : a.extent < b.extent;
    });
    Bytes cursor = 0;
    for (const auto& p : pieces) {
      if (p.begin > cursor) {
        std::ostringstream msg;
        msg << "rank " << rank << " bytes [" << cursor << ", " << p.begin << ") are not covered";
        auto r = violation(msg.str());
        r.rank = rank;
        return r;
      }
      if (p.begin < cursor) {
        std::ostringstream msg;
        msg << "rank " << rank << " bytes from " << p.begin << " are covered twice (extent " << p.extent << ")";
        auto r = violation(msg.str());
        r.rank = rank;
        r.extent = p.extent;
        return r;
      }
      cursor = p.end;
    }
    if (cursor != ckpts.sizes[rank]) {
      std::ostringstream msg;
      msg << "rank " << rank << " bytes [" << cursor << ", " << ckpts.sizes[rank] << ") are not covered";
      auto r = violation(msg.str());
      r.rank = rank;
      return r;
    }
  }
  return {};
}

}  // namespace ckagg
