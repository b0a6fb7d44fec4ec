#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "ckagg/planner.hpp"
#include "ckagg/strategies.hpp"
#include "test_support.hpp"

using namespace ckagg;
using namespace ckagg::planner;
using ckagg::testing::MiB;

namespace {

WriteExtent extent(NodeId writer, Bytes offset, Bytes length, std::uint32_t file = 0) {
  return WriteExtent{writer, file, offset, length, {{writer, 0, length}}};
}

// Bytes each leader's stripe range holds of [begin, end), independently of
// the schedule.
Bytes overlap(Bytes a0, Bytes a1, Bytes b0, Bytes b1) {
  const Bytes lo = std::max(a0, b0), hi = std::min(a1, b1);
  return hi > lo ? hi - lo : 0;
}

}  // namespace

TEST(PrefixSum, Examples) {
  EXPECT_TRUE(exclusive_prefix_sum({}).offsets.empty());
  EXPECT_EQ(exclusive_prefix_sum({}).total, 0u);
  const std::vector<Bytes> four{4, 4, 4};
  const auto r = exclusive_prefix_sum(four);
  EXPECT_EQ(r.offsets, (std::vector<Bytes>{0, 4, 8}));
  EXPECT_EQ(r.total, 12u);
  const Bytes gib = Bytes{1} << 30;
  const std::vector<Bytes> big{gib, gib, gib};
  const auto g = exclusive_prefix_sum(big);
  EXPECT_EQ(g.offsets, (std::vector<Bytes>{0, gib, 2 * gib}));
  EXPECT_EQ(g.total, 3 * gib);
}

TEST(PrefixSum, OverflowIsAnError) {
  const std::vector<Bytes> sizes{UINT64_MAX - 5, 3, 3};
  EXPECT_THROW(exclusive_prefix_sum(sizes), OverflowError);
  const std::vector<Bytes> edge{UINT64_MAX - 5, 5};
  EXPECT_EQ(exclusive_prefix_sum(edge).total, UINT64_MAX);
}

TEST(PrefixSum, MatchesFoldOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Bytes> sizes(rng() % 3000);
    for (auto& s : sizes) s = rng() >> 20;
    const auto r = exclusive_prefix_sum(sizes);
    ASSERT_EQ(r.offsets, ckagg::testing::fold_prefix(sizes));
    ASSERT_EQ(r.total, std::accumulate(sizes.begin(), sizes.end(), Bytes{0}));
  }
}

TEST(StripeConflicts, Examples) {
  const StripeLayout layout{4 * MiB, 4, 1};
  const std::vector<WriteExtent> aligned{extent(0, 0, 4 * MiB), extent(1, 4 * MiB, 4 * MiB)};
  EXPECT_EQ(stripe_conflicts(aligned, layout).conflicted_stripe_count, 0u);

  const std::vector<WriteExtent> shifted{extent(0, 0, 3 * MiB), extent(1, 3 * MiB, 3 * MiB)};
  const auto c = stripe_conflicts(shifted, layout);
  EXPECT_EQ(c.conflicted_stripe_count, 1u);
  EXPECT_EQ(c.writers_of(0, 0), (std::vector<NodeId>{0, 1}));
  EXPECT_TRUE(c.writers_of(0, 1).empty());

  std::vector<WriteExtent> crowd;
  for (NodeId n = 0; n < 5; ++n) crowd.push_back(extent(n, n * 100, 100));
  const auto k = stripe_conflicts(crowd, layout);
  EXPECT_EQ(k.conflicted_stripe_count, 1u);
  EXPECT_EQ(k.writers_of(0, 0).size(), 5u);
}

TEST(StripeConflicts, SeparateFilesDoNotConflict) {
  const StripeLayout layout{MiB, 2, 2};
  const std::vector<WriteExtent> e{extent(0, 0, 10, 0), extent(1, 0, 10, 1)};
  EXPECT_EQ(stripe_conflicts(e, layout).conflicted_stripe_count, 0u);
}

TEST(StripeConflicts, MatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Bytes stripe = 1 + rng() % 64;
    std::vector<WriteExtent> extents;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      extents.push_back(extent(static_cast<NodeId>(rng() % 4), rng() % 1000, rng() % 300,
                               static_cast<std::uint32_t>(rng() % 2)));
    }
    const auto c = stripe_conflicts(extents, StripeLayout{stripe, 3, 2});
    ASSERT_EQ(c.conflicted_stripe_count, ckagg::testing::brute_force_conflicts(extents, stripe)) << trial;
    std::uint64_t sum = 0;
    for (const auto& r : c.ranges) {
      EXPECT_GE(r.writers.size(), 2u);
      sum += r.stripe_count();
    }
    EXPECT_EQ(sum, c.conflicted_stripe_count);
  }
}

TEST(Election, SizeOnlyPicksLargest) {
  const auto cluster = ClusterSpec::uniform(4, 1);
  const std::vector<Bytes> bytes{8 * MiB, 2 * MiB, 2 * MiB, 2 * MiB};
  const auto a = elect_leaders(cluster, bytes, 1, {1, 0, 0});
  EXPECT_EQ(a.leaders, (std::vector<NodeId>{0}));
  EXPECT_TRUE(a.stripe_sets.empty());
}

TEST(Election, LoadOnlyPicksIdlest) {
  auto cluster = ClusterSpec::uniform(4, 1);
  cluster.node_load = {0.9, 0.1, 0.5, 0.5};
  const std::vector<Bytes> bytes(4, MiB);
  EXPECT_EQ(elect_leaders(cluster, bytes, 1, {0, 1, 0}).leaders, (std::vector<NodeId>{1}));
}

TEST(Election, TopologyOnlyPicksCentre) {
  const auto cluster = ClusterSpec::uniform(5, 1);
  const std::vector<Bytes> bytes(5, MiB);
  EXPECT_EQ(elect_leaders(cluster, bytes, 1, {0, 0, 1}).leaders, (std::vector<NodeId>{2}));
}

TEST(Election, AllNodesWhenCountEqualsNodes) {
  auto cluster = ClusterSpec::uniform(3, 1);
  cluster.node_load = {1.0, 0.0, 0.3};
  const std::vector<Bytes> bytes{1, 100, 7};
  EXPECT_EQ(elect_leaders(cluster, bytes, 3, {3, 1, 2}).leaders, (std::vector<NodeId>{0, 1, 2}));
  EXPECT_THROW(elect_leaders(cluster, bytes, 0, {}), InvalidArgument);
  EXPECT_THROW(elect_leaders(cluster, bytes, 4, {}), InvalidArgument);
}

TEST(Election, MatchesBruteForceArgmaxAndIsScaleInvariant) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::uint32_t>(1 + rng() % 8);
    auto cluster = ClusterSpec::uniform(n, 1);
    for (auto& l : cluster.node_load) l = u(rng);
    std::vector<Bytes> bytes(n);
    for (auto& b : bytes) b = rng() % (64 * MiB);
    const ElectionWeights w{u(rng), u(rng), 0};
    const Bytes max_b = *std::max_element(bytes.begin(), bytes.end());
    std::size_t best = 0;
    double best_score = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = w.size * (max_b ? double(bytes[i]) / double(max_b) : 0.0) + w.load * (1 - cluster.node_load[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    const auto a = elect_leaders(cluster, bytes, 1, w);
    ASSERT_EQ(a.leaders, (std::vector<NodeId>{static_cast<NodeId>(best)})) << trial;

    const auto m = static_cast<std::uint32_t>(1 + rng() % n);
    std::vector<Bytes> scaled(bytes);
    for (auto& b : scaled) b *= 1000;
    const ElectionWeights w3{w.size, w.load, u(rng)};
    EXPECT_EQ(elect_leaders(cluster, bytes, m, w3).leaders, elect_leaders(cluster, scaled, m, w3).leaders);
  }
}

TEST(StripeSets, Examples) {
  const StripeLayout layout{4 * MiB, 2, 1};
  const std::vector<NodeId> two{0, 1};
  auto a = assign_stripe_sets(two, 8 * MiB, layout);
  EXPECT_EQ(a.stripe_sets, (std::vector<StripeRange>{{0, 1}, {1, 2}}));
  a = assign_stripe_sets(two, 9 * MiB, layout);
  EXPECT_EQ(a.stripe_sets, (std::vector<StripeRange>{{0, 2}, {2, 3}}));
  EXPECT_EQ(a.capacity, (std::vector<Bytes>{8 * MiB, 1 * MiB}));
  a = assign_stripe_sets(two, 0, layout);
  for (const auto& s : a.stripe_sets) EXPECT_TRUE(s.empty());
}

TEST(StripeSets, DisjointAndCovering) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = static_cast<std::uint32_t>(1 + rng() % 9);
    std::vector<NodeId> leaders(m);
    std::iota(leaders.begin(), leaders.end(), 0u);
    const StripeLayout layout{1 + rng() % 100, 2, 1};
    const Bytes total = rng() % 5000;
    const auto a = assign_stripe_sets(leaders, total, layout);
    std::uint64_t next = 0;
    Bytes cap = 0;
    for (const auto& s : a.stripe_sets) {
      if (s.empty()) continue;
      ASSERT_EQ(s.first, next);
      next = s.end;
    }
    for (Bytes c : a.capacity) cap += c;
    EXPECT_EQ(next, (total + layout.stripe_size - 1) / layout.stripe_size);
    EXPECT_EQ(cap, total);
  }
}

TEST(Schedule, SplitsRankAtLeaderBoundary) {
  const auto cluster = ClusterSpec::uniform(2, 1);
  const CheckpointSet ckpts{{6 * MiB, 6 * MiB}, 1};
  const StripeLayout layout{4 * MiB, 2, 1};
  const std::vector<NodeId> leaders{0, 1};
  const auto assignment = assign_stripe_sets(leaders, ckpts.total_bytes(), layout);
  const auto r = build_transfer_schedule(ckpts, cluster, assignment, layout);
  std::vector<TransferMove> rank1;
  for (const auto& m : r.schedule.moves) {
    if (m.rank == 1) rank1.push_back(m);
  }
  ASSERT_EQ(rank1.size(), 2u);
  EXPECT_EQ(rank1[0], (TransferMove{1, 0, 1, 0, 2 * MiB, 0, 6 * MiB}));
  EXPECT_EQ(rank1[1], (TransferMove{1, 1, 1, 2 * MiB, 4 * MiB, 0, 8 * MiB}));
  EXPECT_EQ(r.plan.network_bytes(), 2 * MiB);
  EXPECT_TRUE(plan_coverage_check(r.plan, ckpts).ok);
}

TEST(Schedule, SingleNodeHasNoNetwork) {
  const auto cluster = ClusterSpec::uniform(1, 3);
  const CheckpointSet ckpts{{5, 0, 9}, 1};
  const StripeLayout layout{4, 1, 1};
  const std::vector<NodeId> leaders{0};
  const auto r = build_transfer_schedule(ckpts, cluster, assign_stripe_sets(leaders, 14, layout), layout);
  EXPECT_TRUE(r.plan.transfers.empty());
  for (const auto& e : r.plan.extents) EXPECT_EQ(e.writer, 0u);
}

TEST(Schedule, CapacityMismatchIsAnError) {
  const auto cluster = ClusterSpec::uniform(1, 1);
  const CheckpointSet ckpts{{10}, 1};
  const StripeLayout layout{4, 1, 1};
  const std::vector<NodeId> leaders{0};
  EXPECT_THROW(build_transfer_schedule(ckpts, cluster, assign_stripe_sets(leaders, 11, layout), layout),
               InvalidArgument);
}

TEST(Schedule, NetworkBytesMatchIntersectionOracle) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 300; ++trial) {
    auto c = ckagg::testing::random_case(rng, 6, 4, 5000, 1 + rng() % 2048);
    c.layout.destination_file_count = 1;
    const auto m = static_cast<std::uint32_t>(1 + rng() % c.cluster.node_count);
    std::vector<NodeId> leaders(m);
    std::iota(leaders.begin(), leaders.end(), 0u);
    const Bytes total = c.ckpts.total_bytes();
    const auto assignment = assign_stripe_sets(leaders, total, c.layout);
    const auto r = build_transfer_schedule(c.ckpts, c.cluster, assignment, c.layout);

    const auto offsets = ckagg::testing::fold_prefix(c.ckpts.sizes);
    Bytes expect = 0;
    for (RankId rank = 0; rank < c.ckpts.rank_count(); ++rank) {
      for (std::size_t k = 0; k < m; ++k) {
        if (leaders[k] == c.cluster.node_of(rank)) continue;
        const Bytes l0 = std::min(assignment.stripe_sets[k].first * c.layout.stripe_size, total);
        const Bytes l1 = std::min(assignment.stripe_sets[k].end * c.layout.stripe_size, total);
        expect += overlap(offsets[rank], offsets[rank] + c.ckpts.sizes[rank], l0, l1);
      }
    }
    ASSERT_EQ(r.plan.network_bytes(), expect) << trial;
    ASSERT_TRUE(ckagg::testing::byte_map_covers(r.plan, c.ckpts));
    ASSERT_EQ(stripe_conflicts(r.plan.extents, c.layout).conflicted_stripe_count, 0u);

    ASSERT_EQ(r.schedule.arrival_order.size(), m);
    std::vector<std::size_t> all;
    for (std::size_t k = 0; k < m; ++k) {
      for (std::size_t i : r.schedule.arrival_order[k]) {
        EXPECT_EQ(r.schedule.moves[i].leader_node, leaders[k]);
        all.push_back(i);
      }
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> ids(r.schedule.moves.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    EXPECT_EQ(all, ids);
  }
}

TEST(Schedule, ParticipantsDeriveTheirOwnMoves) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = ckagg::testing::random_case(rng, 5, 4, 3000, 1 + rng() % 512);
    const std::uint32_t m = default_leader_count(c.cluster, c.layout);
    std::vector<NodeId> leaders(m);
    std::iota(leaders.begin(), leaders.end(), 0u);
    const auto assignment = assign_stripe_sets(leaders, c.ckpts.total_bytes(), c.layout);
    const auto r = build_transfer_schedule(c.ckpts, c.cluster, assignment, c.layout);
    const LeaderDirectory dir{assignment.leaders, assignment.stripe_sets, c.layout.stripe_size,
                              c.ckpts.total_bytes(), c.layout.destination_file_count};
    const auto views = piggyback_scan(c.ckpts.sizes, dir);
    std::vector<TransferMove> joined;
    for (RankId rank = 0; rank < c.ckpts.rank_count(); ++rank) {
      const auto mine = moves_for_participant(rank, c.cluster.node_of(rank), c.ckpts.sizes[rank], views[rank]);
      joined.insert(joined.end(), mine.begin(), mine.end());
    }
    ASSERT_EQ(joined, r.schedule.moves) << trial;
  }
}

TEST(PiggybackScan, Examples) {
  const LeaderDirectory dir{{0}, {{0, 2}}, 4, 8, 1};
  const std::vector<Bytes> sizes{4, 4};
  const auto v = piggyback_scan(sizes, dir);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].offset, 0u);
  EXPECT_EQ(v[1].offset, 4u);
  EXPECT_EQ(v[0].directory, dir);
  EXPECT_EQ(v[1].directory, dir);
  const std::vector<Bytes> one{4};
  const auto w = piggyback_scan(one, dir);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].offset, 0u);
  EXPECT_EQ(w[0].directory, dir);
}

TEST(PiggybackScan, OffsetsEqualPrefixSum) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Bytes> sizes(1 + rng() % 500);
    for (auto& s : sizes) s = rng() % 100000;
    const LeaderDirectory dir{{0, 3}, {{0, 1}, {1, 2}}, 7, 14, 1};
    const auto v = piggyback_scan(sizes, dir);
    const auto ref = exclusive_prefix_sum(sizes);
    ASSERT_EQ(v.size(), sizes.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      ASSERT_EQ(v[i].offset, ref.offsets[i]);
      ASSERT_EQ(v[i].directory, dir);
    }
  }
}

TEST(GlobalSpace, CutsFilesAtStripes) {
  const GlobalSpace space(10 * MiB, StripeLayout{MiB, 2, 3});
  const auto sizes = space.file_sizes();
  ASSERT_EQ(sizes.size(), 3u);
  EXPECT_EQ(std::accumulate(sizes.begin(), sizes.end(), Bytes{0}), 10 * MiB);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) EXPECT_EQ(sizes[i] % MiB, 0u);
  const auto loc = space.locate(sizes[0]);
  EXPECT_EQ(loc.file_index, 1u);
  EXPECT_EQ(loc.offset, 0u);
  const auto end = space.locate(10 * MiB);
  EXPECT_EQ(end.file_index, 2u);
  EXPECT_EQ(end.offset, sizes[2]);
}
