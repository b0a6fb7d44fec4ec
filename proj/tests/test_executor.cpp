#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "ckagg/content.hpp"
#include "ckagg/executor.hpp"
#include "ckagg/strategies.hpp"
#include "test_support.hpp"

using namespace ckagg;
using namespace ckagg::exec;
using ckagg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::vector<std::uint8_t> concatenation(const CheckpointSet& ckpts) {
  std::vector<std::uint8_t> out;
  for (RankId r = 0; r < ckpts.rank_count(); ++r) {
    const auto c = generate_content(ckpts.content_seed, r, ckpts.sizes[r]);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

void flip_byte(const fs::path& p, Bytes offset) {
  std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
  f.seekg(static_cast<std::streamoff>(offset));
  char c;
  f.get(c);
  f.seekp(static_cast<std::streamoff>(offset));
  f.put(static_cast<char>(c ^ 0x5a));
}

struct Run {
  ClusterSpec cluster;
  CheckpointSet ckpts;
  FlushPlan plan;
};

Run execute(const RunDirectory& dir, Strategy s, ClusterSpec cluster, CheckpointSet ckpts, StripeLayout layout) {
  Run r{cluster, ckpts, make_plan(ckagg::testing::config_for(s), ckpts, cluster, layout)};
  run_local_phase(ckpts, cluster, dir);
  write_manifest(dir, r.plan, ckpts, cluster);
  run_flush_phase(r.plan, ckpts, cluster, dir, 3);
  return r;
}

}  // namespace

TEST(LocalPhase, WritesGeneratorContent) {
  TempDir tmp("local");
  const RunDirectory dir(tmp.path());
  const auto cluster = ClusterSpec::uniform(2, 1);
  const CheckpointSet ckpts{{1024, 0}, 4};
  const auto res = run_local_phase(ckpts, cluster, dir);
  EXPECT_EQ(res.bytes, 1024u);
  EXPECT_EQ(read_file(dir.local_file(0, 0)), generate_content(4, 0, 1024));
  ASSERT_TRUE(fs::exists(dir.local_file(1, 1)));
  EXPECT_EQ(fs::file_size(dir.local_file(1, 1)), 0u);
  run_local_phase(ckpts, cluster, dir);
  EXPECT_EQ(read_file(dir.local_file(0, 0)), generate_content(4, 0, 1024));
}

TEST(Flush, FilePerProcessCopiesLocalFiles) {
  TempDir tmp("fpp");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::file_per_process, ClusterSpec::uniform(2, 2), CheckpointSet{{10, 0, 33, 4}, 9},
                         StripeLayout{8, 2, 1});
  for (RankId rank = 0; rank < 4; ++rank) {
    EXPECT_EQ(read_file(dir.dest_file(rank)), read_file(dir.local_file(r.cluster.node_of(rank), rank)));
  }
  EXPECT_TRUE(verify_aggregate(dir, r.ckpts, r.plan).ok);
}

TEST(Flush, PosixSmallExampleIsConcatenation) {
  TempDir tmp("posix");
  const RunDirectory dir(tmp.path());
  const auto r =
      execute(dir, Strategy::posix_aggregate, ClusterSpec::uniform(3, 1), CheckpointSet{{4, 4, 4}, 2}, StripeLayout{4, 2, 1});
  EXPECT_EQ(read_file(dir.dest_file(0)), concatenation(r.ckpts));
}

TEST(Flush, AggregatesEqualConcatenationOracle) {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 12; ++trial) {
    auto c = ckagg::testing::random_case(rng, 5, 4, 20000, 1 + rng() % 4096);
    for (Strategy s : {Strategy::posix_aggregate, Strategy::collective_aggregate, Strategy::leader_aggregate}) {
      TempDir tmp("agg");
      const RunDirectory dir(tmp.path());
      const auto r = execute(dir, s, c.cluster, c.ckpts, c.layout);
      std::vector<std::uint8_t> joined;
      for (std::uint32_t f = 0; f < r.plan.file_count(); ++f) {
        const auto part = read_file(dir.dest_file(f));
        joined.insert(joined.end(), part.begin(), part.end());
      }
      ASSERT_EQ(joined, concatenation(c.ckpts)) << to_string(s) << " trial " << trial;
      ASSERT_TRUE(verify_aggregate(dir, c.ckpts, r.plan).ok);
    }
  }
}

TEST(Flush, RerunIsIdempotent) {
  TempDir tmp("idem");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::leader_aggregate, ClusterSpec::uniform(3, 2),
                         CheckpointSet{{100, 7, 0, 55, 300, 1}, 5}, StripeLayout{64, 2, 2});
  const auto before = read_file(dir.dest_file(0));
  run_flush_phase(r.plan, r.ckpts, r.cluster, dir, 1);
  EXPECT_EQ(read_file(dir.dest_file(0)), before);
  EXPECT_TRUE(verify_aggregate(dir, r.ckpts, r.plan).ok);
}

TEST(Flush, MissingLocalCheckpointNamesRank) {
  TempDir tmp("missing");
  const RunDirectory dir(tmp.path());
  const auto cluster = ClusterSpec::uniform(2, 1);
  const CheckpointSet ckpts{{10, 10}, 1};
  const auto plan = plan_posix_aggregate(ckpts, cluster, StripeLayout{4, 1, 1});
  run_local_phase(ckpts, cluster, dir);
  fs::remove(dir.local_file(1, 1));
  try {
    run_flush_phase(plan, ckpts, cluster, dir, 2);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("rank 1"), std::string::npos) << e.what();
  }
}

TEST(Flush, RejectsInvalidPlan) {
  TempDir tmp("invalid");
  const RunDirectory dir(tmp.path());
  const auto cluster = ClusterSpec::uniform(1, 1);
  const CheckpointSet ckpts{{10}, 1};
  auto plan = plan_posix_aggregate(ckpts, cluster, StripeLayout{4, 1, 1});
  plan.extents[0].length = 9;
  plan.extents[0].sources[0].length = 9;
  run_local_phase(ckpts, cluster, dir);
  EXPECT_THROW(run_flush_phase(plan, ckpts, cluster, dir, 1), InvalidArgument);
}

TEST(Verify, DetectsTamperingAtExactOffset) {
  TempDir tmp("tamper");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::leader_aggregate, ClusterSpec::uniform(2, 2),
                         CheckpointSet{{5000, 3000, 0, 7000}, 3}, StripeLayout{1024, 2, 1});
  ASSERT_TRUE(verify_aggregate(dir, r.ckpts, r.plan).ok);
  flip_byte(dir.dest_file(0), 6789);
  const auto v = verify_aggregate(dir, r.ckpts, r.plan);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.file_index, 0u);
  EXPECT_EQ(v.offset, 6789u);
}

TEST(Verify, DetectsTruncationAtTruncationPoint) {
  TempDir tmp("trunc");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::posix_aggregate, ClusterSpec::uniform(2, 1), CheckpointSet{{4000, 4000}, 3},
                         StripeLayout{1024, 2, 1});
  fs::resize_file(dir.dest_file(0), 5000);
  const auto v = verify_aggregate(dir, r.ckpts, r.plan);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.offset, 5000u);
}

TEST(Verify, DetectsMissingAndOversizedFiles) {
  TempDir tmp("gone");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::file_per_process, ClusterSpec::uniform(1, 2), CheckpointSet{{10, 20}, 3},
                         StripeLayout{8, 1, 1});
  fs::remove(dir.dest_file(1));
  auto v = verify_aggregate(dir, r.ckpts, r.plan);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.file_index, 1u);
  EXPECT_NE(v.file.find("agg.1.dat"), std::string::npos);

  run_flush_phase(r.plan, r.ckpts, r.cluster, dir, 1);
  fs::resize_file(dir.dest_file(0), 11);
  v = verify_aggregate(dir, r.ckpts, r.plan);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.file_index, 0u);
}

TEST(Manifest, RoundTrips) {
  TempDir tmp("manifest");
  const RunDirectory dir(tmp.path());
  const auto r = execute(dir, Strategy::collective_aggregate, ClusterSpec::uniform(3, 2),
                         CheckpointSet{{100, 7, 0, 55, 300, 1}, 77}, StripeLayout{64, 2, 2});
  const auto m = read_manifest(dir);
  EXPECT_EQ(m.node_count, 3u);
  EXPECT_EQ(m.ranks_per_node, 2u);
  EXPECT_EQ(m.ckpts.sizes, r.ckpts.sizes);
  EXPECT_EQ(m.ckpts.content_seed, 77u);
  EXPECT_EQ(m.plan.extents, r.plan.extents);
  EXPECT_EQ(m.plan.phases, r.plan.phases);
  EXPECT_EQ(m.plan.transfers, r.plan.transfers);
  EXPECT_EQ(m.plan.file_sizes, r.plan.file_sizes);
  EXPECT_EQ(m.plan.placements, r.plan.placements);
  EXPECT_EQ(m.plan.strategy_name, r.plan.strategy_name);
}

TEST(Manifest, MissingOrMalformed) {
  TempDir tmp("badmanifest");
  const RunDirectory dir(tmp.path());
  EXPECT_THROW(read_manifest(dir), IoError);
  std::ofstream(dir.manifest_path()) << "{ not json";
  EXPECT_THROW(read_manifest(dir), InvalidArgument);
  std::ofstream(dir.manifest_path()) << R"({"format": "something-else"})";
  EXPECT_THROW(read_manifest(dir), InvalidArgument);
}

TEST(PlanJson, RoundTrips) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = ckagg::testing::random_case(rng, 4, 4, 1000, 64);
    for (Strategy s : kAllStrategies) {
      const auto p = make_plan(ckagg::testing::config_for(s), c.ckpts, c.cluster, c.layout);
      const auto q = plan_from_json(nlohmann::json::parse(plan_to_json(p).dump()));
      EXPECT_EQ(plan_to_json(q), plan_to_json(p));
    }
  }
}
