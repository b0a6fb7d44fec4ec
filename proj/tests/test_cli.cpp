#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ckagg/cli.hpp"
#include "ckagg/config.hpp"
#include "test_support.hpp"

using namespace ckagg;
using ckagg::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args, const cli::Hooks& hooks = {}) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err, hooks);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

// A small execute-capable config rooted in `dir`.
fs::path write_config(const fs::path& dir, nlohmann::json patch = nlohmann::json::object()) {
  nlohmann::json doc = nlohmann::json::parse(R"({
    "cluster": {"node_count": 3, "ranks_per_node": 2},
    "checkpoint": {"sizes": [5000, 0, 12345, 777, 4096, 3]},
    "seed": 5,
    "layout": {"stripe_size": 1024, "io_server_count": 2},
    "strategy": ["file_per_process", "posix_aggregate", "collective_aggregate", "leader_aggregate"]
  })");
  doc["run_dir"] = (dir / "run").string();
  doc["out"] = (dir / "report.json").string();
  doc.merge_patch(patch);
  const auto path = dir / "config.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"launch"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"run", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"--help"}).code, cli::kExitOk);
  TempDir tmp("cli_usage");
  EXPECT_EQ(invoke({"run", "--config", (tmp.path() / "none.json").string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"run", "--strategy", "nope", "--out", (tmp.path() / "r.json").string()}).code, cli::kExitUsage);
  EXPECT_EQ(invoke({"run", "--mode", "dry", "--out", (tmp.path() / "r.json").string()}).code, cli::kExitUsage);
}

TEST(Cli, SimulateDefaultScenarioWritesReport) {
  TempDir tmp("cli_sim");
  const auto out = tmp.path() / "report.json";
  const auto r = invoke({"run", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(out));
  const auto doc = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(doc.size(), 4u);
  // the echoed config reproduces the report
  const auto again = tmp.path() / "again.json";
  auto echoed = nlohmann::json::parse(slurp(out.string() + ".config.json"));
  echoed["out"] = again.string();
  std::ofstream(tmp.path() / "echo.json") << echoed.dump();
  ASSERT_EQ(invoke({"run", "--config", (tmp.path() / "echo.json").string()}).code, 0);
  EXPECT_EQ(slurp(again), slurp(out));
}

TEST(Cli, BothModesVerifyAndReport) {
  TempDir tmp("cli_both");
  const auto cfg = write_config(tmp.path());
  const auto r = invoke({"run", "--config", cfg.string(), "--mode", "both", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(tmp.path() / "report.json");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
  EXPECT_NE(csv.find(",execute,"), std::string::npos);
  EXPECT_NE(csv.find(",simulate,"), std::string::npos);
  for (Strategy s : kAllStrategies) {
    const auto dir = tmp.path() / "run" / std::string(to_string(s));
    const auto v = invoke({"verify", dir.string()});
    EXPECT_EQ(v.code, 0) << v.err;
  }
}

TEST(Cli, TamperedDestinationFailsRun) {
  TempDir tmp("cli_tamper");
  const auto cfg = write_config(tmp.path());
  cli::Hooks hooks;
  hooks.after_flush = [](const exec::RunDirectory& dir) {
    std::fstream f(dir.dest_file(0), std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.put('\x7f');
    f.put('\x00');
  };
  const auto r = invoke({"run", "--config", cfg.string(), "--mode", "execute", "--strategy", "leader_aggregate"}, hooks);
  EXPECT_EQ(r.code, cli::kExitVerifyFailed);
  EXPECT_NE(r.err.find("MISMATCH"), std::string::npos) << r.err;
}

TEST(Cli, ExecuteByteLimitEnforced) {
  TempDir tmp("cli_limit");
  const auto cfg = write_config(tmp.path(), {{"execute_byte_limit", 1000}});
  EXPECT_EQ(invoke({"run", "--config", cfg.string(), "--mode", "execute"}).code, cli::kExitUsage);
  EXPECT_FALSE(fs::exists(tmp.path() / "run"));
}

TEST(Cli, VerifyFailures) {
  TempDir tmp("cli_verify");
  const auto cfg = write_config(tmp.path());
  ASSERT_EQ(invoke({"run", "--config", cfg.string(), "--mode", "execute", "--strategy", "posix_aggregate"}).code, 0);
  const auto dir = tmp.path() / "run" / "posix_aggregate";
  ASSERT_EQ(invoke({"verify", dir.string()}).code, 0);

  EXPECT_EQ(invoke({"verify", (tmp.path() / "nowhere").string()}).code, cli::kExitUsage);

  const auto manifest = dir / "manifest.json";
  const auto original = slurp(manifest);
  auto doc = nlohmann::json::parse(original);
  doc["sizes"][2] = doc["sizes"][2].get<std::uint64_t>() + 1;
  std::ofstream(manifest) << doc.dump();
  const auto edited = invoke({"verify", dir.string()});
  EXPECT_NE(edited.code, 0);
  EXPECT_NE(edited.code, cli::kExitUsage);
  std::ofstream(manifest) << original;

  fs::remove(dir / "dest" / "agg.0.dat");
  const auto gone = invoke({"verify", dir.string()});
  EXPECT_EQ(gone.code, cli::kExitVerifyFailed);
  EXPECT_NE(gone.err.find("agg.0.dat"), std::string::npos) << gone.err;
}

TEST(Cli, SweepCrossProductAndDeterminism) {
  TempDir tmp("cli_sweep");
  const auto cfg = write_config(
      tmp.path(),
      {{"checkpoint", {{"sizes", nullptr}, {"uniform_bytes", 5000}}},
       {"grid", {{"node_count", {2, 3}}, {"ranks_per_node", {1, 2}}, {"strategy", {"posix_aggregate", "leader_aggregate"}}}},
       {"format", "csv"}});
  const auto a = tmp.path() / "a.csv", b = tmp.path() / "b.csv";
  ASSERT_EQ(invoke({"sweep", "--config", cfg.string(), "--out", a.string(), "--plot", "flush_throughput"}).code, 0);
  ASSERT_EQ(invoke({"sweep", "--config", cfg.string(), "--out", b.string()}).code, 0);
  const auto text = slurp(a);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 9);
  EXPECT_EQ(text, slurp(b));
  EXPECT_TRUE(fs::exists(a.string() + ".flush_throughput.csv"));

  const auto empty = write_config(tmp.path(), {{"grid", {{"ranks_per_node", nlohmann::json::array()}}}});
  EXPECT_EQ(invoke({"sweep", "--config", empty.string()}).code, cli::kExitUsage);
  const auto none = write_config(tmp.path());
  EXPECT_EQ(invoke({"sweep", "--config", none.string()}).code, cli::kExitUsage);
}

TEST(Cli, PlanPrintsJson) {
  const auto r = invoke({"plan", "--strategy", "leader_aggregate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  EXPECT_EQ(doc.at("strategy").get<std::string>(), "leader_aggregate");
}
