#pragma once

// Real-file execution of a FlushPlan at desk scale. Layout under the run
// root:
//
//   local/node<k>/rank<r>.ckpt          node-local checkpoints
//   local/node<k>/staging/*.part        data gathered by leader k
//   dest/agg.<i>.dat                    destination files
//   manifest.json                       everything needed to re-verify
//
// Timings are recorded but only correctness is contractual.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "ckagg/model.hpp"

namespace ckagg::exec {

class IoError : public Error {
 public:
  using Error::Error;
};

class RunDirectory {
 public:
  explicit RunDirectory(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path node_dir(NodeId node) const;
  std::filesystem::path local_file(NodeId node, RankId rank) const;
  std::filesystem::path staging_dir(NodeId node) const;
  std::filesystem::path dest_dir() const { return root_ / "dest"; }
  std::filesystem::path dest_file(std::uint32_t index) const;
  std::filesystem::path manifest_path() const { return root_ / "manifest.json"; }

 private:
  std::filesystem::path root_;
};

struct PhaseResult {
  double seconds = 0.0;
  Bytes bytes = 0;
};

/// Blocking local phase: one file per rank under its node directory.
PhaseResult run_local_phase(const CheckpointSet& ckpts, const ClusterSpec& cluster, const RunDirectory& dir);

struct FlushResult {
  double seconds = 0.0;
  Bytes bytes_written = 0;
  Bytes bytes_staged = 0;
};

/// Flush phase: gathers are staged as file copies under the leader's
/// staging directory, then every backend writes its extents with up to
/// io_threads positional writers. Destination files are sized up front, so
/// re-running is idempotent. Phases run one after another.
FlushResult run_flush_phase(const FlushPlan& plan, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                            const RunDirectory& dir, std::uint32_t io_threads);

struct VerifyResult {
  bool ok = true;
  std::uint32_t file_index = 0;
  std::string file;
  Bytes offset = 0;
  std::string message;

  explicit operator bool() const { return ok; }
};

/// Compares every destination byte with the regenerated source byte.
VerifyResult verify_aggregate(const RunDirectory& dir, const CheckpointSet& ckpts, const FlushPlan& plan);

nlohmann::ordered_json plan_to_json(const FlushPlan& plan);
/// Throws InvalidArgument on malformed input.
FlushPlan plan_from_json(const nlohmann::json& doc);

struct Manifest {
  std::uint32_t node_count = 1;
  std::uint32_t ranks_per_node = 1;
  CheckpointSet ckpts;
  FlushPlan plan;
};

void write_manifest(const RunDirectory& dir, const FlushPlan& plan, const CheckpointSet& ckpts,
                    const ClusterSpec& cluster);
/// Throws IoError when missing, InvalidArgument when malformed.
Manifest read_manifest(const RunDirectory& dir);

}  // namespace ckagg::exec
