#include "ckagg/executor.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

#include "ckagg/content.hpp"
#include "ckagg/kernels.hpp"

namespace ckagg::exec {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kChunk = 1 << 20;

std::string errno_text() { return std::strerror(errno); }

class Fd {
 public:
  Fd(const fs::path& path, int flags, mode_t mode = 0644) : path_(path) {
    do {
      fd_ = ::open(path.c_str(), flags | O_CLOEXEC, mode);
    } while (fd_ < 0 && errno == EINTR);
  }
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : path_(std::move(other.path_)), fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&&) = delete;

  bool is_open() const { return fd_ >= 0; }
  const fs::path& path() const { return path_; }

  Bytes size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) throw IoError("stat " + path_.string() + ": " + errno_text());
    return static_cast<Bytes>(st.st_size);
  }

  void truncate(Bytes size) {
    if (::ftruncate(fd_, static_cast<off_t>(size)) != 0) {
      throw IoError("resize " + path_.string() + ": " + errno_text());
    }
  }

  // Reads up to buf.size() bytes; fewer only at end of file.
  std::size_t read_at(Bytes offset, std::span<std::uint8_t> buf) const {
    std::size_t done = 0;
    while (done < buf.size()) {
      const ssize_t n = ::pread(fd_, buf.data() + done, buf.size() - done, static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("read " + path_.string() + ": " + errno_text());
      }
      if (n == 0) break;
      done += static_cast<std::size_t>(n);
    }
    return done;
  }

  void write_at(Bytes offset, std::span<const std::uint8_t> buf) {
    std::size_t done = 0;
    while (done < buf.size()) {
      const ssize_t n = ::pwrite(fd_, buf.data() + done, buf.size() - done, static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("write " + path_.string() + ": " + errno_text());
      }
      if (n == 0) throw IoError("short write to " + path_.string() + " at offset " + std::to_string(offset + done));
      done += static_cast<std::size_t>(n);
    }
  }

 private:
  fs::path path_;
  int fd_ = -1;
};

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("create " + p.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Runs `work(worker, item)` for every item of every backend, with up to
// `threads` workers per backend; all backends run at once.
template <typename Item, typename Fn>
void run_backends(const std::vector<std::vector<Item>>& per_backend, std::uint32_t threads, Fn&& work) {
  std::vector<std::atomic<std::size_t>> next(per_backend.size());
  std::mutex error_mutex;
  std::exception_ptr error;
  std::atomic<bool> failed{false};

  std::vector<std::jthread> pool;
  for (std::size_t b = 0; b < per_backend.size(); ++b) {
    const std::size_t workers = std::min<std::size_t>(threads, per_backend[b].size());
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, b] {
        try {
          while (!failed.load(std::memory_order_relaxed)) {
            const std::size_t i = next[b].fetch_add(1);
            if (i >= per_backend[b].size()) break;
            work(per_backend[b][i]);
          }
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      });
    }
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

void copy_range(const Fd& from, Bytes from_offset, Fd& to, Bytes to_offset, Bytes length) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(std::min<Bytes>(length, kChunk)));
  Bytes done = 0;
  while (done < length) {
    const auto n = static_cast<std::size_t>(std::min<Bytes>(length - done, buf.size()));
    const std::size_t got = from.read_at(from_offset + done, std::span(buf.data(), n));
    if (got != n) {
      throw IoError("short read from " + from.path().string() + " at offset " + std::to_string(from_offset + done));
    }
    to.write_at(to_offset + done, std::span<const std::uint8_t>(buf.data(), n));
    done += n;
  }
}

struct Piece {
  NodeId writer;
  std::uint32_t file;
  Bytes dest_offset;
  SourceRange source;
};

fs::path staged_path(const RunDirectory& dir, NodeId leader, const SourceRange& s) {
  return dir.staging_dir(leader) /
         ("rank" + std::to_string(s.rank) + "_" + std::to_string(s.offset) + "_" + std::to_string(s.length) + ".part");
}

Fd open_local(const RunDirectory& dir, const ClusterSpec& cluster, RankId rank, const SourceRange& s) {
  const NodeId node = cluster.node_of(rank);
  Fd fd(dir.local_file(node, rank), O_RDONLY);
  if (!fd.is_open()) {
    throw IoError("rank " + std::to_string(rank) + " (node " + std::to_string(node) +
                  "): cannot open local checkpoint " + dir.local_file(node, rank).string() + ": " + errno_text());
  }
  if (fd.size() < s.offset + s.length) {
    throw IoError("rank " + std::to_string(rank) + " (node " + std::to_string(node) +
                  "): local checkpoint is shorter than planned");
  }
  return fd;
}

}  // namespace

fs::path RunDirectory::node_dir(NodeId node) const { return root_ / "local" / ("node" + std::to_string(node)); }

fs::path RunDirectory::local_file(NodeId node, RankId rank) const {
  return node_dir(node) / ("rank" + std::to_string(rank) + ".ckpt");
}

fs::path RunDirectory::staging_dir(NodeId node) const { return node_dir(node) / "staging"; }

fs::path RunDirectory::dest_file(std::uint32_t index) const {
  return dest_dir() / ("agg." + std::to_string(index) + ".dat");
}

PhaseResult run_local_phase(const CheckpointSet& ckpts, const ClusterSpec& cluster, const RunDirectory& dir) {
  cluster.validate();
  ckpts.validate(cluster);
  for (NodeId n = 0; n < cluster.node_count; ++n) ensure_dir(dir.node_dir(n));

  std::vector<std::vector<RankId>> per_node(cluster.node_count);
  for (RankId r = 0; r < ckpts.rank_count(); ++r) per_node[cluster.node_of(r)].push_back(r);

  const auto start = std::chrono::steady_clock::now();
  run_backends(per_node, cluster.ranks_per_node, [&](RankId r) {
    const NodeId node = cluster.node_of(r);
    Fd fd(dir.local_file(node, r), O_WRONLY | O_CREAT | O_TRUNC);
    if (!fd.is_open()) {
      throw IoError("rank " + std::to_string(r) + " (node " + std::to_string(node) + "): cannot create " +
                    dir.local_file(node, r).string() + ": " + errno_text());
    }
    const Bytes size = ckpts.sizes[r];
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(std::min<Bytes>(size, kChunk)));
    for (Bytes done = 0; done < size;) {
      const auto n = static_cast<std::size_t>(std::min<Bytes>(size - done, buf.size()));
      fill_content(ckpts.content_seed, r, done, std::span(buf.data(), n));
      fd.write_at(done, std::span<const std::uint8_t>(buf.data(), n));
      done += n;
    }
  });
  return {seconds_since(start), ckpts.total_bytes()};
}

FlushResult run_flush_phase(const FlushPlan& plan, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                            const RunDirectory& dir, std::uint32_t io_threads) {
  cluster.validate();
  ckpts.validate(cluster);
  if (io_threads < 1) throw InvalidArgument("io_threads must be >= 1");
  if (auto check = plan_coverage_check(plan, ckpts); !check) {
    throw InvalidArgument("invalid plan: " + check.message);
  }
  for (const auto& e : plan.extents) {
    if (e.writer >= cluster.node_count) throw InvalidArgument("plan writer outside the cluster");
  }

  const auto start = std::chrono::steady_clock::now();
  ensure_dir(dir.dest_dir());
  for (std::uint32_t f = 0; f < plan.file_count(); ++f) {
    Fd fd(dir.dest_file(f), O_WRONLY | O_CREAT);
    if (!fd.is_open()) throw IoError("create " + dir.dest_file(f).string() + ": " + errno_text());
    fd.truncate(plan.file_sizes[f]);
  }

  std::vector<std::vector<std::size_t>> groups = plan.phases;
  if (groups.empty()) {
    groups.emplace_back(plan.extents.size());
    for (std::size_t i = 0; i < plan.extents.size(); ++i) groups.back()[i] = i;
  }

  FlushResult result;
  std::atomic<Bytes> staged{0};
  std::atomic<Bytes> written{0};
  for (const auto& group : groups) {
    std::vector<std::vector<Piece>> per_writer(cluster.node_count);
    std::vector<std::vector<Piece>> gathers(cluster.node_count);
    for (std::size_t idx : group) {
      const auto& e = plan.extents.at(idx);
      Bytes at = e.offset;
      for (const auto& s : e.sources) {
        const Piece p{e.writer, e.file_index, at, s};
        if (s.length > 0) {
          per_writer[e.writer].push_back(p);
          if (cluster.node_of(s.rank) != e.writer) gathers[e.writer].push_back(p);
        }
        at += s.length;
      }
    }

    // Gather: every remote piece lands in the leader's staging directory
    // before any write of this group starts.
    for (NodeId n = 0; n < cluster.node_count; ++n) {
      if (!gathers[n].empty()) ensure_dir(dir.staging_dir(n));
    }
    run_backends(gathers, io_threads, [&](const Piece& p) {
      const Fd from = open_local(dir, cluster, p.source.rank, p.source);
      Fd to(staged_path(dir, p.writer, p.source), O_WRONLY | O_CREAT | O_TRUNC);
      if (!to.is_open()) throw IoError("stage " + staged_path(dir, p.writer, p.source).string() + ": " + errno_text());
      copy_range(from, p.source.offset, to, 0, p.source.length);
      staged += p.source.length;
    });

    run_backends(per_writer, io_threads, [&](const Piece& p) {
      Fd dest(dir.dest_file(p.file), O_WRONLY);
      if (!dest.is_open()) throw IoError("open " + dir.dest_file(p.file).string() + ": " + errno_text());
      if (cluster.node_of(p.source.rank) != p.writer) {
        const Fd from(staged_path(dir, p.writer, p.source), O_RDONLY);
        if (!from.is_open()) {
          throw IoError("rank " + std::to_string(p.source.rank) + ": staged data missing on node " +
                        std::to_string(p.writer));
        }
        copy_range(from, 0, dest, p.dest_offset, p.source.length);
      } else {
        const Fd from = open_local(dir, cluster, p.source.rank, p.source);
        copy_range(from, p.source.offset, dest, p.dest_offset, p.source.length);
      }
      written += p.source.length;
    });
  }
  result.seconds = seconds_since(start);
  result.bytes_written = written.load();
  result.bytes_staged = staged.load();
  return result;
}

VerifyResult verify_aggregate(const RunDirectory& dir, const CheckpointSet& ckpts, const FlushPlan& plan) {
  auto fail = [&](std::uint32_t f, Bytes offset, std::string message) {
    VerifyResult r;
    r.ok = false;
    r.file_index = f;
    r.file = dir.dest_file(f).string();
    r.offset = offset;
    r.message = std::move(message);
    return r;
  };

  std::vector<std::vector<std::size_t>> by_file(plan.file_count());
  for (std::size_t i = 0; i < plan.extents.size(); ++i) {
    const auto& e = plan.extents[i];
    if (e.file_index >= plan.file_count()) return fail(e.file_index, e.offset, "extent outside planned files");
    by_file[e.file_index].push_back(i);
  }

  std::vector<std::uint8_t> actual(kChunk);
  std::vector<std::uint8_t> expected(kChunk);
  for (std::uint32_t f = 0; f < plan.file_count(); ++f) {
    const Fd fd(dir.dest_file(f), O_RDONLY);
    if (!fd.is_open()) return fail(f, 0, "destination file missing: " + dir.dest_file(f).string());
    const Bytes size = fd.size();
    const Bytes planned = plan.file_sizes[f];

    auto& idx = by_file[f];
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return plan.extents[a].offset < plan.extents[b].offset; });
    for (std::size_t i : idx) {
      const auto& e = plan.extents[i];
      Bytes at = e.offset;
      for (const auto& s : e.sources) {
        for (Bytes done = 0; done < s.length;) {
          const auto n = static_cast<std::size_t>(std::min<Bytes>(s.length - done, kChunk));
          const Bytes pos = at + done;
          if (pos >= size) return fail(f, size, "destination truncated at offset " + std::to_string(size));
          const std::size_t got = fd.read_at(pos, std::span(actual.data(), n));
          fill_content(ckpts.content_seed, s.rank, s.offset + done, std::span(expected.data(), n));
          const std::size_t miss = kernels::first_mismatch(std::span<const std::uint8_t>(actual.data(), got),
                                                           std::span<const std::uint8_t>(expected.data(), n));
          if (miss < got) {
            return fail(f, pos + miss,
                        "byte mismatch at offset " + std::to_string(pos + miss) + " (rank " +
                            std::to_string(s.rank) + ", source offset " + std::to_string(s.offset + done + miss) + ")");
          }
          if (got < n) return fail(f, pos + got, "destination truncated at offset " + std::to_string(pos + got));
          done += n;
        }
        at += s.length;
      }
    }
    if (size != planned) {
      return fail(f, std::min(size, planned),
                  "destination size " + std::to_string(size) + " differs from planned " + std::to_string(planned));
    }
  }
  return {};
}

nlohmann::ordered_json plan_to_json(const FlushPlan& plan) {
  nlohmann::ordered_json doc;
  doc["strategy"] = plan.strategy_name;
  doc["file_sizes"] = plan.file_sizes;
  doc["leaders"] = plan.leaders;
  auto& placements = doc["placements"] = nlohmann::ordered_json::array();
  for (const auto& p : plan.placements) placements.push_back({p.file_index, p.offset});
  auto& transfers = doc["transfers"] = nlohmann::ordered_json::array();
  for (const auto& t : plan.transfers) transfers.push_back({t.from, t.to, t.bytes});
  auto& extents = doc["extents"] = nlohmann::ordered_json::array();
  for (const auto& e : plan.extents) {
    nlohmann::ordered_json je;
    je["writer"] = e.writer;
    je["file"] = e.file_index;
    je["offset"] = e.offset;
    je["length"] = e.length;
    auto& sources = je["sources"] = nlohmann::ordered_json::array();
    for (const auto& s : e.sources) sources.push_back({s.rank, s.offset, s.length});
    extents.push_back(std::move(je));
  }
  doc["phases"] = plan.phases;
  return doc;
}

FlushPlan plan_from_json(const nlohmann::json& doc) {
  try {
    FlushPlan plan;
    plan.strategy_name = doc.at("strategy").get<std::string>();
    plan.file_sizes = doc.at("file_sizes").get<std::vector<Bytes>>();
    plan.leaders = doc.at("leaders").get<std::vector<NodeId>>();
    for (const auto& p : doc.at("placements")) {
      plan.placements.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<Bytes>()});
    }
    for (const auto& t : doc.at("transfers")) {
      plan.transfers.push_back({t.at(0).get<NodeId>(), t.at(1).get<NodeId>(), t.at(2).get<Bytes>()});
    }
    for (const auto& je : doc.at("extents")) {
      WriteExtent e;
      e.writer = je.at("writer").get<NodeId>();
      e.file_index = je.at("file").get<std::uint32_t>();
      e.offset = je.at("offset").get<Bytes>();
      e.length = je.at("length").get<Bytes>();
      for (const auto& s : je.at("sources")) {
        e.sources.push_back({s.at(0).get<RankId>(), s.at(1).get<Bytes>(), s.at(2).get<Bytes>()});
      }
      plan.extents.push_back(std::move(e));
    }
    plan.phases = doc.at("phases").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& phase : plan.phases) {
      for (std::size_t i : phase) {
        if (i >= plan.extents.size()) throw InvalidArgument("phase references unknown extent");
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed plan: ") + e.what());
  }
}

void write_manifest(const RunDirectory& dir, const FlushPlan& plan, const CheckpointSet& ckpts,
                    const ClusterSpec& cluster) {
  nlohmann::ordered_json doc;
  doc["format"] = "ckagg-manifest";
  doc["version"] = 1;
  doc["strategy"] = plan.strategy_name;
  doc["seed"] = ckpts.content_seed;
  doc["node_count"] = cluster.node_count;
  doc["ranks_per_node"] = cluster.ranks_per_node;
  doc["rank_order"] = "node-major";
  doc["sizes"] = ckpts.sizes;
  auto& offsets = doc["offsets"] = nlohmann::ordered_json::array();
  for (RankId r = 0; r < plan.placements.size(); ++r) {
    offsets.push_back({{"rank", r}, {"file", plan.placements[r].file_index}, {"offset", plan.placements[r].offset}});
  }
  doc["file_sizes"] = plan.file_sizes;
  doc["leaders"] = plan.leaders;
  doc["plan"] = plan_to_json(plan);

  ensure_dir(dir.root());
  const auto tmp = dir.manifest_path().string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("cannot write " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, dir.manifest_path(), ec);
  if (ec) throw IoError("cannot publish manifest: " + ec.message());
}

Manifest read_manifest(const RunDirectory& dir) {
  std::ifstream in(dir.manifest_path(), std::ios::binary);
  if (!in) throw IoError("manifest not found: " + dir.manifest_path().string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("manifest parse error: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "ckagg-manifest") throw InvalidArgument("not a ckagg manifest");
    Manifest m;
    m.node_count = doc.at("node_count").get<std::uint32_t>();
    m.ranks_per_node = doc.at("ranks_per_node").get<std::uint32_t>();
    m.ckpts.sizes = doc.at("sizes").get<std::vector<Bytes>>();
    m.ckpts.content_seed = doc.at("seed").get<std::uint64_t>();
    m.plan = plan_from_json(doc.at("plan"));

    // The top-level placement and size fields must agree with the embedded plan.
    std::vector<RankPlacement> placements;
    for (const auto& o : doc.at("offsets")) {
      placements.push_back({o.at("file").get<std::uint32_t>(), o.at("offset").get<Bytes>()});
    }
    if (placements != m.plan.placements) throw InvalidArgument("manifest offsets disagree with the plan");
    if (doc.at("file_sizes").get<std::vector<Bytes>>() != m.plan.file_sizes) {
      throw InvalidArgument("manifest file sizes disagree with the plan");
    }
    if (doc.at("strategy").get<std::string>() != m.plan.strategy_name) {
      throw InvalidArgument("manifest strategy disagrees with the plan");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace ckagg::exec
