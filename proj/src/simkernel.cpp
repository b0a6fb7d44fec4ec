#include "ckagg/simkernel.hpp"

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "ckagg/planner.hpp"

namespace ckagg::sim {

double PfsModel::request_efficiency(Bytes req_bytes, Bytes stripe_size) {
  if (req_bytes >= stripe_size) return 1.0;
  return static_cast<double>(req_bytes) / static_cast<double>(stripe_size);
}

void PfsModel::validate() const {
  if (!(per_server_bandwidth > 0)) throw InvalidArgument("pfs: per_server_bandwidth must be > 0");
  if (!(stripe_penalty >= 1.0)) throw InvalidArgument("pfs: stripe_penalty must be >= 1");
}

void InterferenceModel::validate() const {
  if (!(app_network_demand >= 0.0 && app_network_demand < 1.0)) {
    throw InvalidArgument("interference: app_network_demand must lie in [0,1)");
  }
}

namespace {

// Remaining work below this many bytes counts as finished.
constexpr double kDoneEpsilon = 1e-3;

enum class State : std::uint8_t { pending, ready, lock_wait, serving, done };

struct Flow {
  NodeId src;
  NodeId dst;
  Bytes bytes;
  std::uint32_t phase;
  double remaining;
  double start = 0.0;
  State state = State::pending;
  std::vector<std::uint32_t> dependents;
};

struct Request {
  NodeId writer;
  std::uint32_t file;
  std::uint64_t stripe;
  std::uint32_t server;
  Bytes bytes;
  std::uint32_t phase;
  std::uint32_t open_deps = 0;
  double remaining = 0.0;
  double picked_at = 0.0;
  bool penalized = false;
  State state = State::pending;
};

struct StripeLock {
  std::uint32_t active = 0;
  NodeId holder = 0;
  bool has_last = false;
  NodeId last = 0;
  std::deque<std::uint32_t> waiting;
};

struct PhaseState {
  std::uint32_t flows_left = 0;
  std::uint32_t requests_left = 0;
  double start = 0.0;
  double gather_done = 0.0;
  bool gathers_released = false;
  std::vector<std::uint32_t> flows;
  std::vector<std::uint32_t> requests;
};

struct NodePhaseActivity {
  bool writes = false;
  bool sends = false;
  double last_inbound = 0.0;
  double last_outbound = 0.0;
  double last_write = 0.0;
};

class Engine {
 public:
  Engine(const FlushPlan& plan, const ClusterSpec& cluster, const StripeLayout& layout, const PfsModel& pfs,
         const InterferenceModel& interference, std::uint32_t io_threads)
      : plan_(plan),
        cluster_(cluster),
        layout_(layout),
        pfs_(pfs),
        interference_(interference),
        io_threads_(io_threads),
        phased_(!plan.phases.empty()) {
    build();
  }

  void run(SimReport& report);

 private:
  void build();
  void start_phase(std::uint32_t p);
  void release_phase_requests(std::uint32_t p);
  void advance_phases();
  void make_ready(std::uint32_t id);
  void dispatch();
  void grant(std::uint32_t id);
  void finish_request(std::uint32_t id);
  void finish_flow(std::uint32_t id);

  const FlushPlan& plan_;
  const ClusterSpec& cluster_;
  const StripeLayout& layout_;
  const PfsModel& pfs_;
  const InterferenceModel& interference_;
  const std::uint32_t io_threads_;
  const bool phased_;

  double now_ = 0.0;
  std::vector<Flow> flows_;
  std::vector<Request> requests_;
  std::vector<PhaseState> phases_;
  std::uint32_t current_phase_ = 0;
  std::vector<std::vector<NodePhaseActivity>> activity_;  // [phase][node]

  std::vector<std::set<std::uint32_t>> ready_;  // per writer, plan order
  std::vector<std::uint32_t> busy_threads_;
  std::map<std::pair<std::uint32_t, std::uint64_t>, StripeLock> locks_;
  std::vector<std::vector<std::uint32_t>> serving_;  // per server
  std::vector<std::uint32_t> active_flows_;
  std::vector<std::uint32_t> egress_, ingress_;

  std::vector<double> link_busy_, thread_busy_;
  double barrier_wait_ = 0.0;
  std::uint64_t penalized_ = 0;
  std::vector<Bytes> server_bytes_;
  std::vector<TimelineEvent> timeline_;
  std::size_t finished_ = 0;
};

void Engine::build() {
  const std::uint32_t nodes = cluster_.node_count;
  std::vector<std::uint32_t> phase_of(plan_.extents.size(), 0);
  const std::uint32_t phase_count = phased_ ? static_cast<std::uint32_t>(plan_.phases.size()) : 1;
  if (phased_) {
    std::vector<bool> seen(plan_.extents.size(), false);
    for (std::uint32_t p = 0; p < plan_.phases.size(); ++p) {
      for (std::size_t i : plan_.phases[p]) {
        if (i >= plan_.extents.size() || seen[i]) throw InvalidArgument("plan phases must partition the extents");
        seen[i] = true;
        phase_of[i] = p;
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw InvalidArgument("plan phases must partition the extents");
    }
  }
  phases_.resize(phase_count);
  activity_.assign(phase_count, std::vector<NodePhaseActivity>(nodes));

  // Extents in (phase, plan) order so request ids follow execution order.
  std::vector<std::size_t> order(plan_.extents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return phase_of[a] < phase_of[b]; });

  const Bytes stripe = layout_.stripe_size;
  for (std::size_t idx : order) {
    const auto& e = plan_.extents[idx];
    if (e.length == 0) continue;
    if (e.writer >= nodes) throw InvalidArgument("plan writer outside the cluster");
    const std::uint32_t p = phase_of[idx];

    struct Remote {
      Bytes begin, end;
      std::uint32_t flow;
    };
    std::vector<Remote> remotes;
    Bytes at = e.offset;
    for (const auto& s : e.sources) {
      const NodeId src = cluster_.node_of(s.rank);
      if (s.length > 0 && src != e.writer) {
        const auto id = static_cast<std::uint32_t>(flows_.size());
        flows_.push_back({src, e.writer, s.length, p, static_cast<double>(s.length), 0.0, State::pending, {}});
        phases_[p].flows.push_back(id);
        activity_[p][src].sends = true;
        remotes.push_back({at, at + s.length, id});
      }
      at += s.length;
    }

    std::size_t r = 0;
    for (std::uint64_t st = e.offset / stripe; st * stripe < e.end(); ++st) {
      const Bytes lo = std::max(e.offset, st * stripe);
      const Bytes hi = std::min(e.end(), (st + 1) * stripe);
      const auto id = static_cast<std::uint32_t>(requests_.size());
      Request req{e.writer, e.file_index, st, layout_.server_of(e.file_index, st), hi - lo, p};
      while (r < remotes.size() && remotes[r].end <= lo) ++r;
      for (std::size_t k = r; k < remotes.size() && remotes[k].begin < hi; ++k) {
        flows_[remotes[k].flow].dependents.push_back(id);
        ++req.open_deps;
      }
      requests_.push_back(req);
      phases_[p].requests.push_back(id);
      activity_[p][e.writer].writes = true;
    }
  }
  for (auto& ph : phases_) {
    ph.flows_left = static_cast<std::uint32_t>(ph.flows.size());
    ph.requests_left = static_cast<std::uint32_t>(ph.requests.size());
  }

  ready_.resize(nodes);
  busy_threads_.assign(nodes, 0);
  serving_.resize(layout_.io_server_count);
  egress_.assign(nodes, 0);
  ingress_.assign(nodes, 0);
  link_busy_.assign(nodes, 0.0);
  thread_busy_.assign(nodes, 0.0);
  server_bytes_.assign(layout_.io_server_count, 0);
}

void Engine::make_ready(std::uint32_t id) {
  auto& req = requests_[id];
  req.state = State::ready;
  ready_[req.writer].insert(id);
}

void Engine::start_phase(std::uint32_t p) {
  auto& ph = phases_[p];
  ph.start = now_;
  for (std::uint32_t f : ph.flows) {
    auto& flow = flows_[f];
    flow.state = State::serving;
    flow.start = now_;
    active_flows_.push_back(f);
    ++egress_[flow.src];
    ++ingress_[flow.dst];
  }
  if (!phased_) {
    for (std::uint32_t id : ph.requests) {
      if (requests_[id].open_deps == 0) make_ready(id);
    }
  }
}

void Engine::release_phase_requests(std::uint32_t p) {
  auto& ph = phases_[p];
  ph.gathers_released = true;
  ph.gather_done = now_;
  for (std::uint32_t id : ph.requests) make_ready(id);
  for (NodeId n = 0; n < cluster_.node_count; ++n) {
    const auto& act = activity_[p][n];
    if (!act.writes) continue;
    const double ready_at = std::max(ph.start, act.last_inbound);
    const double wait = now_ - ready_at;
    if (wait > 0) {
      barrier_wait_ += wait;
      timeline_.push_back({n, TimelineEvent::Kind::barrier_wait, ready_at, now_, 0, 0, 0, false});
    }
  }
}

// Phase bookkeeping after completions: release gathers, close finished
// phases and open the next one, possibly several in a row when empty.
void Engine::advance_phases() {
  if (!phased_) return;
  while (current_phase_ < phases_.size()) {
    auto& ph = phases_[current_phase_];
    if (!ph.gathers_released) {
      if (ph.flows_left > 0) return;
      release_phase_requests(current_phase_);
    }
    if (ph.requests_left > 0) return;
    for (NodeId n = 0; n < cluster_.node_count; ++n) {
      const auto& act = activity_[current_phase_][n];
      if (!act.writes && !act.sends) continue;
      double last = ph.start;
      if (act.writes) last = std::max({last, ph.gather_done, act.last_write});
      if (act.sends) last = std::max(last, act.last_outbound);
      const double wait = now_ - last;
      if (wait > 0) {
        barrier_wait_ += wait;
        timeline_.push_back({n, TimelineEvent::Kind::barrier_wait, last, now_, 0, 0, 0, false});
      }
    }
    ++current_phase_;
    if (current_phase_ < phases_.size()) start_phase(current_phase_);
  }
}

void Engine::grant(std::uint32_t id) {
  auto& req = requests_[id];
  auto& lock = locks_[{req.file, req.stripe}];
  req.penalized = lock.has_last && lock.last != req.writer;
  ++lock.active;
  lock.holder = req.writer;
  lock.last = req.writer;
  lock.has_last = true;

  const double efficiency = PfsModel::request_efficiency(req.bytes, layout_.stripe_size);
  double demand = static_cast<double>(req.bytes) / efficiency;
  if (req.penalized) {
    demand *= pfs_.stripe_penalty;
    ++penalized_;
  }
  req.remaining = demand;
  req.state = State::serving;
  serving_[req.server].push_back(id);
}

void Engine::dispatch() {
  for (NodeId n = 0; n < cluster_.node_count; ++n) {
    auto& ready = ready_[n];
    while (busy_threads_[n] < io_threads_ && !ready.empty()) {
      const std::uint32_t id = *ready.begin();
      ready.erase(ready.begin());
      auto& req = requests_[id];
      req.picked_at = now_;
      ++busy_threads_[n];
      auto& lock = locks_[{req.file, req.stripe}];
      if (lock.waiting.empty() && (lock.active == 0 || lock.holder == req.writer)) {
        grant(id);
      } else {
        req.state = State::lock_wait;
        lock.waiting.push_back(id);
      }
    }
  }
}

void Engine::finish_request(std::uint32_t id) {
  auto& req = requests_[id];
  req.state = State::done;
  req.remaining = 0.0;
  ++finished_;
  --busy_threads_[req.writer];
  server_bytes_[req.server] += req.bytes;
  timeline_.push_back({req.writer, TimelineEvent::Kind::write, req.picked_at, now_, req.file, req.stripe, req.bytes,
                       req.penalized});
  auto& act = activity_[req.phase][req.writer];
  act.last_write = std::max(act.last_write, now_);
  --phases_[req.phase].requests_left;

  auto& list = serving_[req.server];
  list.erase(std::find(list.begin(), list.end(), id));

  auto& lock = locks_[{req.file, req.stripe}];
  if (--lock.active == 0 && !lock.waiting.empty()) {
    const NodeId next = requests_[lock.waiting.front()].writer;
    while (!lock.waiting.empty() && requests_[lock.waiting.front()].writer == next) {
      const std::uint32_t w = lock.waiting.front();
      lock.waiting.pop_front();
      grant(w);
    }
  }
}

void Engine::finish_flow(std::uint32_t id) {
  auto& flow = flows_[id];
  flow.state = State::done;
  flow.remaining = 0.0;
  --egress_[flow.src];
  --ingress_[flow.dst];
  active_flows_.erase(std::find(active_flows_.begin(), active_flows_.end(), id));
  timeline_.push_back({flow.dst, TimelineEvent::Kind::gather, flow.start, now_, 0, 0, flow.bytes, false});
  auto& ph = phases_[flow.phase];
  --ph.flows_left;
  activity_[flow.phase][flow.dst].last_inbound = std::max(activity_[flow.phase][flow.dst].last_inbound, now_);
  activity_[flow.phase][flow.src].last_outbound = std::max(activity_[flow.phase][flow.src].last_outbound, now_);
  for (std::uint32_t dep : flow.dependents) {
    auto& req = requests_[dep];
    if (--req.open_deps == 0 && !phased_ && req.state == State::pending) make_ready(dep);
  }
}

void Engine::run(SimReport& report) {
  const double link_capacity = cluster_.network_bandwidth * (1.0 - interference_.app_network_demand);
  const double server_bw = pfs_.per_server_bandwidth;

  start_phase(0);
  advance_phases();
  dispatch();

  std::vector<std::uint32_t> done_flows, done_requests;
  while (finished_ < requests_.size() || !active_flows_.empty()) {
    double dt = std::numeric_limits<double>::infinity();
    for (std::uint32_t f : active_flows_) {
      const auto& flow = flows_[f];
      const double rate = link_capacity / std::max(egress_[flow.src], ingress_[flow.dst]);
      dt = std::min(dt, flow.remaining / rate);
    }
    for (const auto& list : serving_) {
      if (list.empty()) continue;
      const double rate = server_bw / static_cast<double>(list.size());
      for (std::uint32_t id : list) dt = std::min(dt, requests_[id].remaining / rate);
    }
    if (!(dt < std::numeric_limits<double>::infinity())) {
      throw std::logic_error("simulation stalled with unfinished requests");
    }

    for (NodeId n = 0; n < cluster_.node_count; ++n) {
      if (egress_[n] + ingress_[n] > 0) link_busy_[n] += dt;
      if (busy_threads_[n] > 0) thread_busy_[n] += dt;
    }

    done_flows.clear();
    done_requests.clear();
    for (std::uint32_t f : active_flows_) {
      auto& flow = flows_[f];
      const double rate = link_capacity / std::max(egress_[flow.src], ingress_[flow.dst]);
      flow.remaining -= rate * dt;
      if (flow.remaining <= kDoneEpsilon) done_flows.push_back(f);
    }
    for (const auto& list : serving_) {
      if (list.empty()) continue;
      const double rate = server_bw / static_cast<double>(list.size());
      for (std::uint32_t id : list) {
        auto& req = requests_[id];
        req.remaining -= rate * dt;
        if (req.remaining <= kDoneEpsilon) done_requests.push_back(id);
      }
    }
    now_ += dt;

    std::sort(done_flows.begin(), done_flows.end());
    std::sort(done_requests.begin(), done_requests.end());
    for (std::uint32_t f : done_flows) finish_flow(f);
    for (std::uint32_t id : done_requests) finish_request(id);
    advance_phases();
    dispatch();
  }

  report.flush_seconds = now_;
  report.phase_barrier_wait_seconds = barrier_wait_;
  report.penalized_requests = penalized_;
  report.server_bytes = server_bytes_;
  Bytes network = 0;
  for (const auto& f : flows_) network += f.bytes;
  report.total_network_bytes = network;

  if (now_ > 0) {
    const double extra_threads =
        io_threads_ > interference_.spare_cores ? static_cast<double>(io_threads_ - interference_.spare_cores) : 0.0;
    const double thread_share = extra_threads / static_cast<double>(cluster_.ranks_per_node);
    double sum = 0.0;
    for (NodeId n = 0; n < cluster_.node_count; ++n) {
      sum += interference_.app_network_demand * (link_busy_[n] / now_) + thread_share * (thread_busy_[n] / now_);
    }
    report.app_slowdown_estimate = sum / static_cast<double>(cluster_.node_count);
  }
  std::stable_sort(timeline_.begin(), timeline_.end(),
                   [](const TimelineEvent& a, const TimelineEvent& b) { return a.node < b.node; });
  report.timeline = std::move(timeline_);
}

}  // namespace

SimReport simulate(const FlushPlan& plan, const CheckpointSet& ckpts, const ClusterSpec& cluster,
                   const StripeLayout& layout, const PfsModel& pfs, const InterferenceModel& interference,
                   std::uint32_t io_threads) {
  cluster.validate();
  ckpts.validate(cluster);
  layout.validate();
  pfs.validate();
  interference.validate();
  if (io_threads < 1) throw InvalidArgument("io_threads must be >= 1");
  if (auto check = plan_coverage_check(plan, ckpts); !check) {
    throw InvalidArgument("invalid plan: " + check.message);
  }

  SimReport report;
  report.total_bytes = ckpts.total_bytes();
  for (Bytes b : ckpts.node_bytes(cluster)) {
    report.local_phase_seconds =
        std::max(report.local_phase_seconds, static_cast<double>(b) / cluster.local_write_bandwidth);
  }
  report.conflicted_stripe_count = planner::stripe_conflicts(plan.extents, layout).conflicted_stripe_count;

  Engine engine(plan, cluster, layout, pfs, interference, io_threads);
  engine.run(report);

  if (report.total_bytes > 0) {
    report.local_throughput = static_cast<double>(report.total_bytes) / report.local_phase_seconds;
    report.flush_throughput = static_cast<double>(report.total_bytes) / report.flush_seconds;
  }
  return report;
}

std::vector<SweepResult> sweep(std::span<const Scenario> grid, std::uint32_t threads) {
  if (grid.empty()) throw InvalidArgument("sweep: empty scenario grid");
  std::vector<SweepResult> results(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < grid.size(); i = next.fetch_add(1)) {
      try {
        const auto& s = grid[i];
        const auto plan = make_plan(s.strategy, s.ckpts, s.cluster, s.layout);
        results[i] = {s, simulate(plan, s.ckpts, s.cluster, s.layout, s.pfs, s.interference, s.strategy.io_threads)};
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::uint32_t n = std::max<std::uint32_t>(1, std::min<std::uint32_t>(threads, grid.size()));
    for (std::uint32_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace ckagg::sim
