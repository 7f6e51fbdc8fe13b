#include "vicc/cluster.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <mutex>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace vicc {

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

}  // namespace

ClusterConfig parse_config(const std::string& text, ClusterConfig cfg) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    auto num = [&] {
      try {
        std::size_t used = 0;
        auto v = std::stoull(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
        return v;
      } catch (const std::exception&) {
        throw std::invalid_argument("config line " + std::to_string(lineno) + ": bad number '" + val + "'");
      }
    };
    if (key == "nodes") cfg.nodes = static_cast<std::uint32_t>(num());
    else if (key == "workers_per_node") cfg.workers_per_node = static_cast<std::uint32_t>(num());
    else if (key == "transport") {
      if (val == "sim") cfg.transport = TransportKind::kSim;
      else if (val == "concurrent") cfg.transport = TransportKind::kConcurrent;
      else throw std::invalid_argument("config: transport must be sim or concurrent");
    }
    else if (key == "latency_ticks") cfg.latency_ticks = num();
    else if (key == "jitter_ticks") cfg.jitter_ticks = num();
    else if (key == "seed") cfg.seed = num();
    else if (key == "watermark_interval") cfg.watermark_interval = static_cast<std::uint32_t>(num());
    else if (key == "lock_timeout_ticks") cfg.lock_timeout_ticks = num();
    else if (key == "service_ticks") cfg.service_ticks = num();
    else if (key == "per_key_ticks") cfg.per_key_ticks = num();
    else if (key == "coord_service_ticks") cfg.coord_service_ticks = num();
    else if (key == "max_retries") cfg.max_retries = static_cast<std::uint32_t>(num());
    else if (key == "backoff_ticks") cfg.backoff_ticks = num();
    else if (key == "status_capacity") cfg.status_capacity = num();
    else if (key == "tick_ns") cfg.tick_ns = num();
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  if (cfg.nodes == 0 || cfg.workers_per_node == 0) throw std::invalid_argument("config: nodes and workers must be positive");
  if (cfg.workers_per_node > 1024) throw std::invalid_argument("config: at most 1024 workers per node");
  return cfg;
}

ClusterConfig load_config(const std::string& path, ClusterConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

// ----------------------------------------------------------- partitioner

std::uint64_t Partitioner::mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint32_t Partitioner::group_on(NodeId node, std::uint32_t i) const {
  if (cache_.size() != nodes_) cache_.assign(nodes_, {});
  auto& list = cache_[node];
  std::uint32_t g = list.empty() ? 0 : list.back() + 1;
  while (list.size() <= i) {
    if (mix(g) % nodes_ == node) list.push_back(g);
    ++g;
  }
  return list[i];
}

double RunResult::abort_rate() const {
  return attempts() == 0 ? 0.0 : static_cast<double>(aborted) / static_cast<double>(attempts());
}

double RunResult::messages_per_txn() const {
  return attempts() == 0 ? 0.0 : static_cast<double>(messages) / static_cast<double>(attempts());
}

double RunResult::throughput(const ClusterConfig& cfg) const {
  if (cfg.transport == TransportKind::kConcurrent) {
    return elapsed_seconds > 0 ? static_cast<double>(committed) / elapsed_seconds : 0.0;
  }
  // A simulated tick is a microsecond.
  return elapsed_ticks > 0 ? static_cast<double>(committed) * 1e6 / static_cast<double>(elapsed_ticks) : 0.0;
}

std::size_t payload_keys(const Payload& p) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ReadReq>) return m.keys.size();
        else if constexpr (std::is_same_v<M, PrepareReq>) return m.spec.writes.size() + m.spec.reads.size();
        else if constexpr (std::is_same_v<M, CommitReq> || std::is_same_v<M, AbortReq>) return m.keys.size();
        else return 0;
      },
      p);
}

// ------------------------------------------------------------- transport

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(NodeId src, NodeId dst, Payload payload) = 0;
  virtual void schedule(NodeId node, Tick delay, Timer timer) = 0;
  virtual Tick now() const = 0;
  virtual void program_done() = 0;
};

// ------------------------------------------------------------------ node

namespace detail {

NodeId host_of(Tid tid) { return tid.session_id() / 1024; }

enum class Stage { kBegin, kReading, kHolding, kPreparing, kPushing, kEnding, kDone };

struct HostTxn {
  TxnCtx ctx;
  Stage stage = Stage::kBegin;
  ReadSet values;
  std::map<Key, std::pair<std::uint32_t, Tid>> read_from;
  std::set<Tid> seen;
  std::set<Tid> skipped;
  std::set<NodeId> touched;
  std::map<NodeId, std::vector<Key>> writes_by_node;
  std::set<NodeId> participants;
  std::uint32_t waiting = 0;
  bool failed = false;
  AbortReason reason = AbortReason::kWriteConflict;
  std::vector<OverwriteInfo> overwritten;
  std::vector<Timestamp> sids;
  std::map<Tid, Timestamp> incoming;
  CentralBegin central;
  bool coord_open = false;
  std::optional<CommitStamp> stamp;
  TxnRecord rec;
};

struct Slot {
  Session session;
  std::optional<Program> program;
  std::uint32_t attempt = 0;
  Timestamp pin = kInfinity;
  std::unique_ptr<HostTxn> txn;
};

struct ActivePrepare {
  NodeId src = 0;
  PrepareTask task;
  std::uint32_t epoch = 0;
  bool waiting = false;
};

struct ParkedRead {
  NodeId src = 0;
  ReadReq req;
  std::vector<ReadEntry> done;
};

}  // namespace detail

using namespace detail;

class Node {
 public:
  Node(NodeId id, const ClusterConfig& cfg, Level level, const Partitioner& part, bool master)
      : id_(id), cfg_(cfg), level_(level), part_(part), master_(master),
        store_(cfg.status_capacity), rng_(cfg.seed ^ Partitioner::mix(id + 0x51ed)) {
    if (!master_) {
      for (std::uint32_t s = 0; s < cfg.workers_per_node; ++s) {
        slots_.push_back(Slot{Session(id * 1024 + s), std::nullopt, 0, kInfinity, nullptr});
      }
    }
  }

  Store& store() { return store_; }
  const Store& store() const { return store_; }
  const AntiDepTable& table() const { return table_; }
  std::deque<Program>& queue() { return queue_; }
  std::uint32_t slot_count() const { return static_cast<std::uint32_t>(slots_.size()); }

  void bind(Transport* t, HistorySink* h) {
    net_ = t;
    history_ = h;
  }

  Tick cost(const Payload& p) const {
    if (master_) return cfg_.coord_service_ticks;
    return cfg_.service_ticks + cfg_.per_key_ticks * payload_keys(p);
  }
  Tick cost(const Timer&) const { return master_ ? 0 : cfg_.service_ticks; }

  void handle(const Envelope& env) {
    std::visit([&](const auto& m) { on(env.src, m); }, env.payload);
  }

  void on_timer(const Timer& t) {
    switch (t.kind) {
      case Timer::Kind::kStartSlot: start_slot(t.slot); break;
      case Timer::Kind::kHoldDone: {
        if (HostTxn* tx = find(t.tid); tx && tx->stage == Stage::kHolding) begin_prepare(*tx);
        break;
      }
      case Timer::Kind::kLockTimeout: lock_timeout(t); break;
    }
  }

  // results
  std::vector<TxnRecord> records;
  std::uint64_t programs_done = 0;
  std::uint64_t gave_up = 0;
  std::uint64_t background = 0;
  Value money_delta = 0;
  Tick last_done = 0;

 private:
  // ------------------------------------------------------------ helpers
  HostTxn* find(Tid tid) {
    auto it = by_tid_.find(tid);
    if (it == by_tid_.end()) return nullptr;
    return slots_[it->second].txn.get();
  }

  void request(HostTxn& tx, NodeId dst, Payload p, std::uint32_t* bucket = nullptr) {
    if (dst != id_) {
      ++tx.rec.messages;
      if (bucket) ++*bucket;
    }
    net_->send(id_, dst, std::move(p));
  }

  void reply(NodeId dst, Payload p) { net_->send(id_, dst, std::move(p)); }

  std::vector<Tid> invisible_of(const HostTxn& tx) const {
    auto inv = table_.writers_of(tx.ctx.tid);
    inv.insert(inv.end(), tx.skipped.begin(), tx.skipped.end());
    std::sort(inv.begin(), inv.end());
    inv.erase(std::unique(inv.begin(), inv.end()), inv.end());
    return inv;
  }

  bool sees_invisible(const HostTxn& tx) const {
    for (Tid t : invisible_of(tx)) {
      if (tx.seen.contains(t)) return true;
    }
    return false;
  }

  // ------------------------------------------------------ slot lifecycle
  void start_slot(std::uint32_t s) {
    Slot& slot = slots_[s];
    if (slot.txn) return;
    if (!slot.program) {
      if (queue_.empty()) return;
      slot.program = std::move(queue_.front());
      queue_.pop_front();
      slot.attempt = 0;
      slot.pin = kInfinity;
    }
    const Tick now = net_->now();
    if (slot.program->start_at > now) {
      net_->schedule(id_, slot.program->start_at - now, Timer{Timer::Kind::kStartSlot, s, {}, 0});
      return;
    }
    start_attempt(s);
  }

  void start_attempt(std::uint32_t s) {
    Slot& slot = slots_[s];
    auto tx = std::make_unique<HostTxn>();
    const Tid tid = slot.session.next_tid();
    TxnCtx proto = begin(level_, id_, tid);
    tx->ctx = slot.pin == kInfinity ? proto : retry_with_pinned_upper(proto, tid, slot.pin);
    slot.pin = kInfinity;
    tx->rec.program_id = slot.program->id;
    tx->rec.tid = tid;
    tx->rec.host = id_;
    tx->rec.attempt = slot.attempt;
    by_tid_[tid] = s;
    slot.txn = std::move(tx);
    HostTxn& t = *slot.txn;
    if (level_ == Level::kCentralSI) {
      t.stage = Stage::kBegin;
      t.coord_open = true;
      request(t, master_id(), CoordBeginReq{tid}, &t.rec.coordinator_messages);
      return;
    }
    issue_reads(t);
  }

  NodeId master_id() const { return cfg_.nodes; }

  const Program& program_of(const HostTxn& tx) const {
    return *slots_[by_tid_.at(tx.ctx.tid)].program;
  }

  // --------------------------------------------------------------- reads
  void issue_reads(HostTxn& tx) {
    tx.stage = Stage::kReading;
    std::map<NodeId, std::vector<Key>> by_node;
    for (Key k : program_of(tx).reads) {
      auto& v = by_node[part_.node_of(k)];
      if (std::find(v.begin(), v.end(), k) == v.end()) v.push_back(k);
    }
    if (by_node.empty()) {
      after_reads(tx);
      return;
    }
    const auto invisible = invisible_of(tx);
    tx.waiting = static_cast<std::uint32_t>(by_node.size());
    for (auto& [node, keys] : by_node) {
      tx.touched.insert(node);
      ReadReq req;
      req.tid = tx.ctx.tid;
      req.level = level_;
      req.keys = std::move(keys);
      req.view = ReadView::of(tx.ctx, invisible);
      req.central = CentralView{tx.ctx.tid, tx.central.start_ts, tx.central.snapshot};
      request(tx, node, std::move(req));
    }
  }

  void on(NodeId src, const ReadReq& req) {
    ParkedRead pr{src, req, {}};
    serve_read(pr);
  }

  // Returns false if the read parked on a pending version.
  bool serve_read(ParkedRead& pr) {
    ReadReq& req = pr.req;
    while (pr.done.size() < req.keys.size()) {
      const Key key = req.keys[pr.done.size()];
      ReadResult r;
      switch (req.level) {
        case Level::kCentralSI: r = central_read(store_, req.central, key); break;
        case Level::kOptimal: r = optimal_read(store_, key); break;
        default: r = store_.read_visible(req.view, key); break;
      }
      if (r.status == ReadStatus::kWait) {
        parked_reads_[key].push_back(std::move(pr));
        return false;
      }
      if (r.status == ReadStatus::kOk && history_) history_->read(req.tid, key, r.version_seq, id_);
      const bool stop = r.status != ReadStatus::kOk;
      pr.done.push_back({key, std::move(r)});
      if (stop) break;
    }
    reply(pr.src, ReadResp{req.tid, std::move(pr.done), std::move(req.view)});
    return true;
  }

  void on(NodeId, const ReadResp& resp) {
    HostTxn* tx = find(resp.tid);
    if (!tx || tx->stage != Stage::kReading) return;
    for (const auto& e : resp.entries) {
      switch (e.result.status) {
        case ReadStatus::kOk:
          tx->values[e.key] = e.result.value;
          tx->read_from[e.key] = {e.result.version_seq, e.result.creator};
          if (!e.result.creator.is_loader()) tx->seen.insert(e.result.creator);
          break;
        case ReadStatus::kNoVisibleVersion:
          fail(*tx, AbortReason::kNoVisibleVersion);
          break;
        case ReadStatus::kMustAbort:
          fail(*tx, AbortReason::kBoundViolation);
          break;
        case ReadStatus::kWait:
          break;
      }
      tx->skipped.insert(e.result.pending_skipped.begin(), e.result.pending_skipped.end());
      // A version read under the pinned bound still counts toward the next pin.
      tx->ctx.max_cid_seen = std::max(tx->ctx.max_cid_seen, e.result.cid);
    }
    if (is_vicc(level_)) resp.view.merge_into(tx->ctx);
    if (--tx->waiting == 0) after_reads(*tx);
  }

  void fail(HostTxn& tx, AbortReason r) {
    if (!tx.failed) {
      tx.failed = true;
      tx.reason = r;
    }
  }

  bool bound_ok(const HostTxn& tx) const {
    const Bound* b = tx.ctx.visibility_bound();
    return !b || check_bound(*b) == BoundCheck::kOk;
  }

  void after_reads(HostTxn& tx) {
    if (tx.failed) return abort(tx, tx.reason);
    if (is_vicc(level_)) {
      if (sees_invisible(tx)) return abort(tx, AbortReason::kNoVisibleVersion);
      if (!bound_ok(tx)) return abort(tx, AbortReason::kBoundViolation);
    }
    const Program& p = program_of(tx);
    if (p.writes) {
      for (const auto& [k, v] : p.writes(tx.values)) txn_write(tx.ctx, k, v);
    }
    if (p.hold_ticks > 0) {
      tx.stage = Stage::kHolding;
      net_->schedule(id_, p.hold_ticks, Timer{Timer::Kind::kHoldDone, 0, tx.ctx.tid, 0});
      return;
    }
    begin_prepare(tx);
  }

  // ------------------------------------------------------------- prepare
  void begin_prepare(HostTxn& tx) {
    if (is_vicc(level_)) {
      if (sees_invisible(tx)) return abort(tx, AbortReason::kNoVisibleVersion);
      if (!bound_ok(tx)) return abort(tx, AbortReason::kBoundViolation);
    }
    tx.stage = Stage::kPreparing;
    advance_phase(tx.ctx, Phase::kPreparing);
    std::map<NodeId, PrepareSpec> specs;
    const auto invisible = invisible_of(tx);
    auto spec_for = [&](NodeId n) -> PrepareSpec& {
      auto [it, fresh] = specs.try_emplace(n);
      if (fresh) {
        it->second.tid = tx.ctx.tid;
        it->second.level = level_;
        it->second.invisible = invisible;
        it->second.start_ts = tx.central.start_ts;
      }
      return it->second;
    };
    for (const auto& [k, v] : tx.ctx.write_set) {
      const NodeId n = part_.node_of(k);
      spec_for(n).writes.emplace_back(k, v);
      tx.writes_by_node[n].push_back(k);
    }
    for (const auto& [k, from] : tx.read_from) spec_for(part_.node_of(k)).reads.emplace_back(k, from.first);
    if (specs.empty()) return decide(tx);
    tx.waiting = static_cast<std::uint32_t>(specs.size());
    for (auto& [n, spec] : specs) {
      tx.participants.insert(n);
      tx.touched.insert(n);
      request(tx, n, PrepareReq{std::move(spec)});
    }
  }

  void on(NodeId src, const PrepareReq& req) {
    const Tid tid = req.spec.tid;
    auto [it, fresh] = prepares_.try_emplace(tid, ActivePrepare{src, PrepareTask(req.spec), 0, false});
    if (!fresh) return;
    drive_prepare(tid);
  }

  void drive_prepare(Tid tid) {
    auto it = prepares_.find(tid);
    if (it == prepares_.end()) return;
    ActivePrepare& ap = it->second;
    ap.waiting = false;
    switch (ap.task.advance(store_)) {
      case PrepareTask::Step::kWaiting: {
        const Key key = ap.task.waiting_key();
        ap.waiting = true;
        ++ap.epoch;
        lock_waiters_[key].push_back(tid);
        net_->schedule(id_, cfg_.lock_timeout_ticks, Timer{Timer::Kind::kLockTimeout, ap.epoch, tid, key});
        return;
      }
      case PrepareTask::Step::kFailed: {
        const NodeId src = ap.src;
        PrepareResult res = ap.task.result();
        const auto keys = ap.task.written_keys();
        prepares_.erase(it);
        reply(src, PrepareResp{tid, std::move(res)});
        wake(keys);
        return;
      }
      case PrepareTask::Step::kDone: {
        const NodeId src = ap.src;
        PrepareResult res = ap.task.result();
        prepares_.erase(it);
        reply(src, PrepareResp{tid, std::move(res)});
        return;
      }
    }
  }

  void lock_timeout(const Timer& t) {
    auto it = prepares_.find(t.tid);
    if (it == prepares_.end() || !it->second.waiting || it->second.epoch != t.slot) return;
    ActivePrepare& ap = it->second;
    std::erase(lock_waiters_[t.key], t.tid);
    ap.task.abandon(store_, AbortReason::kLockTimeout);
    const NodeId src = ap.src;
    PrepareResult res = ap.task.result();
    const auto keys = ap.task.written_keys();
    prepares_.erase(it);
    reply(src, PrepareResp{t.tid, std::move(res)});
    wake(keys);
  }

  // Lock releases and publications may unblock waiting prepares and reads.
  void wake(const std::vector<Key>& keys) {
    for (Key k : keys) {
      if (auto w = lock_waiters_.find(k); w != lock_waiters_.end()) {
        auto waiters = std::move(w->second);
        lock_waiters_.erase(w);
        for (Tid t : waiters) drive_prepare(t);
      }
      if (auto r = parked_reads_.find(k); r != parked_reads_.end()) {
        auto parked = std::move(r->second);
        parked_reads_.erase(r);
        for (auto& pr : parked) serve_read(pr);
      }
    }
  }

  void on(NodeId, const PrepareResp& resp) {
    HostTxn* tx = find(resp.tid);
    if (!tx || tx->stage != Stage::kPreparing) return;
    const auto& r = resp.result;
    if (!r.ok) {
      fail(*tx, r.reason);
    } else {
      tx->overwritten.insert(tx->overwritten.end(), r.overwritten.begin(), r.overwritten.end());
      tx->sids.insert(tx->sids.end(), r.read_sids.begin(), r.read_sids.end());
      for (const auto& v : r.incoming) {
        auto& lo = tx->incoming[v.tid];
        lo = std::max(lo, v.lower_at_read);
      }
    }
    if (--tx->waiting == 0) decide(*tx);
  }

  // -------------------------------------------------------------- decide
  void decide(HostTxn& tx) {
    if (tx.failed) return abort(tx, tx.reason);
    TxnCtx& ctx = tx.ctx;
    for (const auto& o : tx.overwritten) {
      if (!o.creator.is_loader()) tx.seen.insert(o.creator);
      tx.sids.push_back(o.sid);
      ctx.max_cid_seen = std::max(ctx.max_cid_seen, o.cid);
      if (level_ == Level::kPostSI) {
        ctx.start_bound = tighten_lower(ctx.start_bound, o.cid);
        ctx.commit_lower = std::max(ctx.commit_lower, o.cid);
      } else if (level_ == Level::kSV) {
        ctx.order_bound = tighten_lower(ctx.order_bound, o.cid);
      }
    }
    switch (level_) {
      case Level::kCentralSI:
        tx.stage = Stage::kEnding;
        tx.coord_open = false;
        request(tx, master_id(), CoordEndReq{ctx.tid, true}, &tx.rec.coordinator_messages);
        return;
      case Level::kOptimal:
        return commit(tx);
      default:
        break;
    }
    if (sees_invisible(tx)) return abort(tx, AbortReason::kNoVisibleVersion);

    std::vector<Timestamp> lowers;
    std::vector<Tid> incoming;
    for (const auto& [r, lo] : tx.incoming) {
      incoming.push_back(r);
      lowers.push_back(lo);
    }
    CommitStamp stamp;
    if (level_ == Level::kPostSI) {
      auto s = decide_stamp_postsi(ctx, tx.sids, lowers);
      if (!s) return abort(tx, AbortReason::kBoundViolation);
      stamp = *s;
    } else if (level_ == Level::kSV) {
      auto s = decide_stamp_sv(ctx, tx.sids, lowers);
      if (!s) return abort(tx, AbortReason::kBoundViolation);
      stamp = *s;
    } else {
      ctx.decided = stamp;
    }
    tx.stamp = stamp;
    for (Tid r : incoming) table_.record(r, ctx.tid);
    std::vector<Tid> outgoing(tx.skipped.begin(), tx.skipped.end());
    const auto updates = broadcast_conflict_bounds(ctx, stamp, incoming, outgoing);
    if (updates.empty()) return commit(tx);
    tx.stage = Stage::kPushing;
    tx.rec.round2 = true;
    tx.waiting = static_cast<std::uint32_t>(updates.size());
    for (const auto& u : updates) request(tx, host_of(u.target), BoundUpdateReq{u}, &tx.rec.round2_messages);
  }

  void on(NodeId src, const BoundUpdateReq& req) {
    const BoundUpdate& u = req.update;
    BoundReply rep{u, BoundReply::Status::kApplied, {}};
    HostTxn* tx = find(u.target);
    if (tx && tx->stage != Stage::kDone) {
      if (tx->ctx.decided) {
        rep.status = BoundReply::Status::kDecided;
        rep.target_stamp = *tx->ctx.decided;
      } else {
        apply_bound_update(tx->ctx, u);
        if (u.kind == BoundUpdate::Kind::kReaderUpper) table_.record(u.target, u.source);
      }
    } else {
      const auto st = store_.status().lookup(u.target);
      if (st.state == StatusCache::State::kCommitted) {
        rep.status = BoundReply::Status::kDecided;
        rep.target_stamp = st.stamp;
      } else if (st.state == StatusCache::State::kAborted) {
        rep.status = BoundReply::Status::kAborted;
      } else {
        rep.status = BoundReply::Status::kUnknown;
      }
    }
    reply(src, rep);
  }

  void on(NodeId, const BoundReply& rep) {
    HostTxn* tx = find(rep.update.source);
    if (!tx || tx->stage != Stage::kPushing) return;
    if (rep.status == BoundReply::Status::kDecided && !satisfied_by_decided(rep.update, rep.target_stamp)) {
      fail(*tx, AbortReason::kBoundViolation);
    } else if (rep.status == BoundReply::Status::kUnknown && level_ != Level::kCV) {
      fail(*tx, AbortReason::kBoundViolation);
    }
    if (--tx->waiting == 0) {
      if (tx->failed) return abort(*tx, tx->reason);
      commit(*tx);
    }
  }

  // ------------------------------------------------------- coordinator
  void on(NodeId src, const CoordBeginReq& req) {
    reply(src, CoordBeginResp{req.tid, coord_.begin(req.tid)});
  }

  void on(NodeId src, const CoordEndReq& req) {
    reply(src, CoordEndResp{req.tid, coord_.end(req.tid)});
  }

  void on(NodeId, const CoordBeginResp& resp) {
    HostTxn* tx = find(resp.tid);
    if (!tx || tx->stage != Stage::kBegin) return;
    tx->central = resp.begin;
    issue_reads(*tx);
  }

  void on(NodeId, const CoordEndResp& resp) {
    HostTxn* tx = find(resp.tid);
    if (!tx || tx->stage != Stage::kEnding) return;
    tx->stamp = CommitStamp::interval(tx->central.start_ts, resp.commit_ts);
    commit(*tx);
  }

  // ------------------------------------------------------ commit / abort
  void on(NodeId, const CommitReq& req) {
    const std::optional<CommitStamp> stamp =
        req.has_stamp ? std::optional<CommitStamp>(req.stamp) : std::nullopt;
    store_.publish_commit(req.tid, stamp.value_or(CommitStamp{}), req.keys);
    if (history_) {
      for (Key k : req.keys) {
        const Item& it = store_.item(k);
        for (std::size_t i = it.chain.size(); i-- > 0;) {
          if (it.chain[i].creator == req.tid) {
            history_->write(req.tid, k, static_cast<std::uint32_t>(i), id_);
            break;
          }
        }
      }
    }
    wake(req.keys);
  }

  void on(NodeId, const AbortReq& req) {
    if (auto it = prepares_.find(req.tid); it != prepares_.end()) {
      if (it->second.waiting) std::erase(lock_waiters_[it->second.task.waiting_key()], req.tid);
      prepares_.erase(it);
    }
    store_.rollback(req.tid, req.keys);
    wake(req.keys);
  }

  void on(NodeId, const Watermark& w) {
    for (const auto& [session, seq] : w.sessions) store_.status().advance_watermark(session, seq);
  }

  void commit(HostTxn& tx) {
    advance_phase(tx.ctx, Phase::kCommitted);
    tx.stage = Stage::kDone;
    const bool stamped = level_ == Level::kPostSI || level_ == Level::kSV || level_ == Level::kCentralSI;
    const CommitStamp stamp = tx.stamp.value_or(CommitStamp{});
    if (history_) history_->commit(tx.ctx.tid, stamped ? std::optional(stamp) : std::nullopt, id_);
    for (NodeId n : tx.participants) {
      CommitReq req{tx.ctx.tid, stamp, stamped, {}};
      if (auto it = tx.writes_by_node.find(n); it != tx.writes_by_node.end()) req.keys = it->second;
      request(tx, n, std::move(req));
    }
    store_.status().record_commit(tx.ctx.tid, stamp);
    tx.rec.committed = true;
    tx.rec.stamp = stamped ? std::optional(stamp) : std::nullopt;
    finish(tx, true);
  }

  void abort(HostTxn& tx, AbortReason reason) {
    advance_phase(tx.ctx, Phase::kAborted);
    tx.stage = Stage::kDone;
    if (history_) history_->abort(tx.ctx.tid, id_);
    if (tx.coord_open) {
      tx.coord_open = false;
      request(tx, master_id(), CoordEndReq{tx.ctx.tid, false}, &tx.rec.coordinator_messages);
    }
    for (NodeId n : tx.touched) {
      AbortReq req{tx.ctx.tid, {}};
      if (auto it = tx.writes_by_node.find(n); it != tx.writes_by_node.end()) req.keys = it->second;
      request(tx, n, std::move(req));
    }
    store_.status().record_abort(tx.ctx.tid);
    tx.rec.committed = false;
    tx.rec.reason = reason;
    finish(tx, false);
  }

  void finish(HostTxn& tx, bool committed) {
    const Tid tid = tx.ctx.tid;
    const std::uint32_t s = by_tid_.at(tid);
    Slot& slot = slots_[s];
    table_.purge(tid);
    tx.rec.remote_nodes = static_cast<std::uint32_t>(
        std::count_if(tx.touched.begin(), tx.touched.end(), [&](NodeId n) { return n != id_; }));
    records.push_back(tx.rec);

    Tick delay = 0;
    if (committed) {
      money_delta += slot.program->money_delta;
      slot.program.reset();
      done_program();
    } else if (++slot.attempt > cfg_.max_retries) {
      ++gave_up;
      slot.program.reset();
      done_program();
    } else {
      if (tx.rec.reason == AbortReason::kBoundViolation && tx.ctx.visibility_bound()) {
        slot.pin = tx.ctx.max_cid_seen;
      }
      const Tick span = std::max<Tick>(1, cfg_.backoff_ticks * slot.attempt);
      delay = 1 + rng_() % span;
    }
    by_tid_.erase(tid);
    slot.txn.reset();

    if (++terminated_ % std::max<std::uint32_t>(1, cfg_.watermark_interval) == 0) broadcast_watermark();
    net_->schedule(id_, delay, Timer{Timer::Kind::kStartSlot, s, {}, 0});
  }

  void done_program() {
    ++programs_done;
    last_done = net_->now();
    net_->program_done();
  }

  void broadcast_watermark() {
    Watermark w;
    for (const auto& slot : slots_) {
      const auto seq = slot.txn ? slot.txn->ctx.tid.seq() - 1 : slot.session.counter();
      w.sessions.emplace_back(slot.session.id(), seq);
    }
    on(id_, w);
    for (NodeId n = 0; n < cfg_.nodes; ++n) {
      if (n == id_) continue;
      ++background;
      net_->send(id_, n, w);
    }
  }

  NodeId id_;
  const ClusterConfig& cfg_;
  Level level_;
  const Partitioner& part_;
  bool master_;
  Store store_;
  AntiDepTable table_;
  Coordinator coord_;
  std::mt19937_64 rng_;
  Transport* net_ = nullptr;
  HistorySink* history_ = nullptr;

  std::deque<Program> queue_;
  std::vector<Slot> slots_;
  std::unordered_map<Tid, std::uint32_t> by_tid_;
  std::unordered_map<Tid, ActivePrepare> prepares_;
  std::map<Key, std::vector<Tid>> lock_waiters_;
  std::map<Key, std::vector<ParkedRead>> parked_reads_;
  std::uint64_t terminated_ = 0;
};

// -------------------------------------------------------- sim transport

namespace {

class SimTransport final : public Transport {
 public:
  SimTransport(const ClusterConfig& cfg, std::vector<std::unique_ptr<Node>>& nodes)
      : cfg_(cfg), nodes_(nodes), busy_(nodes.size(), 0), rng_(cfg.seed) {}

  void send(NodeId src, NodeId dst, Payload payload) override {
    Tick at = depart_;
    if (src != dst) {
      at += cfg_.latency_ticks;
      if (cfg_.jitter_ticks > 0) at += rng_() % (cfg_.jitter_ticks + 1);
      auto& last = last_arrival_[{src, dst}];
      at = std::max(at, last);
      last = at;
    }
    push(at, dst, Envelope{src, dst, seq_, std::move(payload)});
  }

  void schedule(NodeId node, Tick delay, Timer timer) override { push(depart_ + delay, node, timer); }

  Tick now() const override { return now_; }
  void program_done() override { ++done_; }

  Tick run() {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      if (busy_[ev.node] > ev.time) {
        ev.time = busy_[ev.node];
        queue_.push(std::move(ev));
        continue;
      }
      now_ = ev.time;
      Node& node = *nodes_[ev.node];
      const Tick cost = std::visit(
          [&](const auto& w) {
            if constexpr (std::is_same_v<std::decay_t<decltype(w)>, Envelope>) return node.cost(w.payload);
            else return node.cost(w);
          },
          ev.what);
      depart_ = now_ + cost;
      busy_[ev.node] = depart_;
      std::visit(
          [&](const auto& w) {
            if constexpr (std::is_same_v<std::decay_t<decltype(w)>, Envelope>) node.handle(w);
            else node.on_timer(w);
          },
          ev.what);
    }
    return now_;
  }

 private:
  struct Event {
    Tick time;
    std::uint64_t seq;
    NodeId node;
    std::variant<Envelope, Timer> what;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
  };

  void push(Tick at, NodeId node, std::variant<Envelope, Timer> what) {
    queue_.push(Event{at, seq_++, node, std::move(what)});
  }

  const ClusterConfig& cfg_;
  std::vector<std::unique_ptr<Node>>& nodes_;
  std::vector<Tick> busy_;
  std::map<std::pair<NodeId, NodeId>, Tick> last_arrival_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::mt19937_64 rng_;
  std::uint64_t seq_ = 0;
  Tick now_ = 0;
  Tick depart_ = 0;
  std::uint64_t done_ = 0;
};

// ------------------------------------------------- concurrent transport

class ConcurrentTransport final : public Transport {
 public:
  using Clock = std::chrono::steady_clock;

  ConcurrentTransport(const ClusterConfig& cfg, std::vector<std::unique_ptr<Node>>& nodes,
                      std::uint64_t programs)
      : cfg_(cfg), nodes_(nodes), boxes_(nodes.size()), remaining_(programs) {}

  void send(NodeId src, NodeId dst, Payload payload) override {
    const Tick at = now() + (src == dst ? 0 : cfg_.latency_ticks);
    post(dst, at, Envelope{src, dst, 0, std::move(payload)});
  }

  void schedule(NodeId node, Tick delay, Timer timer) override { post(node, now() + delay, timer); }

  Tick now() const override {
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0_).count();
    return static_cast<Tick>(ns) / cfg_.tick_ns;
  }

  void program_done() override {
    if (remaining_.fetch_sub(1) == 1) maybe_stop();
  }

  double run() {
    t0_ = Clock::now();
    if (remaining_.load() == 0) stop_all();
    std::vector<std::thread> threads;
    for (NodeId n = 0; n < nodes_.size(); ++n) threads.emplace_back([this, n] { loop(n); });
    for (auto& t : threads) t.join();
    return std::chrono::duration<double>(finished_at_ - t0_).count();
  }

  // Seed work before the threads start.
  void preload(NodeId node, Timer timer) { post(node, 0, timer); }

 private:
  struct Item {
    Tick due;
    std::uint64_t seq;
    std::variant<Envelope, Timer> what;
    bool operator>(const Item& o) const { return due != o.due ? due > o.due : seq > o.seq; }
  };
  struct Box {
    std::mutex mu;
    std::condition_variable cv;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  };

  Clock::time_point at(Tick t) const { return t0_ + std::chrono::nanoseconds(t * cfg_.tick_ns); }

  void post(NodeId node, Tick due, std::variant<Envelope, Timer> what) {
    in_flight_.fetch_add(1);
    Box& b = boxes_[node];
    {
      std::lock_guard lk(b.mu);
      b.q.push(Item{due, seq_.fetch_add(1), std::move(what)});
    }
    b.cv.notify_one();
  }

  void loop(NodeId n) {
    Box& b = boxes_[n];
    Node& node = *nodes_[n];
    for (;;) {
      Item item;
      {
        std::unique_lock lk(b.mu);
        for (;;) {
          if (stop_.load()) return;
          if (!b.q.empty()) {
            const Tick due = b.q.top().due;
            if (due <= now()) break;
            b.cv.wait_until(lk, at(due));
          } else {
            b.cv.wait(lk);
          }
        }
        item = b.q.top();
        b.q.pop();
      }
      const auto start = Clock::now();
      Tick cost = 0;
      if (auto* env = std::get_if<Envelope>(&item.what)) {
        cost = node.cost(env->payload);
        node.handle(*env);
      } else {
        const auto& timer = std::get<Timer>(item.what);
        cost = node.cost(timer);
        node.on_timer(timer);
      }
      if (cost > 0) std::this_thread::sleep_until(start + std::chrono::nanoseconds(cost * cfg_.tick_ns));
      if (in_flight_.fetch_sub(1) == 1) maybe_stop();
    }
  }

  void maybe_stop() {
    if (remaining_.load() == 0 && in_flight_.load() == 0) stop_all();
  }

  void stop_all() {
    std::call_once(stopped_, [&] {
      finished_at_ = Clock::now();
      stop_.store(true);
      for (auto& b : boxes_) {
        std::lock_guard lk(b.mu);
        b.cv.notify_all();
      }
    });
  }

  const ClusterConfig& cfg_;
  std::vector<std::unique_ptr<Node>>& nodes_;
  std::vector<Box> boxes_;
  std::atomic<std::uint64_t> remaining_;
  std::atomic<std::uint64_t> in_flight_{0};
  std::atomic<std::uint64_t> seq_{0};
  std::atomic<bool> stop_{false};
  std::once_flag stopped_;
  Clock::time_point t0_;
  Clock::time_point finished_at_;
};

}  // namespace

// --------------------------------------------------------------- cluster

Cluster::Cluster(ClusterConfig cfg, Level level) : cfg_(cfg), level_(level), part_(cfg.nodes) {
  if (cfg_.nodes == 0 || cfg_.workers_per_node == 0 || cfg_.workers_per_node > 1024) {
    throw std::invalid_argument("cluster needs nodes > 0 and 1..1024 workers per node");
  }
  for (NodeId n = 0; n < cfg_.nodes; ++n) {
    nodes_.push_back(std::make_unique<Node>(n, cfg_, level_, part_, false));
  }
  nodes_.push_back(std::make_unique<Node>(cfg_.nodes, cfg_, level_, part_, true));
}

Cluster::~Cluster() = default;

void Cluster::load(Key key, Value value) { nodes_[part_.node_of(key)]->store().load(key, value); }

void Cluster::submit(Program program) {
  if (program.host >= cfg_.nodes) throw std::invalid_argument("program host out of range");
  ++programs_;
  nodes_[program.host]->queue().push_back(std::move(program));
}

const Store& Cluster::store(NodeId node) const { return nodes_.at(node)->store(); }
const AntiDepTable& Cluster::table(NodeId node) const { return nodes_.at(node)->table(); }

Value Cluster::total_value() const {
  Value total = 0;
  for (NodeId n = 0; n < cfg_.nodes; ++n) total += nodes_[n]->store().total_published();
  return total;
}

RunResult Cluster::run(HistorySink* history) {
  for (auto& n : nodes_) {
    n->records.clear();
    n->programs_done = 0;
    n->gave_up = 0;
    n->background = 0;
    n->money_delta = 0;
    n->last_done = 0;
  }
  const std::uint64_t programs = programs_;
  programs_ = 0;

  RunResult res;
  res.programs = programs;
  if (cfg_.transport == TransportKind::kSim) {
    SimTransport net(cfg_, nodes_);
    for (auto& n : nodes_) n->bind(&net, history);
    for (NodeId id = 0; id < cfg_.nodes; ++id) {
      for (std::uint32_t s = 0; s < nodes_[id]->slot_count(); ++s) {
        net.schedule(id, 0, Timer{Timer::Kind::kStartSlot, s, {}, 0});
      }
    }
    net.run();
  } else {
    ConcurrentTransport net(cfg_, nodes_, programs);
    for (auto& n : nodes_) n->bind(&net, history);
    for (NodeId id = 0; id < cfg_.nodes; ++id) {
      for (std::uint32_t s = 0; s < nodes_[id]->slot_count(); ++s) {
        net.preload(id, Timer{Timer::Kind::kStartSlot, s, {}, 0});
      }
    }
    res.elapsed_seconds = net.run();
  }

  std::uint64_t done = 0;
  for (auto& n : nodes_) {
    n->bind(nullptr, nullptr);
    done += n->programs_done;
    res.gave_up += n->gave_up;
    res.background_messages += n->background;
    res.committed_money_delta += n->money_delta;
    res.elapsed_ticks = std::max(res.elapsed_ticks, n->last_done);
    res.evicted_lookups += n->store().status().evicted_lookups();
    for (const auto& r : n->records) {
      res.messages += r.messages;
      if (r.committed) {
        ++res.committed;
      } else {
        ++res.aborted;
        ++res.abort_reasons[r.reason];
      }
    }
    res.records.insert(res.records.end(), n->records.begin(), n->records.end());
  }
  if (done != programs) {
    throw std::runtime_error("run stalled: " + std::to_string(programs - done) + " programs unfinished");
  }
  std::sort(res.records.begin(), res.records.end(), [](const TxnRecord& a, const TxnRecord& b) {
    return a.program_id != b.program_id ? a.program_id < b.program_id : a.attempt < b.attempt;
  });
  return res;
}

}  // namespace vicc
