#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vicc/antidep.hpp"
#include "vicc/core.hpp"
#include "vicc/history.hpp"
#include "vicc/messages.hpp"
#include "vicc/mvstore.hpp"

namespace vicc {

enum class TransportKind { kSim, kConcurrent };

struct ClusterConfig {
  std::uint32_t nodes = 4;
  std::uint32_t workers_per_node = 8;
  TransportKind transport = TransportKind::kSim;
  Tick latency_ticks = 10;
  Tick jitter_ticks = 2;
  std::uint64_t seed = 1;
  std::uint32_t watermark_interval = 64;
  Tick lock_timeout_ticks = 200;
  // Simulated work per handled event, plus per key carried.
  Tick service_ticks = 2;
  Tick per_key_ticks = 1;
  // Per request on the central SI coordinator.
  Tick coord_service_ticks = 2;
  std::uint32_t max_retries = 16;
  Tick backoff_ticks = 20;
  std::size_t status_capacity = std::size_t{1} << 20;
  // Concurrent mode: wall-clock length of one tick.
  std::uint64_t tick_ns = 1000;
};

/// key=value lines, '#' comments. Unknown keys are an error.
ClusterConfig parse_config(const std::string& text, ClusterConfig base = {});
ClusterConfig load_config(const std::string& path, ClusterConfig base = {});

/// High 32 bits of a key name its partition group (a customer, a warehouse,
/// a block of micro keys); groups are spread over nodes by hashing.
class Partitioner {
 public:
  explicit Partitioner(std::uint32_t nodes) : nodes_(nodes) {}

  static constexpr Key make_key(std::uint32_t group, std::uint32_t index) {
    return (Key{group} << 32) | index;
  }
  static std::uint64_t mix(std::uint64_t x);

  NodeId node_of(Key key) const { return static_cast<NodeId>(mix(key >> 32) % nodes_); }
  /// The `i`-th group (counting from zero) that lands on `node`.
  std::uint32_t group_on(NodeId node, std::uint32_t i) const;
  std::uint32_t nodes() const { return nodes_; }

 private:
  std::uint32_t nodes_;
  mutable std::vector<std::vector<std::uint32_t>> cache_;
};

using ReadSet = std::map<Key, Value>;
using WriteFn = std::function<std::vector<std::pair<Key, Value>>(const ReadSet&)>;

/// Transaction logic: one batch of reads, then writes computed from what was
/// read. Retries rerun the same program.
struct Program {
  std::uint64_t id = 0;
  NodeId host = 0;
  std::vector<Key> reads;
  WriteFn writes;
  // Net money created if this commits, for the SmallBank audit.
  Value money_delta = 0;
  Tick start_at = 0;
  // Pause between the reads and the commit.
  Tick hold_ticks = 0;
  bool distributed = false;
  std::string profile;
};

struct TxnRecord {
  std::uint64_t program_id = 0;
  Tid tid;
  NodeId host = 0;
  std::uint32_t attempt = 0;
  bool committed = false;
  AbortReason reason = AbortReason::kWriteConflict;
  std::optional<CommitStamp> stamp;
  // Cross-node request exchanges issued for this attempt.
  std::uint32_t messages = 0;
  std::uint32_t coordinator_messages = 0;
  std::uint32_t round2_messages = 0;
  std::uint32_t remote_nodes = 0;
  bool round2 = false;
};

struct RunResult {
  std::vector<TxnRecord> records;  // sorted by (program, attempt)
  std::uint64_t programs = 0;
  std::uint64_t committed = 0;
  std::uint64_t aborted = 0;  // aborted attempts
  std::uint64_t gave_up = 0;  // programs that exhausted their retries
  std::uint64_t messages = 0;
  std::uint64_t background_messages = 0;
  std::map<AbortReason, std::uint64_t> abort_reasons;
  Value committed_money_delta = 0;
  // Simulated ticks, or elapsed ticks of wall time in concurrent mode.
  Tick elapsed_ticks = 0;
  double elapsed_seconds = 0;
  std::uint64_t evicted_lookups = 0;

  std::uint64_t attempts() const { return committed + aborted; }
  double abort_rate() const;
  double messages_per_txn() const;
  /// Committed transactions per second of simulated or wall time.
  double throughput(const ClusterConfig& cfg) const;
};

class Node;

/// A shared-nothing cluster of `nodes` data nodes plus, for central SI, a
/// master node hosting the coordinator.
class Cluster {
 public:
  Cluster(ClusterConfig cfg, Level level);
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  void load(Key key, Value value);
  void submit(Program program);
  /// Runs every submitted program to completion and drains in-flight
  /// messages. Can be called again after further submissions.
  RunResult run(HistorySink* history = nullptr);

  const ClusterConfig& config() const { return cfg_; }
  Level level() const { return level_; }
  const Partitioner& partitioner() const { return part_; }
  NodeId node_of(Key key) const { return part_.node_of(key); }
  const Store& store(NodeId node) const;
  const AntiDepTable& table(NodeId node) const;
  /// Sum of newest committed values over all nodes.
  Value total_value() const;
  NodeId master() const { return cfg_.nodes; }

 private:
  ClusterConfig cfg_;
  Level level_;
  Partitioner part_;
  std::vector<std::unique_ptr<Node>> nodes_;
  std::uint64_t programs_ = 0;
};

}  // namespace vicc
