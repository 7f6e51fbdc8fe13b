#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vicc/cluster.hpp"
#include "vicc/core.hpp"
#include "vicc/history.hpp"

namespace vicc {

enum class WorkloadKind { kSmallBank, kTpccLite, kMicro };

std::string_view to_string(WorkloadKind kind);
std::optional<WorkloadKind> parse_workload(std::string_view text);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kMicro;
  std::uint32_t nodes = 4;
  std::uint32_t workers_per_node = 8;
  double dist_frac = 0.2;
  std::uint32_t fanout_min = 2;
  std::uint32_t fanout_max = 3;
  std::uint32_t hot_keys_per_node = 20;
  double hot_frac = 0.0;
  std::uint32_t pad_reads = 0;
  // Keys (micro), customers (smallbank) or warehouses (tpcc-lite) per node.
  std::uint32_t scale = 0;
  std::uint64_t txns = 10000;
  std::uint64_t seed = 1;
  // micro: operations per transaction and the share that also write.
  std::uint32_t micro_ops = 4;
  double micro_write_frac = 0.5;
  // tpcc-lite: share of NewOrder in the NewOrder/Payment mix.
  double neworder_frac = 0.5;

  /// Throws std::invalid_argument on out-of-range knobs.
  void validate() const;
  std::uint32_t effective_scale() const;
};

struct Workload {
  std::vector<std::pair<Key, Value>> initial;
  std::vector<Program> programs;
  Value initial_total = 0;
};

/// Pure functions of (spec, seed).
Workload gen_micro(const WorkloadSpec& spec, const Partitioner& part);
Workload gen_smallbank(const WorkloadSpec& spec, const Partitioner& part);
Workload gen_tpcc_lite(const WorkloadSpec& spec, const Partitioner& part);
Workload generate(const WorkloadSpec& spec, const Partitioner& part);

struct RunReport {
  std::string scheduler;
  std::string workload;
  std::uint32_t nodes = 0;
  double dist_frac = 0;
  double hot_frac = 0;
  double throughput = 0;
  double abort_rate = 0;
  double msgs_per_txn = 0;
  std::uint64_t seed = 0;
};

struct Experiment {
  RunReport report;
  RunResult result;
  Value initial_total = 0;
  Value final_total = 0;
};

/// Builds a cluster from `cfg` (nodes, workers and seed taken from the spec),
/// loads the workload and runs it.
Experiment run_experiment(const WorkloadSpec& spec, Level level, ClusterConfig cfg = {},
                          HistorySink* history = nullptr);

inline constexpr const char* kCsvHeader =
    "scheduler,workload,nodes,dist_frac,hot_frac,throughput,abort_rate,msgs_per_txn,seed";

std::string csv_row(const RunReport& r);
void emit_csv(std::ostream& os, const std::vector<RunReport>& reports);
/// Throws std::runtime_error if the file cannot be written.
void emit_csv(const std::string& path, const std::vector<RunReport>& reports);

}  // namespace vicc
