#include "vicc/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>

namespace vicc {

std::string_view to_string(WorkloadKind kind) {
  switch (kind) {
    case WorkloadKind::kSmallBank: return "smallbank";
    case WorkloadKind::kTpccLite: return "tpcc-lite";
    case WorkloadKind::kMicro: return "micro";
  }
  return "?";
}

std::optional<WorkloadKind> parse_workload(std::string_view text) {
  for (auto k : {WorkloadKind::kSmallBank, WorkloadKind::kTpccLite, WorkloadKind::kMicro}) {
    if (to_string(k) == text) return k;
  }
  if (text == "tpcc_lite") return WorkloadKind::kTpccLite;
  return std::nullopt;
}

void WorkloadSpec::validate() const {
  auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac(dist_frac) || !frac(hot_frac) || !frac(micro_write_frac) || !frac(neworder_frac)) {
    throw std::invalid_argument("fractions must lie in [0, 1]");
  }
  if (fanout_min < 2 || fanout_max > 3 || fanout_min > fanout_max) {
    throw std::invalid_argument("fanout must be 2 or 3");
  }
  if (nodes == 0 || workers_per_node == 0) throw std::invalid_argument("nodes and workers must be positive");
  if (kind == WorkloadKind::kMicro && hot_keys_per_node >= effective_scale()) {
    throw std::invalid_argument("hot set must be smaller than the key space");
  }
}

std::uint32_t WorkloadSpec::effective_scale() const {
  if (scale != 0) return scale;
  switch (kind) {
    case WorkloadKind::kMicro: return 10000;
    case WorkloadKind::kSmallBank: return 10000;
    case WorkloadKind::kTpccLite: return 5;
  }
  return 1;
}

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

/// Nodes a transaction spans: the host, plus 1-2 others when distributed.
std::vector<NodeId> span_nodes(const WorkloadSpec& spec, Rng& rng, NodeId host, bool distributed) {
  std::vector<NodeId> nodes{host};
  if (!distributed || spec.nodes < 2) return nodes;
  std::uint32_t fanout = spec.fanout_min + static_cast<std::uint32_t>(rng.below(spec.fanout_max - spec.fanout_min + 1));
  fanout = std::min(fanout, spec.nodes);
  while (nodes.size() < fanout) {
    const auto n = static_cast<NodeId>(rng.below(spec.nodes));
    if (std::find(nodes.begin(), nodes.end(), n) == nodes.end()) nodes.push_back(n);
  }
  return nodes;
}

void add_unique(std::vector<Key>& keys, Key k) {
  if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
}

}  // namespace

// ----------------------------------------------------------------- micro

Workload gen_micro(const WorkloadSpec& spec, const Partitioner& part) {
  spec.validate();
  const std::uint32_t scale = spec.effective_scale();
  Workload w;
  std::vector<std::uint32_t> group(spec.nodes);
  for (NodeId n = 0; n < spec.nodes; ++n) {
    group[n] = part.group_on(n, 0);
    for (std::uint32_t i = 0; i < scale; ++i) w.initial.emplace_back(Partitioner::make_key(group[n], i), 0);
  }
  Rng rng(spec.seed);
  for (std::uint64_t id = 0; id < spec.txns; ++id) {
    const auto host = static_cast<NodeId>(rng.below(spec.nodes));
    const bool dist = rng.chance(spec.dist_frac);
    const auto nodes = span_nodes(spec, rng, host, dist);
    auto pick = [&](NodeId n, bool allow_hot) {
      std::uint32_t idx;
      if (allow_hot && spec.hot_keys_per_node > 0 && rng.chance(spec.hot_frac)) {
        idx = static_cast<std::uint32_t>(rng.below(spec.hot_keys_per_node));
      } else {
        idx = spec.hot_keys_per_node + static_cast<std::uint32_t>(rng.below(scale - spec.hot_keys_per_node));
      }
      return Partitioner::make_key(group[n], idx);
    };
    Program p;
    p.id = id;
    p.host = host;
    p.distributed = nodes.size() > 1;
    p.profile = "micro";
    std::vector<Key> updates;
    for (std::uint32_t op = 0; op < spec.micro_ops; ++op) {
      const NodeId n = op < nodes.size() ? nodes[op] : nodes[rng.below(nodes.size())];
      const Key k = pick(n, true);
      add_unique(p.reads, k);
      if (rng.chance(spec.micro_write_frac)) add_unique(updates, k);
    }
    for (std::uint32_t i = 0; i < spec.pad_reads; ++i) add_unique(p.reads, pick(nodes[rng.below(nodes.size())], false));
    p.writes = [updates](const ReadSet& rs) {
      std::vector<std::pair<Key, Value>> out;
      for (Key k : updates) out.emplace_back(k, rs.at(k) + 1);
      return out;
    };
    w.programs.push_back(std::move(p));
  }
  return w;
}

// ------------------------------------------------------------- smallbank

namespace {
constexpr Value kInitialBalance = 1000;
constexpr std::uint32_t kChecking = 0;
constexpr std::uint32_t kSavings = 1;
}  // namespace

Workload gen_smallbank(const WorkloadSpec& spec, const Partitioner& part) {
  spec.validate();
  const std::uint32_t customers = spec.effective_scale();
  const std::uint32_t hot = std::min(spec.hot_keys_per_node, customers);
  Workload w;
  std::vector<std::vector<std::uint32_t>> groups(spec.nodes);
  for (NodeId n = 0; n < spec.nodes; ++n) {
    for (std::uint32_t c = 0; c < customers; ++c) {
      const auto g = part.group_on(n, c);
      groups[n].push_back(g);
      w.initial.emplace_back(Partitioner::make_key(g, kChecking), kInitialBalance);
      w.initial.emplace_back(Partitioner::make_key(g, kSavings), kInitialBalance);
      w.initial_total += 2 * kInitialBalance;
    }
  }
  Rng rng(spec.seed);
  auto customer_on = [&](NodeId n) {
    const bool is_hot = hot > 0 && rng.chance(spec.hot_frac);
    const auto c = is_hot ? rng.below(hot) : rng.below(customers);
    return groups[n][c];
  };
  auto chk = [](std::uint32_t g) { return Partitioner::make_key(g, kChecking); };
  auto sav = [](std::uint32_t g) { return Partitioner::make_key(g, kSavings); };

  for (std::uint64_t id = 0; id < spec.txns; ++id) {
    const auto host = static_cast<NodeId>(rng.below(spec.nodes));
    const bool dist = rng.chance(spec.dist_frac);
    const auto nodes = span_nodes(spec, rng, host, dist);
    const auto c1 = customer_on(host);
    Program p;
    p.id = id;
    p.host = host;
    p.distributed = nodes.size() > 1;
    const auto profile = rng.below(5);
    switch (profile) {
      case 0:
        p.profile = "Balance";
        p.reads = {chk(c1), sav(c1)};
        break;
      case 1:
        p.profile = "DepositChecking";
        p.reads = {chk(c1)};
        p.writes = [k = chk(c1)](const ReadSet& rs) { return std::vector<std::pair<Key, Value>>{{k, rs.at(k) + 1}}; };
        p.money_delta = 1;
        break;
      case 2:
        p.profile = "TransactSavings";
        p.reads = {sav(c1)};
        p.writes = [k = sav(c1)](const ReadSet& rs) { return std::vector<std::pair<Key, Value>>{{k, rs.at(k) + 1}}; };
        p.money_delta = 1;
        break;
      case 3: {
        p.profile = "Amalgamate";
        std::uint32_t c2 = c1;
        while (c2 == c1) c2 = customer_on(nodes.size() > 1 ? nodes[1] : host);
        p.reads = {chk(c1), sav(c1), chk(c2)};
        p.writes = [a = chk(c1), b = sav(c1), d = chk(c2)](const ReadSet& rs) {
          return std::vector<std::pair<Key, Value>>{{a, 0}, {b, 0}, {d, rs.at(d) + rs.at(a) + rs.at(b)}};
        };
        break;
      }
      default:
        p.profile = "WriteCheck";
        p.reads = {chk(c1), sav(c1)};
        p.writes = [k = chk(c1)](const ReadSet& rs) { return std::vector<std::pair<Key, Value>>{{k, rs.at(k) - 1}}; };
        p.money_delta = -1;
        break;
    }
    // Remote spans beyond what the profile already touches become reads of
    // remote checking accounts.
    for (std::size_t i = 1; i < nodes.size(); ++i) {
      if (profile == 3 && i == 1) continue;
      add_unique(p.reads, chk(customer_on(nodes[i])));
    }
    for (std::uint32_t i = 0; i < spec.pad_reads; ++i) {
      add_unique(p.reads, sav(groups[nodes[rng.below(nodes.size())]][rng.below(customers)]));
    }
    w.programs.push_back(std::move(p));
  }
  return w;
}

// ------------------------------------------------------------- tpcc-lite

namespace {
constexpr std::uint32_t kDistricts = 10;
constexpr std::uint32_t kCustomersPerDistrict = 30;
constexpr std::uint32_t kItems = 1000;
constexpr std::uint32_t kOrderSlots = 16;

constexpr std::uint32_t kWarehouseYtd = 0;
constexpr std::uint32_t district_next_oid(std::uint32_t d) { return 1 + d; }
constexpr std::uint32_t district_ytd(std::uint32_t d) { return 1 + kDistricts + d; }
constexpr std::uint32_t customer_balance(std::uint32_t d, std::uint32_t c) {
  return 100 + d * kCustomersPerDistrict + c;
}
constexpr std::uint32_t stock(std::uint32_t i) { return 1000 + i; }
constexpr std::uint32_t order_slot(std::uint32_t d, std::uint32_t s) { return 10000 + d * kOrderSlots + s; }
}  // namespace

Workload gen_tpcc_lite(const WorkloadSpec& spec, const Partitioner& part) {
  spec.validate();
  const std::uint32_t per_node = spec.effective_scale();
  Workload w;
  std::vector<std::vector<std::uint32_t>> wh(spec.nodes);
  for (NodeId n = 0; n < spec.nodes; ++n) {
    for (std::uint32_t i = 0; i < per_node; ++i) {
      const auto g = part.group_on(n, i);
      wh[n].push_back(g);
      auto put = [&](std::uint32_t idx, Value v) { w.initial.emplace_back(Partitioner::make_key(g, idx), v); };
      put(kWarehouseYtd, 0);
      for (std::uint32_t d = 0; d < kDistricts; ++d) {
        put(district_next_oid(d), 1);
        put(district_ytd(d), 0);
        for (std::uint32_t c = 0; c < kCustomersPerDistrict; ++c) put(customer_balance(d, c), 0);
        for (std::uint32_t s = 0; s < kOrderSlots; ++s) put(order_slot(d, s), 0);
      }
      for (std::uint32_t it = 0; it < kItems; ++it) put(stock(it), 50);
    }
  }
  Rng rng(spec.seed);
  auto key = [](std::uint32_t g, std::uint32_t idx) { return Partitioner::make_key(g, idx); };
  for (std::uint64_t id = 0; id < spec.txns; ++id) {
    const auto host = static_cast<NodeId>(rng.below(spec.nodes));
    const bool dist = rng.chance(spec.dist_frac);
    const auto nodes = span_nodes(spec, rng, host, dist);
    const auto home = wh[host][rng.below(per_node)];
    const auto d = static_cast<std::uint32_t>(rng.below(kDistricts));
    Program p;
    p.id = id;
    p.host = host;
    p.distributed = nodes.size() > 1;
    if (rng.chance(spec.neworder_frac)) {
      p.profile = "NewOrder";
      const Key next = key(home, district_next_oid(d));
      p.reads.push_back(next);
      const auto lines = 5 + static_cast<std::uint32_t>(rng.below(11));
      std::vector<Key> stocks;
      for (std::uint32_t l = 0; l < lines; ++l) {
        // The first lines go to the remote warehouses so every spanned node is hit.
        const NodeId n = (l > 0 && l < nodes.size()) ? nodes[l] : (l == 0 ? host : nodes[rng.below(nodes.size())]);
        const auto sw = wh[n][rng.below(per_node)];
        const Key s = key(sw, stock(static_cast<std::uint32_t>(rng.below(kItems))));
        if (std::find(stocks.begin(), stocks.end(), s) == stocks.end()) stocks.push_back(s);
      }
      for (Key s : stocks) add_unique(p.reads, s);
      const auto qty = static_cast<Value>(1 + rng.below(10));
      p.writes = [next, stocks, qty, home, d](const ReadSet& rs) {
        std::vector<std::pair<Key, Value>> out;
        const Value oid = rs.at(next);
        out.emplace_back(next, oid + 1);
        for (Key s : stocks) {
          Value q = rs.at(s) - qty;
          if (q < 10) q += 91;
          out.emplace_back(s, q);
        }
        out.emplace_back(Partitioner::make_key(home, order_slot(d, static_cast<std::uint32_t>(oid % kOrderSlots))), oid);
        return out;
      };
    } else {
      p.profile = "Payment";
      const auto cw = nodes.size() > 1 ? wh[nodes[1]][rng.below(per_node)] : home;
      const auto cd = static_cast<std::uint32_t>(rng.below(kDistricts));
      const Key wy = key(home, kWarehouseYtd);
      const Key dy = key(home, district_ytd(d));
      const Key cb = key(cw, customer_balance(cd, static_cast<std::uint32_t>(rng.below(kCustomersPerDistrict))));
      p.reads = {wy, dy, cb};
      for (std::size_t i = 2; i < nodes.size(); ++i) add_unique(p.reads, key(wh[nodes[i]][0], kWarehouseYtd));
      const auto amount = static_cast<Value>(1 + rng.below(5000));
      p.writes = [wy, dy, cb, amount](const ReadSet& rs) {
        return std::vector<std::pair<Key, Value>>{{wy, rs.at(wy) + amount}, {dy, rs.at(dy) + amount}, {cb, rs.at(cb) - amount}};
      };
    }
    for (std::uint32_t i = 0; i < spec.pad_reads; ++i) {
      add_unique(p.reads, key(wh[nodes[rng.below(nodes.size())]][rng.below(per_node)], stock(static_cast<std::uint32_t>(rng.below(kItems)))));
    }
    w.programs.push_back(std::move(p));
  }
  return w;
}

Workload generate(const WorkloadSpec& spec, const Partitioner& part) {
  switch (spec.kind) {
    case WorkloadKind::kSmallBank: return gen_smallbank(spec, part);
    case WorkloadKind::kTpccLite: return gen_tpcc_lite(spec, part);
    case WorkloadKind::kMicro: return gen_micro(spec, part);
  }
  throw std::invalid_argument("unknown workload");
}

// ------------------------------------------------------------ experiment

Experiment run_experiment(const WorkloadSpec& spec, Level level, ClusterConfig cfg, HistorySink* history) {
  spec.validate();
  cfg.nodes = spec.nodes;
  cfg.workers_per_node = spec.workers_per_node;
  cfg.seed = spec.seed;
  Cluster cluster(cfg, level);
  const Workload w = generate(spec, cluster.partitioner());
  for (const auto& [k, v] : w.initial) cluster.load(k, v);
  for (const auto& p : w.programs) cluster.submit(p);

  Experiment ex;
  ex.result = cluster.run(history);
  ex.initial_total = w.initial_total;
  ex.final_total = cluster.total_value();
  ex.report.scheduler = std::string(to_string(level));
  ex.report.workload = std::string(to_string(spec.kind));
  ex.report.nodes = spec.nodes;
  ex.report.dist_frac = spec.dist_frac;
  ex.report.hot_frac = spec.hot_frac;
  ex.report.throughput = ex.result.throughput(cfg);
  ex.report.abort_rate = ex.result.abort_rate();
  ex.report.msgs_per_txn = ex.result.messages_per_txn();
  ex.report.seed = spec.seed;
  return ex;
}

std::string csv_row(const RunReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%s,%u,%.4f,%.4f,%.3f,%.6f,%.6f,%llu", r.scheduler.c_str(), r.workload.c_str(),
                r.nodes, r.dist_frac, r.hot_frac, r.throughput, r.abort_rate, r.msgs_per_txn,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

void emit_csv(std::ostream& os, const std::vector<RunReport>& reports) {
  os << kCsvHeader << '\n';
  for (const auto& r : reports) os << csv_row(r) << '\n';
}

void emit_csv(const std::string& path, const std::vector<RunReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  emit_csv(out, reports);
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace vicc
