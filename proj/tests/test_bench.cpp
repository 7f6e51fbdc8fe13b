#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "vicc/bench.hpp"

using namespace vicc;

namespace {

std::set<NodeId> nodes_of(const Program& p, const Partitioner& part) {
  std::set<NodeId> out{p.host};
  for (Key k : p.reads) out.insert(part.node_of(k));
  return out;
}

std::vector<std::pair<Key, Value>> writes_from_zero(const Program& p) {
  ReadSet rs;
  for (Key k : p.reads) rs[k] = 0;
  return p.writes ? p.writes(rs) : std::vector<std::pair<Key, Value>>{};
}

std::uint32_t index_of(Key k) { return static_cast<std::uint32_t>(k & 0xffffffffu); }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("workload names") {
  for (auto k : {WorkloadKind::kSmallBank, WorkloadKind::kTpccLite, WorkloadKind::kMicro}) {
    CHECK(parse_workload(to_string(k)) == k);
  }
  CHECK_FALSE(parse_workload("ycsb").has_value());
}

TEST_CASE("spec validation") {
  WorkloadSpec s;
  CHECK_NOTHROW(s.validate());
  auto bad = [](auto edit) {
    WorkloadSpec x;
    edit(x);
    return x;
  };
  CHECK_THROWS_AS(bad([](WorkloadSpec& x) { x.dist_frac = 1.5; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorkloadSpec& x) { x.hot_frac = -0.1; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorkloadSpec& x) { x.fanout_max = 4; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorkloadSpec& x) { x.nodes = 0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](WorkloadSpec& x) { x.scale = 10; x.hot_keys_per_node = 10; }).validate(),
                  std::invalid_argument);
}

TEST_CASE("generators touch only the host when nothing is distributed") {
  for (auto kind : {WorkloadKind::kMicro, WorkloadKind::kSmallBank, WorkloadKind::kTpccLite}) {
    WorkloadSpec s;
    s.kind = kind;
    s.dist_frac = 0;
    s.txns = 2000;
    const Partitioner part(s.nodes);
    for (const auto& p : generate(s, part).programs) {
      REQUIRE_FALSE(p.distributed);
      REQUIRE(nodes_of(p, part).size() == 1);
      for (const auto& [k, v] : writes_from_zero(p)) REQUIRE(part.node_of(k) == p.host);
    }
  }
}

TEST_CASE("distributed share and fan-out") {
  for (auto kind : {WorkloadKind::kMicro, WorkloadKind::kSmallBank, WorkloadKind::kTpccLite}) {
    WorkloadSpec s;
    s.kind = kind;
    s.dist_frac = 0.5;
    s.txns = 10000;
    const Partitioner part(s.nodes);
    std::uint64_t dist = 0;
    for (const auto& p : generate(s, part).programs) {
      const auto touched = nodes_of(p, part).size();
      if (p.distributed) {
        ++dist;
        REQUIRE(touched >= 2);
        REQUIRE(touched <= 3);
      } else {
        REQUIRE(touched == 1);
      }
    }
    CHECK(dist >= 4700);
    CHECK(dist <= 5300);
  }
}

TEST_CASE("generation is a pure function of the spec") {
  for (auto kind : {WorkloadKind::kMicro, WorkloadKind::kSmallBank, WorkloadKind::kTpccLite}) {
    WorkloadSpec s;
    s.kind = kind;
    s.txns = 500;
    s.hot_frac = 0.3;
    s.pad_reads = 2;
    const Partitioner part(s.nodes);
    const auto a = generate(s, part);
    const auto b = generate(s, part);
    CHECK(a.initial == b.initial);
    REQUIRE(a.programs.size() == b.programs.size());
    for (std::size_t i = 0; i < a.programs.size(); ++i) {
      REQUIRE(a.programs[i].host == b.programs[i].host);
      REQUIRE(a.programs[i].reads == b.programs[i].reads);
      REQUIRE(a.programs[i].profile == b.programs[i].profile);
      REQUIRE(writes_from_zero(a.programs[i]) == writes_from_zero(b.programs[i]));
    }
    s.seed = 2;
    const auto c = generate(s, part);
    bool differs = false;
    for (std::size_t i = 0; i < c.programs.size(); ++i) differs |= c.programs[i].reads != a.programs[i].reads;
    CHECK(differs);
  }
}

TEST_CASE("micro hot keys") {
  WorkloadSpec s;
  s.txns = 4000;
  s.hot_frac = 1.0;
  s.scale = 1000;
  const Partitioner part(s.nodes);
  for (const auto& p : gen_micro(s, part).programs) {
    REQUIRE_FALSE(p.reads.empty());
    for (Key k : p.reads) REQUIRE(index_of(k) < s.hot_keys_per_node);
  }
  s.hot_frac = 0.0;
  for (const auto& p : gen_micro(s, part).programs) {
    for (Key k : p.reads) REQUIRE(index_of(k) >= s.hot_keys_per_node);
  }
}

TEST_CASE("pad reads only lengthen the read set") {
  WorkloadSpec s;
  s.kind = WorkloadKind::kSmallBank;
  s.txns = 300;
  const Partitioner part(s.nodes);
  const auto base = generate(s, part);
  s.pad_reads = 4;
  const auto padded = generate(s, part);
  std::size_t longer = 0;
  for (std::size_t i = 0; i < base.programs.size(); ++i) {
    REQUIRE(padded.programs[i].reads.size() >= base.programs[i].reads.size());
    longer += padded.programs[i].reads.size() > base.programs[i].reads.size();
  }
  CHECK(longer > base.programs.size() / 2);
}

TEST_CASE("tpcc-lite transaction shapes") {
  WorkloadSpec s;
  s.kind = WorkloadKind::kTpccLite;
  s.txns = 2000;
  s.dist_frac = 0.3;
  const Partitioner part(s.nodes);
  std::size_t neworder = 0, payment = 0;
  for (const auto& p : gen_tpcc_lite(s, part).programs) {
    const auto w = writes_from_zero(p);
    if (p.profile == "NewOrder") {
      ++neworder;
      REQUIRE(index_of(p.reads.front()) >= 1);
      REQUIRE(index_of(p.reads.front()) <= 10);
      const auto stock_rows = p.reads.size() - 1;
      REQUIRE(stock_rows >= 1);
      REQUIRE(stock_rows <= 15);
      for (std::size_t i = 1; i < p.reads.size(); ++i) REQUIRE(index_of(p.reads[i]) >= 1000);
      // next order id, every stock row, and the new order slot
      REQUIRE(w.size() == stock_rows + 2);
    } else {
      REQUIRE(p.profile == "Payment");
      ++payment;
      REQUIRE(p.reads.size() >= 3);
      REQUIRE(index_of(p.reads[0]) == 0);
      REQUIRE(w.size() == 3);
    }
  }
  CHECK(neworder > 800);
  CHECK(payment > 800);
}

TEST_CASE("smallbank initial balances") {
  WorkloadSpec s;
  s.kind = WorkloadKind::kSmallBank;
  s.scale = 100;
  const Partitioner part(s.nodes);
  const auto w = gen_smallbank(s, part);
  CHECK(w.initial.size() == 2u * 100 * s.nodes);
  Value sum = 0;
  for (const auto& [k, v] : w.initial) sum += v;
  CHECK(sum == w.initial_total);
  CHECK(sum == 1000 * 2 * 100 * static_cast<Value>(s.nodes));
}

TEST_CASE("csv output") {
  std::ostringstream empty;
  emit_csv(empty, {});
  CHECK(empty.str() == std::string(kCsvHeader) + "\n");

  RunReport r;
  r.scheduler = "postsi";
  r.workload = "micro";
  r.nodes = 4;
  r.dist_frac = 0.2;
  r.hot_frac = 0.5;
  r.throughput = 1234.5;
  r.abort_rate = 0.125;
  r.msgs_per_txn = 1.5;
  r.seed = 3;
  CHECK(csv_row(r) == "postsi,micro,4,0.2000,0.5000,1234.500,0.125000,1.500000,3");
  std::ostringstream two;
  emit_csv(two, {r, r});
  std::size_t lines = 0;
  for (char ch : two.str()) lines += ch == '\n';
  CHECK(lines == 3);

  const auto path = (std::filesystem::temp_directory_path() / "vicc_test_bench.csv").string();
  emit_csv(path, {r});
  CHECK(slurp(path) == std::string(kCsvHeader) + "\n" + csv_row(r) + "\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(emit_csv("/nonexistent-dir/x.csv", {r}), std::runtime_error);
}

TEST_CASE("simulated experiments are reproducible") {
  WorkloadSpec s;
  s.txns = 2000;
  s.hot_frac = 0.5;
  const auto a = run_experiment(s, Level::kSV);
  const auto b = run_experiment(s, Level::kSV);
  CHECK(csv_row(a.report) == csv_row(b.report));
  CHECK(a.report.scheduler == "sv");
  CHECK(a.report.abort_rate > 0);
}

TEST_CASE("central SI pays its coordinator round trips") {
  WorkloadSpec s;
  s.txns = 3000;
  const auto central = run_experiment(s, Level::kCentralSI);
  const auto postsi = run_experiment(s, Level::kPostSI);
  CHECK(central.report.msgs_per_txn >= postsi.report.msgs_per_txn + 2.0);
}

TEST_CASE("smallbank money is conserved apart from committed deposits") {
  WorkloadSpec s;
  s.kind = WorkloadKind::kSmallBank;
  s.txns = 4000;
  s.dist_frac = 0.4;
  s.hot_frac = 0.5;
  for (Level level : {Level::kCV, Level::kPostSI, Level::kSV, Level::kCentralSI}) {
    const auto ex = run_experiment(s, level);
    CHECK(ex.final_total == ex.initial_total + ex.result.committed_money_delta);
  }
}
