// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/brute_force.hpp"
#include "support/histories.hpp"
#include "vicc/bench.hpp"
#include "vicc/cluster.hpp"
#include "vicc/oracle.hpp"

using namespace vicc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string note;
};

std::string text_of(const std::vector<HistoryEvent>& events) {
  std::ostringstream os;
  write_history(os, events);
  return os.str();
}

WorkloadSpec micro(std::uint64_t seed, double hot) {
  WorkloadSpec s;
  s.kind = WorkloadKind::kMicro;
  s.nodes = 4;
  s.txns = 10000;
  s.dist_frac = 0.2;
  s.hot_frac = hot;
  s.seed = seed;
  return s;
}

// ------------------------------------------------------------------- 1

Outcome classic_schedules() {
  using namespace testing_support;
  const auto t0 = Clock::now();
  Outcome o;
  auto expect = [&](const char* name, Level level, const std::vector<HistoryEvent>& h, bool want) {
    const bool got = check(level, h).pass;
    if (got != want) {
      o.pass = false;
      o.note += std::string(name) + "@" + std::string(to_string(level)) + " ";
    }
  };
  expect("III", Level::kCV, schedule_iii(), true);
  expect("IV", Level::kCV, schedule_iv(), true);
  expect("V", Level::kCV, schedule_v(), true);
  expect("II", Level::kCV, history_ii(), false);
  expect("III", Level::kPostSI, schedule_iii(), true);
  expect("IV", Level::kPostSI, schedule_iv(), false);
  expect("V", Level::kPostSI, schedule_v(), false);
  const double secs = seconds_since(t0);
  if (secs >= 1.0) o.pass = false;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4fs", secs);
  o.note += buf;
  return o;
}

// ------------------------------------------------------------------- 2

Outcome scheduler_oracle() {
  const auto t0 = Clock::now();
  Outcome o;
  std::uint64_t histories = 0;
  for (Level level : {Level::kCV, Level::kPostSI, Level::kSV}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      HistorySink h;
      run_experiment(micro(seed, 0.5), level, {}, &h);
      const auto events = h.events();
      const auto g = extract_dependencies(events);
      OracleResult r = level == Level::kCV ? check_cv(g) : check(level, events);
      if (r.pass && level == Level::kPostSI) r = verify_logged_stamps(g);
      ++histories;
      if (!r.pass) {
        o.pass = false;
        o.note += std::string(to_string(level)) + " seed " + std::to_string(seed) + ": " + r.detail + "; ";
      }
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 300) o.pass = false;
  o.note += std::to_string(histories) + " histories in " + std::to_string(static_cast<int>(secs)) + "s";
  return o;
}

// ------------------------------------------------------------------- 3

Outcome negative_control() {
  Outcome o;
  o.pass = false;
  int failing = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    HistorySink h;
    run_experiment(micro(seed, 0.5), Level::kOptimal, {}, &h);
    const auto g = extract_dependencies(h.events());
    const bool cv = check_cv(g).pass;
    const bool bad = !cv || !check_postsi(g).pass || !check_sv(g).pass;
    failing += bad;
  }
  o.pass = failing > 0;
  o.note = std::to_string(failing) + "/5 optimal histories rejected";
  return o;
}

// ------------------------------------------------------------------- 4

Outcome brute_force_agreement() {
  using namespace testing_support;
  Outcome o;
  std::mt19937_64 rng(2024);
  int agree = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto h = random_history(rng, 5, 4);
    const auto m = model_of(h);
    const bool ps = check(Level::kPostSI, h).pass == brute_postsi(m);
    const bool sv = check(Level::kSV, h).pass == brute_sv(m);
    agree += ps && sv;
  }
  o.pass = agree == 1000;
  o.note = std::to_string(agree) + "/1000 agree";
  return o;
}

// ------------------------------------------------------------------- 5

ClusterConfig quiet() {
  ClusterConfig cfg;
  cfg.nodes = 4;
  cfg.jitter_ticks = 0;
  return cfg;
}

Key key_on(const Cluster& c, NodeId n, std::uint32_t i = 0) {
  return Partitioner::make_key(c.partitioner().group_on(n, i), 0);
}

Program incrementer(std::uint64_t id, NodeId host, std::vector<Key> keys, Tick start = 0) {
  Program p;
  p.id = id;
  p.host = host;
  p.reads = keys;
  p.start_at = start;
  p.writes = [keys](const ReadSet& rs) {
    std::vector<std::pair<Key, Value>> out;
    for (Key k : keys) out.emplace_back(k, rs.at(k) + 1);
    return out;
  };
  return p;
}

Outcome message_accounting() {
  Outcome o;
  auto fail = [&](const std::string& what) {
    o.pass = false;
    o.note += what + "; ";
  };

  for (Level level : {Level::kCV, Level::kPostSI, Level::kSV, Level::kCentralSI}) {
    Cluster c(quiet(), level);
    const Key a = key_on(c, 2, 0), b = key_on(c, 2, 1);
    c.load(a, 0);
    c.load(b, 0);
    c.submit(incrementer(0, 2, {a, b}));
    const auto r = c.run();
    const auto& rec = r.records.at(0);
    const std::uint32_t want = level == Level::kCentralSI ? 2 : 0;
    if (!rec.committed || rec.messages != want || rec.coordinator_messages != want || rec.round2) {
      fail(std::string(to_string(level)) + " local txn sent " + std::to_string(rec.messages));
    }
  }

  // Distributed over two remote nodes: k reads, k prepares, k commits.
  for (Level level : {Level::kPostSI, Level::kCentralSI}) {
    Cluster c(quiet(), level);
    const Key a = key_on(c, 1), b = key_on(c, 3);
    c.load(a, 0);
    c.load(b, 0);
    c.submit(incrementer(0, 0, {a, b}));
    const auto r = c.run();
    const auto& rec = r.records.at(0);
    const std::uint32_t want = 6 + (level == Level::kCentralSI ? 2 : 0);
    if (!rec.committed || rec.messages != want || rec.round2) {
      fail(std::string(to_string(level)) + " distributed txn sent " + std::to_string(rec.messages));
    }
  }

  {
    // A reader on node 0 holds x while a distributed writer on node 3 overwrites it.
    Cluster c(quiet(), Level::kPostSI);
    const Key x = key_on(c, 1), y = key_on(c, 2);
    c.load(x, 0);
    c.load(y, 0);
    Program r0;
    r0.id = 0;
    r0.host = 0;
    r0.reads = {x};
    r0.hold_ticks = 300;
    c.submit(r0);
    c.submit(incrementer(1, 3, {x, y}, 100));
    const auto r = c.run();
    const auto& w = r.records.at(1);
    if (!w.committed || !w.round2 || w.round2_messages != 1 || w.messages != 7) {
      fail("conflicted writer: round2=" + std::to_string(w.round2) + " msgs=" + std::to_string(w.messages));
    }
  }

  {
    WorkloadSpec s = micro(1, 0.0);
    s.txns = 1000;
    const auto ex = run_experiment(s, Level::kCentralSI);
    for (const auto& rec : ex.result.records) {
      if (rec.coordinator_messages != 2) {
        fail("central attempt with " + std::to_string(rec.coordinator_messages) + " coordinator messages");
        break;
      }
    }
  }
  if (o.pass) o.note = "all counters exact";
  return o;
}

// ------------------------------------------------------------------- 6

Outcome scalability() {
  const auto t0 = Clock::now();
  Outcome o;
  ClusterConfig cfg;
  cfg.transport = TransportKind::kConcurrent;
  cfg.tick_ns = 10000;
  cfg.coord_service_ticks = 12;
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<double> ratio;
    for (std::uint32_t nodes : {2u, 4u, 8u}) {
      WorkloadSpec s;
      s.kind = WorkloadKind::kSmallBank;
      s.nodes = nodes;
      s.txns = 3000;
      s.seed = seed;
      const auto p = run_experiment(s, Level::kPostSI, cfg);
      const auto c = run_experiment(s, Level::kCentralSI, cfg);
      ratio.push_back(p.report.throughput / c.report.throughput);
    }
    const bool ok = ratio[0] <= ratio[1] && ratio[1] <= ratio[2] && ratio[2] > 1.0;
    good += ok;
    char buf[96];
    std::snprintf(buf, sizeof buf, "[%.2f %.2f %.2f]%s ", ratio[0], ratio[1], ratio[2], ok ? "" : "x");
    o.note += buf;
  }
  const double secs = seconds_since(t0);
  o.pass = good >= 4 && secs < 600;
  o.note += std::to_string(good) + "/5 seeds";
  return o;
}

// ------------------------------------------------------------------- 7

Outcome contention() {
  Outcome o;
  constexpr double kNoise = 0.02;
  const std::vector<double> hot{0.0, 0.25, 0.5, 1.0};
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<std::vector<double>> rate(3);  // cv, postsi, sv
    const Level levels[] = {Level::kCV, Level::kPostSI, Level::kSV};
    for (double h : hot) {
      for (int l = 0; l < 3; ++l) rate[l].push_back(run_experiment(micro(seed, h), levels[l]).report.abort_rate);
    }
    bool ok = true;
    for (int l = 0; l < 3; ++l) {
      for (std::size_t i = 1; i < hot.size(); ++i) ok &= rate[l][i] >= rate[l][i - 1];
    }
    for (std::size_t i = 0; i < hot.size(); ++i) {
      ok &= rate[2][i] >= rate[1][i] - kNoise;
      ok &= rate[1][i] >= rate[0][i] - kNoise;
    }
    good += ok;
    if (seed == 1) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "seed 1 at hot=1: cv %.3f postsi %.3f sv %.3f; ", rate[0][3], rate[1][3],
                    rate[2][3]);
      o.note += buf;
    }
  }
  o.pass = good >= 4;
  o.note += std::to_string(good) + "/5 seeds";
  return o;
}

// ------------------------------------------------------------------- 8

Outcome conservation() {
  Outcome o;
  for (Level level : {Level::kCV, Level::kPostSI, Level::kSV, Level::kCentralSI}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      WorkloadSpec s;
      s.kind = WorkloadKind::kSmallBank;
      s.txns = 5000;
      s.dist_frac = 0.3;
      s.hot_frac = 0.5;
      s.seed = seed;
      const auto ex = run_experiment(s, level);
      if (ex.final_total != ex.initial_total + ex.result.committed_money_delta) {
        o.pass = false;
        o.note += std::string(to_string(level)) + " seed " + std::to_string(seed) + " off by " +
                  std::to_string(ex.final_total - ex.initial_total - ex.result.committed_money_delta) + "; ";
      }
    }
  }
  if (o.pass) o.note = "balances match the committed ledger";
  return o;
}

// ------------------------------------------------------------------- 9

Outcome determinism() {
  Outcome o;
  for (auto kind : {WorkloadKind::kMicro, WorkloadKind::kSmallBank, WorkloadKind::kTpccLite}) {
    for (Level level : {Level::kCV, Level::kPostSI, Level::kSV, Level::kCentralSI, Level::kOptimal}) {
      WorkloadSpec s;
      s.kind = kind;
      s.txns = 2000;
      s.hot_frac = 0.5;
      s.seed = 7;
      auto once = [&] {
        HistorySink h;
        const auto ex = run_experiment(s, level, {}, &h);
        std::ostringstream csv;
        emit_csv(csv, {ex.report});
        return std::pair(text_of(h.events()), csv.str());
      };
      if (once() != once()) {
        o.pass = false;
        o.note += std::string(to_string(level)) + "/" + std::string(to_string(kind)) + " ";
      }
    }
  }
  if (o.pass) o.note = "histories and csv rows identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"classic schedule verdicts", classic_schedules},
      {"scheduler histories pass their oracle", scheduler_oracle},
      {"optimal baseline is caught", negative_control},
      {"oracle agrees with brute force", brute_force_agreement},
      {"message accounting", message_accounting},
      {"postsi/central throughput ratio grows with nodes", scalability},
      {"abort rate trends under contention", contention},
      {"smallbank conservation", conservation},
      {"deterministic replay", determinism},
  };
  int failed = 0;
  int n = 0;
  for (const auto& [name, run] : criteria) {
    ++n;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s (%.1fs) %s\n", o.pass ? "PASS" : "FAIL", n, name, seconds_since(t0), o.note.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
