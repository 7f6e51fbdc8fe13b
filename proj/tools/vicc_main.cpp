// vicc bench ... runs one workload under one scheduler and emits a CSV row.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vicc/bench.hpp"
#include "vicc/oracle.hpp"

int main(int argc, char** argv) {
  CLI::App app{"ViCC key-value engine driver"};
  app.require_subcommand(1);
  auto* bench = app.add_subcommand("bench", "Run a benchmark");

  vicc::WorkloadSpec spec;
  std::string scheduler = "postsi";
  std::string workload = "micro";
  std::string mode = "sim";
  std::string out;
  std::string history;
  std::string config;
  bool verify = false;
  bench->add_option("--scheduler", scheduler)->check(CLI::IsMember({"cv", "postsi", "sv", "central", "optimal"}));
  bench->add_option("--workload", workload)->check(CLI::IsMember({"smallbank", "tpcc-lite", "micro"}));
  bench->add_option("--nodes", spec.nodes);
  bench->add_option("--workers", spec.workers_per_node);
  bench->add_option("--dist-frac", spec.dist_frac)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--hot-frac", spec.hot_frac)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--hot-keys", spec.hot_keys_per_node);
  bench->add_option("--pad-reads", spec.pad_reads);
  bench->add_option("--scale", spec.scale, "keys, customers or warehouses per node");
  bench->add_option("--txns", spec.txns);
  bench->add_option("--seed", spec.seed);
  bench->add_option("--neworder-frac", spec.neworder_frac)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--mode", mode)->check(CLI::IsMember({"sim", "concurrent"}));
  bench->add_option("--out", out, "CSV report");
  bench->add_option("--history", history, "history log");
  bench->add_option("--config", config, "cluster config file (key=value)");
  bench->add_flag("--verify", verify, "run the oracle on the history");
  CLI11_PARSE(app, argc, argv);

  try {
    spec.kind = *vicc::parse_workload(workload);
    const auto level = *vicc::parse_level(scheduler);
    vicc::ClusterConfig cfg;
    if (!config.empty()) cfg = vicc::load_config(config, cfg);
    cfg.transport = mode == "sim" ? vicc::TransportKind::kSim : vicc::TransportKind::kConcurrent;

    vicc::HistorySink sink;
    const bool record = !history.empty() || verify;
    auto ex = vicc::run_experiment(spec, level, cfg, record ? &sink : nullptr);

    if (!history.empty()) {
      std::ofstream os(history);
      vicc::write_history(os, sink.events());
      if (!os) throw std::runtime_error("cannot write " + history);
    }
    if (out.empty()) {
      vicc::emit_csv(std::cout, {ex.report});
    } else {
      vicc::emit_csv(out, {ex.report});
    }
    std::cerr << "committed " << ex.result.committed << ", aborted attempts " << ex.result.aborted << ", gave up "
              << ex.result.gave_up << ", background messages " << ex.result.background_messages << '\n';
    if (spec.kind == vicc::WorkloadKind::kSmallBank) {
      std::cerr << "balance " << ex.final_total << " (initial " << ex.initial_total << ", committed delta "
                << ex.result.committed_money_delta << ")\n";
    }
    if (verify) {
      if (level == vicc::Level::kOptimal || level == vicc::Level::kCentralSI) {
        auto res = vicc::check(vicc::Level::kPostSI, sink.events());
        std::cerr << "postsi oracle: " << res.report();
      } else {
        auto res = vicc::check(level, sink.events());
        std::cerr << vicc::to_string(level) << " oracle: " << res.report();
        if (!res.pass) return 1;
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
