// oracle check --level {cv,postsi,sv} --history <file>

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "vicc/history.hpp"
#include "vicc/oracle.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Isolation checker for recorded histories"};
  app.require_subcommand(1);
  auto* check = app.add_subcommand("check", "Check one history file");
  std::string level_text;
  std::string path;
  bool stamps = false;
  check->add_option("--level", level_text, "cv, postsi or sv")->required()->check(CLI::IsMember({"cv", "postsi", "sv"}));
  check->add_option("--history", path, "history log")->required();
  check->add_flag("--stamps", stamps, "also check the logged stamps (postsi)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto level = *vicc::parse_level(level_text);
    const auto events = vicc::read_history_file(path);
    auto res = vicc::check(level, events);
    if (res.pass && stamps && level == vicc::Level::kPostSI) {
      auto logged = vicc::verify_logged_stamps(vicc::extract_dependencies(events));
      if (!logged.pass) res = logged;
    }
    std::cout << res.report();
    return res.pass ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
