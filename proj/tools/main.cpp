#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "oswitch/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon optimal switching under Levy noise: solvers and oracles"};
  app.require_subcommand(1);

  std::string config_path;
  oswitch::RunOptions opts;
  const std::vector<std::string> names = {"validate", "teugels", "simulate", "solve",
                                          "residual", "evaluate", "oracle",   "compare"};
  for (const auto& name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("config", config_path, "problem configuration file")->required();
    sub->add_option("--out", opts.out_dir, "output directory for artifacts");
    if (name == "evaluate") {
      sub->add_option("--policy", opts.policy_file, "fixed strategy CSV of (time, mode) events");
      sub->add_option("--fields", opts.fields_dir, "directory with emitted value fields");
    }
    if (name == "residual")
      sub->add_option("--fields", opts.fields_dir, "directory with emitted value fields");
    if (name == "oracle")
      sub->add_option("--chain", opts.chain_file, "explicit chain CSV (states, times, blocks)");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "cannot open config file " << config_path << "\n";
    return 3;
  }
  std::stringstream buffer;
  buffer << in.rdbuf();

  try {
    const oswitch::Config cfg = oswitch::parse_config(buffer.str());
    return oswitch::run_subcommand(sub, cfg, opts, std::cout);
  } catch (const oswitch::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
