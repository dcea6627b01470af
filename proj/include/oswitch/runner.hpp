#pragma once

#include <iostream>
#include <string>

#include "oswitch/config.hpp"
#include "oswitch/dp.hpp"
#include "oswitch/ipde.hpp"

namespace oswitch {

struct RunOptions {
  std::string out_dir = ".";
  std::string policy_file;  // evaluate: fixed strategy events
  std::string fields_dir;   // evaluate/residual: previously emitted fields
  std::string chain_file;   // oracle: explicit chain instead of config build
};

/// Dispatches one subcommand. Exit codes: 0 success, 1 validation failure,
/// 2 numerical failure, 3 usage error. Partial artifacts are removed when a
/// run fails.
int run_subcommand(const std::string& name, const Config& cfg, const RunOptions& opts,
                   std::ostream& out);

// artifact formats, shared with tests
void write_fields_csv(const ValueFields& fields, const std::string& dir,
                      std::vector<std::string>* written = nullptr);
ValueFields read_fields_csv(const std::string& dir, int m);
void write_strategy_csv(const Strategy& strategy, const std::string& path);
Strategy read_strategy_csv(const std::string& path, int start_mode);
ChainModel read_chain_csv(const std::string& path);

}  // namespace oswitch
