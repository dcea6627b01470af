#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "oswitch/runner.hpp"

using namespace oswitch;
namespace fs = std::filesystem;

namespace {

const char* kSolveConfig = R"(
[levy]
varpi = 1.0

[dynamics]
b = 0
sigma = 1
sigma_bound = 1.0

[problem]
m = 2
f1 = 0.4 * max(x, 0)
f2 = -0.2 * x
h1 = 0
h2 = 0
g12 = 0.3
g21 = 0.3

[grid]
T = 0.5
nt = 25
x_min = -6
x_max = 6
nx = 60

[oracle]
states = 9
nt = 25

[mc]
paths = 400
t0 = 0
x0 = 0.5
i0 = 1

[seeds]
master = 42
)";

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("oswitch_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& sub, const Config& cfg, const RunOptions& opts, std::string* text) {
  std::ostringstream out;
  const int code = run_subcommand(sub, cfg, opts, out);
  if (text) *text = out.str();
  return code;
}

}  // namespace

TEST_CASE("validate subcommand reports pass and failure") {
  const Config cfg = parse_config(kSolveConfig);
  std::string out;
  CHECK(run("validate", cfg, {}, &out) == 0);
  CHECK(out.find("validation passed") != std::string::npos);

  // free round trip between the modes: must fail naming the cycle
  std::string loop_text = kSolveConfig;
  loop_text.replace(loop_text.find("g12 = 0.3"), 9, "g12 = 0.0");
  loop_text.replace(loop_text.find("g21 = 0.3"), 9, "g21 = 0.0");
  const Config loop_cfg = parse_config(loop_text);
  std::string loop_out;
  CHECK(run("validate", loop_cfg, {}, &loop_out) == 1);
  CHECK(loop_out.find("free loop") != std::string::npos);
}

TEST_CASE("teugels subcommand prints the coefficient table") {
  std::string text = kSolveConfig;
  text.replace(text.find("varpi = 1.0"), 11, "varpi = 2.0");
  const Config cfg = parse_config(text);
  std::string out;
  CHECK(run("teugels", cfg, {}, &out) == 0);
  CHECK(out.find("degenerate_rank,1") != std::string::npos);
  CHECK(out.find("1,1,0.5") != std::string::npos);  // c11 = 1/varpi
}

TEST_CASE("solve writes fields and diagnostics; residual re-checks them") {
  const Config cfg = parse_config(kSolveConfig);
  TempDir dir;
  RunOptions opts;
  opts.out_dir = dir.path.string();
  std::string out;
  REQUIRE(run("solve", cfg, opts, &out) == 0);
  CHECK(fs::exists(dir.path / "u_mode1.csv"));
  CHECK(fs::exists(dir.path / "u_mode2.csv"));
  CHECK(fs::exists(dir.path / "diagnostics.txt"));

  const ValueFields back = read_fields_csv(dir.path.string(), 2);
  CHECK(back.grid().nt == cfg.grid.nt);
  CHECK(back.grid().nx == cfg.grid.nx);

  RunOptions ropts;
  ropts.fields_dir = dir.path.string();
  std::string rout;
  CHECK(run("residual", cfg, ropts, &rout) == 0);
  CHECK(rout.find("residual_max") != std::string::npos);
}

TEST_CASE("evaluate accepts a fixed strategy file and is reproducible") {
  const Config cfg = parse_config(kSolveConfig);
  TempDir dir;
  const std::string policy = (dir.path / "strategy.csv").string();
  Strategy s{1, {{0.2, 2}}};
  write_strategy_csv(s, policy);
  const Strategy back = read_strategy_csv(policy, 1);
  REQUIRE(back.events.size() == 1);
  CHECK(back.events[0].mode == 2);

  RunOptions opts;
  opts.policy_file = policy;
  std::string a, b;
  CHECK(run("evaluate", cfg, opts, &a) == 0);
  CHECK(run("evaluate", cfg, opts, &b) == 0);
  CHECK(a == b);  // fixed seeds reproduce bit-identical output
  CHECK(a.find("mean = ") != std::string::npos);
}

TEST_CASE("oracle subcommand prints values and the enumeration gap when feasible") {
  std::string text = kSolveConfig;
  text.replace(text.find("states = 9"), 10, "states = 1");
  text.replace(text.find("nt = 25\n\n[mc]"), 13, "nt = 2\n\n[mc]");
  const Config cfg = parse_config(text);
  std::string out;
  const int code = run("oracle", cfg, {}, &out);
  CHECK(code == 0);
  CHECK(out.find("mode,state,value") != std::string::npos);
  CHECK(out.find("enumeration_gap") != std::string::npos);
}

TEST_CASE("chain files round-trip through the oracle") {
  TempDir dir;
  const std::string path = (dir.path / "chain.csv").string();
  {
    std::ofstream out(path);
    out << "0\n0,1\n1\n";
  }
  const ChainModel chain = read_chain_csv(path);
  CHECK(chain.n_states() == 1);
  CHECK(chain.n_steps() == 1);
  const Config cfg = parse_config(kSolveConfig);
  RunOptions opts;
  opts.chain_file = path;
  std::string out;
  CHECK(run("oracle", cfg, opts, &out) == 0);
}

TEST_CASE("unknown subcommands give a usage error") {
  const Config cfg = parse_config(kSolveConfig);
  std::string out;
  CHECK(run("frobnicate", cfg, {}, &out) == 3);
}

TEST_CASE("compare agrees three ways on a small instance") {
  const Config cfg = parse_config(kSolveConfig);
  std::string out;
  const int code = run("compare", cfg, {}, &out);
  CHECK(code == 0);
  CHECK(out.find("compare passed") != std::string::npos);
}
