#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oswitch/expr.hpp"
#include "oswitch/grid.hpp"
#include "oswitch/ipde.hpp"
#include "oswitch/levy.hpp"
#include "oswitch/path_sim.hpp"
#include "oswitch/switching.hpp"

namespace oswitch {

/// All parse/validation problems of one config, each tagged line:col.
struct ConfigError : std::runtime_error {
  explicit ConfigError(std::vector<std::string> errs)
      : std::runtime_error(join(errs)), errors(std::move(errs)) {}
  std::vector<std::string> errors;

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string s = "config errors:";
    for (const auto& e : errs) s += "\n  " + e;
    return s;
  }
};

struct Config {
  // [levy]
  double a = 0.0;
  double varpi = 0.0;
  MeasureKind measure_kind = MeasureKind::kNone;
  std::vector<Atom> atoms;
  DensityFamily density_family = DensityFamily::kDoubleExp;
  double intensity = 0.0, p = 0.5, eta_pos = 1.0, eta_neg = 1.0, mean = 0.0, stddev = 1.0;
  double eps = 0.5, lambda = 1.0;
  int n_max = 5;

  // [dynamics]
  Expr b_expr = Expr::constant(0.0);
  Expr sigma_expr = Expr::constant(1.0);
  double sigma_bound = 1.0;

  // [problem]
  int m = 1;
  std::vector<Expr> drivers;                // f1..fm
  std::vector<Expr> terminals;              // h1..hm
  std::map<std::pair<int, int>, Expr> costs;  // g_ij, i != j
  Coupling coupling = Coupling::kNone;
  std::vector<double> lipschitz_y;

  // [grid]
  Grid grid;

  // [solver]
  std::string scheme = "monotone";
  SolveOptions solver;
  double switch_tol = 0.0;  // 0 = 2 x residual tolerance
  int switch_cap = 0;       // 0 = 10 m

  // [oracle]
  double oracle_lo = 0.0, oracle_hi = 0.0;  // 0,0 = middle half of the grid
  int oracle_states = 21;
  int oracle_nt = 0;  // 0 = grid nt
  double oracle_leak_tol = 1e-6;

  // [mc]
  int mc_paths = 10000;
  int mc_steps = 200;
  double t0 = 0.0, x0 = 0.0;
  int i0 = 1;

  // [seeds]
  std::uint64_t seed = 1;

  LevyTriplet triplet() const;
  Dynamics dynamics() const;
  SwitchingSpec switching() const;
  std::vector<double> oracle_state_grid() const;
  std::vector<double> oracle_time_grid() const;
};

/// Parses and fully validates the documented key/value format; throws
/// ConfigError listing every problem with line:col. Unknown keys are errors.
Config parse_config(const std::string& text);

/// Canonical text form; parse(render(c)) yields an equivalent Config.
std::string render_config(const Config& cfg);

}  // namespace oswitch
