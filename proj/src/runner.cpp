#include "oswitch/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oswitch/numerics.hpp"
#include "oswitch/teugels.hpp"

namespace oswitch {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<double> split_doubles(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::strtod(tok.c_str(), nullptr));
  }
  return out;
}

ValidationReport run_all_validators(const Config& cfg, std::ostream& out) {
  ValidationReport total;
  const LevyTriplet tr = cfg.triplet();
  const auto measure_rep = validate_measure(tr.measure, cfg.eps, cfg.lambda);
  out << "measure: " << measure_rep.summary() << " (1^x2 = "
      << measure_rep.metrics.count("one_wedge_square") << ")\n";
  if (!measure_rep.ok)
    for (const auto& e : measure_rep.issues) total.fail("measure: " + e);

  const Dynamics dyn = cfg.dynamics();
  const auto dyn_rep =
      probe_dynamics(dyn, 0.0, cfg.grid.t_max, cfg.grid.x_min, cfg.grid.x_max);
  out << "dynamics: " << dyn_rep.summary() << "\n";
  if (!dyn_rep.ok)
    for (const auto& e : dyn_rep.issues) total.fail("dynamics: " + e);

  const SwitchingSpec spec = cfg.switching();
  std::vector<std::pair<double, double>> pts;
  for (double t : {0.0, 0.5 * cfg.grid.t_max, cfg.grid.t_max})
    for (int n = 0; n <= cfg.grid.nx; n += std::max(1, cfg.grid.nx / 64))
      pts.emplace_back(t, cfg.grid.x_node(n));
  const auto loop_rep = validate_no_free_loop(spec, pts, cfg.solver.cycle_tol);
  out << "no-free-loop: " << loop_rep.summary();
  if (loop_rep.metrics.count("min_cycle_sum"))
    out << " (min cycle sum " << loop_rep.metrics.at("min_cycle_sum") << ")";
  out << "\n";
  if (!loop_rep.ok)
    for (const auto& e : loop_rep.issues) total.fail("no-free-loop: " + e);

  std::vector<double> xs(cfg.grid.nx + 1);
  for (int n = 0; n <= cfg.grid.nx; ++n) xs[n] = cfg.grid.x_node(n);
  const auto cons_rep = validate_consistency(spec, cfg.grid.t_max, xs);
  out << "consistency: " << cons_rep.summary();
  if (cons_rep.metrics.count("worst_margin"))
    out << " (worst margin " << cons_rep.metrics.at("worst_margin") << ")";
  out << "\n";
  if (!cons_rep.ok)
    for (const auto& e : cons_rep.issues) total.fail("consistency: " + e);

  const auto coup_rep =
      validate_driver_coupling(spec, cfg.grid.t_max, cfg.grid.x_min, cfg.grid.x_max);
  out << "coupling: " << coup_rep.summary() << "\n";
  if (!coup_rep.ok)
    for (const auto& e : coup_rep.issues) total.fail("coupling: " + e);
  return total;
}

ValueFields run_solver(const Config& cfg) {
  const SwitchingSpec spec = cfg.switching();
  const Dynamics dyn = cfg.dynamics();
  const LevyTriplet tr = cfg.triplet();
  SolveOptions opts = cfg.solver;
  opts.delta_override = cfg.grid.delta;
  if (cfg.scheme == "picard") return solve_picard(spec, dyn, tr, cfg.grid, opts);
  return solve_monotone(spec, dyn, tr, cfg.grid, opts);
}

void write_diagnostics(const Config& cfg, const ValueFields& fields, const ResidualReport& rep,
                       const std::string& path, std::vector<std::string>* written) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  if (written) written->push_back(path);
  const SolveDiagnostics& d = fields.diagnostics;
  out << "scheme = " << cfg.scheme << "\n";
  out << "outer_iterations = " << d.outer_iterations << "\n";
  out << "final_outer_diff = "
      << (d.outer_diffs.empty() ? 0.0 : d.outer_diffs.back()) << "\n";
  out << "contraction_rho = ";
  for (std::size_t i = 0; i < d.contraction_factors.size(); ++i) {
    if (i) out << " ";
    out << fmt(d.contraction_factors[i]);
  }
  out << "\n";
  out << "min_iterate_increment = " << fmt(d.min_iterate_increment) << "\n";
  out << "upper_envelope_slack = " << fmt(d.upper_envelope_slack) << "\n";
  out << "transformed = " << (d.transformed ? 1 : 0) << "\n";
  out << "transform_lambda = " << fmt(d.transform_lambda) << "\n";
  out << "leak_mass = " << fmt(d.leak_mass) << "\n";
  out << "active_fraction = " << fmt(rep.active_fraction) << "\n";
  out << "residual_max = " << fmt(rep.max_min_abs) << "\n";
  out << "residual_tol = " << fmt(rep.residual_tol) << "\n";
  out << "min_r1 = " << fmt(rep.min_r1) << "\n";
  out << "max_r2_off_obstacle = " << fmt(rep.max_r2_off_obstacle) << "\n";
}

double solver_switch_tol(const Config& cfg, const ValueFields& fields) {
  if (cfg.switch_tol > 0.0) return cfg.switch_tol;
  return 2.0 * residual_tolerance(fields);
}

}  // namespace

void write_fields_csv(const ValueFields& fields, const std::string& dir,
                      std::vector<std::string>* written) {
  fs::create_directories(dir);
  const Grid& g = fields.grid();
  for (int i = 1; i <= fields.modes(); ++i) {
    const std::string path = dir + "/u_mode" + std::to_string(i) + ".csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (written) written->push_back(path);
    out << "t";
    for (int n = 0; n <= g.nx; ++n) out << "," << fmt(g.x_node(n));
    out << "\n";
    for (int k = 0; k <= g.nt; ++k) {
      out << fmt(g.t_node(k));
      for (int n = 0; n <= g.nx; ++n) out << "," << fmt(fields.at(i, k, n));
      out << "\n";
    }
  }
}

ValueFields read_fields_csv(const std::string& dir, int m) {
  std::vector<std::vector<std::vector<double>>> modes;
  std::vector<double> xs, ts;
  for (int i = 1; i <= m; ++i) {
    const std::string path = dir + "/u_mode" + std::to_string(i) + ".csv";
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": empty file");
    const auto header = split_doubles(line.substr(line.find(',') + 1));
    if (xs.empty()) xs = header;
    std::vector<std::vector<double>> rows;
    std::vector<double> times;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto vals = split_doubles(line);
      if (vals.size() != xs.size() + 1)
        throw std::invalid_argument(path + ": ragged row");
      times.push_back(vals[0]);
      rows.emplace_back(vals.begin() + 1, vals.end());
    }
    if (ts.empty()) ts = times;
    modes.push_back(std::move(rows));
  }
  Grid g;
  g.x_min = xs.front();
  g.x_max = xs.back();
  g.nx = static_cast<int>(xs.size()) - 1;
  g.t_max = ts.back();
  g.nt = static_cast<int>(ts.size()) - 1;
  ValueFields fields(g, m);
  for (int i = 1; i <= m; ++i)
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n <= g.nx; ++n) fields.at(i, k, n) = modes[i - 1][k][n];
  return fields;
}

void write_strategy_csv(const Strategy& strategy, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "time,mode\n";
  for (const auto& e : strategy.events) out << fmt(e.time) << "," << e.mode << "\n";
}

Strategy read_strategy_csv(const std::string& path, int start_mode) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open strategy file " + path);
  Strategy s;
  s.start_mode = start_mode;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.rfind("time", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    const auto vals = split_doubles(line);
    if (vals.size() != 2) throw std::invalid_argument(path + ": expected time,mode rows");
    s.events.push_back({vals[0], static_cast<int>(vals[1])});
  }
  return s;
}

ChainModel read_chain_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open chain file " + path);
  ChainModel chain;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": missing states row");
  chain.states = split_doubles(line);
  if (!std::getline(in, line)) throw std::invalid_argument(path + ": missing times row");
  chain.times = split_doubles(line);
  const int n = chain.n_states();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_doubles(line);
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument(path + ": transition row width mismatch");
    if (chain.transition.empty() ||
        static_cast<int>(chain.transition.back().size()) == n * n)
      chain.transition.emplace_back();
    auto& mat = chain.transition.back();
    mat.insert(mat.end(), row.begin(), row.end());
  }
  chain.check();
  return chain;
}

namespace {

int dispatch(const std::string& name, const Config& cfg, const RunOptions& opts,
             std::ostream& out, std::vector<std::string>& written) {
  const LevyTriplet tr = cfg.triplet();
  const Dynamics dyn = cfg.dynamics();
  const SwitchingSpec spec = cfg.switching();

  if (name == "validate") {
    const auto rep = run_all_validators(cfg, out);
    out << (rep.ok ? "validation passed\n" : "validation FAILED\n");
    return rep.ok ? 0 : 1;
  }

  if (name == "teugels") {
    const auto basis = build_basis(tr, cfg.n_max);
    out << "degenerate_rank," << basis.degenerate_rank() << "\n";
    out << "i,k,c_ik\n";
    for (int i = 1; i <= basis.n_max(); ++i)
      for (int k = 1; k <= i; ++k) out << i << "," << k << "," << fmt(basis.coeff(i, k)) << "\n";
    return 0;
  }

  if (name == "simulate") {
    fs::create_directories(opts.out_dir);
    const std::string path = opts.out_dir + "/paths.csv";
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot write " + path);
    written.push_back(path);
    file << "path,time,state,n_jumps\n";
    const auto grid_times = linspace(cfg.t0, cfg.grid.t_max, cfg.mc_steps + 1);
    for (int p = 0; p < cfg.mc_paths; ++p) {
      std::mt19937_64 rng(derive_seed(cfg.seed, p));
      const SimPath path_p = simulate_path(dyn, tr, cfg.t0, cfg.x0, grid_times, rng);
      for (std::size_t k = 0; k < path_p.times.size(); ++k) {
        const std::size_t nj = k == 0 ? 0 : path_p.steps[k - 1].jumps.size();
        file << p << "," << fmt(path_p.times[k]) << "," << fmt(path_p.states[k]) << "," << nj
             << "\n";
      }
    }
    out << "wrote " << cfg.mc_paths << " paths to " << path << "\n";
    return 0;
  }

  if (name == "solve" || name == "residual" || name == "evaluate" || name == "compare") {
    ValueFields fields;
    if (name == "residual" && !opts.fields_dir.empty()) {
      fields = read_fields_csv(opts.fields_dir, cfg.m);
    } else if (name == "evaluate" && !opts.fields_dir.empty()) {
      fields = read_fields_csv(opts.fields_dir, cfg.m);
    } else if (name != "evaluate" || opts.policy_file.empty()) {
      fields = run_solver(cfg);
    }

    if (name == "solve") {
      write_fields_csv(fields, opts.out_dir, &written);
      const double delta = fields.grid().delta > 0.0
                               ? fields.grid().delta
                               : default_delta(tr, fields.grid(), dyn.sigma_bound);
      const QuadTables quad = build_quadrature(tr, fields.grid(), delta);
      const auto rep = residual_check(fields, spec, dyn, tr, quad, cfg.solver.proj_tol);
      write_diagnostics(cfg, fields, rep, opts.out_dir + "/diagnostics.txt", &written);
      out << "solved " << cfg.m << " modes on " << cfg.grid.nt << "x" << cfg.grid.nx
          << "; residual max " << rep.max_min_abs << " (tol " << rep.residual_tol << ")\n";
      return rep.max_min_abs <= rep.residual_tol ? 0 : 2;
    }

    if (name == "residual") {
      const double delta = cfg.grid.delta > 0.0 ? cfg.grid.delta
                                                : default_delta(tr, fields.grid(), dyn.sigma_bound);
      const QuadTables quad = build_quadrature(tr, fields.grid(), delta);
      const auto rep = residual_check(fields, spec, dyn, tr, quad, cfg.solver.proj_tol);
      out << "residual_max = " << rep.max_min_abs << "\n";
      out << "residual_tol = " << rep.residual_tol << "\n";
      out << "min_r1 = " << rep.min_r1 << "\n";
      out << "max_r2_off_obstacle = " << rep.max_r2_off_obstacle << "\n";
      out << "active_fraction = " << rep.active_fraction << "\n";
      return rep.max_min_abs <= rep.residual_tol ? 0 : 2;
    }

    if (name == "evaluate") {
      McOptions mco;
      mco.t_max = cfg.grid.t_max;
      mco.n_steps = cfg.mc_steps;
      mco.switch_cap = cfg.switch_cap;
      McResult res;
      if (!opts.policy_file.empty()) {
        const Strategy s = read_strategy_csv(opts.policy_file, cfg.i0);
        res = mc_payoff(spec, dyn, tr, Policy::fixed(s), cfg.t0, cfg.x0, cfg.i0, cfg.mc_paths,
                        cfg.seed, mco);
      } else {
        const double stol = solver_switch_tol(cfg, fields);
        res = mc_payoff(spec, dyn, tr, Policy::from_fields(&fields, stol), cfg.t0, cfg.x0,
                        cfg.i0, cfg.mc_paths, cfg.seed, mco);
      }
      out << "mean = " << res.mean << "\n";
      out << "std_error = " << res.std_error << "\n";
      return 0;
    }

    // compare: solve + oracle + evaluate three-way table
    const ChainModel chain = build_chain(dyn, tr, cfg.oracle_state_grid(),
                                         cfg.oracle_time_grid(), {cfg.oracle_leak_tol});
    const DPResult dp = dp_solve(chain, spec);
    const double stol = solver_switch_tol(cfg, fields);
    McOptions mco;
    mco.switch_cap = cfg.switch_cap;
    if (spec.drivers_coupled) mco.coupling_fields = &fields;
    const McResult mc = mc_payoff(spec, dyn, tr, Policy::from_fields(&fields, stol), cfg.t0,
                                  cfg.x0, cfg.i0, cfg.mc_paths, cfg.seed, mco);
    out << "mode,x,grid_value,chain_value,gap\n";
    double worst_gap = 0.0;
    for (int i = 1; i <= cfg.m; ++i) {
      for (int s = 0; s < chain.n_states(); ++s) {
        const double v_chain = dp.v(i, 0, s);
        const double v_grid = fields.value(i, 0.0, chain.states[s]);
        const double gap = std::abs(v_grid - v_chain) / std::max(1.0, std::abs(v_chain));
        worst_gap = std::max(worst_gap, gap);
        out << i << "," << fmt(chain.states[s]) << "," << fmt(v_grid) << "," << fmt(v_chain)
            << "," << fmt(gap) << "\n";
      }
    }
    const double u0 = fields.value(cfg.i0, cfg.t0, cfg.x0);
    out << "grid u(t0, x0) = " << u0 << "\n";
    out << "mc mean = " << mc.mean << " +- " << mc.std_error << "\n";
    out << "worst relative gap = " << worst_gap << "\n";
    const double mc_gap = std::abs(mc.mean - u0);
    const double mc_tol = 3.0 * mc.std_error + residual_tolerance(fields);
    out << "mc gap = " << mc_gap << " (tol " << mc_tol << ")\n";
    const bool ok = worst_gap <= 0.02 && mc_gap <= mc_tol;
    out << (ok ? "compare passed\n" : "compare FAILED\n");
    return ok ? 0 : 2;
  }

  if (name == "oracle") {
    ChainModel chain;
    if (!opts.chain_file.empty()) {
      chain = read_chain_csv(opts.chain_file);
    } else {
      chain = build_chain(dyn, tr, cfg.oracle_state_grid(), cfg.oracle_time_grid(),
                          {cfg.oracle_leak_tol});
    }
    const DPResult dp = dp_solve(chain, spec);
    out << "mode,state,value\n";
    for (int i = 1; i <= cfg.m; ++i)
      for (int s = 0; s < chain.n_states(); ++s)
        out << i << "," << fmt(chain.states[s]) << "," << fmt(dp.v(i, 0, s)) << "\n";
    const int decisions = chain.n_steps() * chain.n_states() * cfg.m;
    const double policies = std::pow(static_cast<double>(cfg.m), decisions);
    if (!spec.drivers_coupled && policies <= 1e7) {
      const auto enumr = enumerate_strategies(chain, spec);
      double worst = 0.0;
      for (int i = 1; i <= cfg.m; ++i)
        for (int s = 0; s < chain.n_states(); ++s)
          worst = std::max(worst,
                           std::abs(dp.v(i, 0, s) - enumr.best[(i - 1) * chain.n_states() + s]));
      out << "enumeration_gap = " << fmt(worst) << " over "
          << static_cast<long long>(enumr.policies_evaluated) << " policies\n";
      return worst <= 1e-12 ? 0 : 2;
    }
    out << "enumeration skipped (guard or coupled drivers)\n";
    return 0;
  }

  out << "unknown subcommand '" << name << "'\n";
  return 3;
}

}  // namespace

int run_subcommand(const std::string& name, const Config& cfg, const RunOptions& opts,
                   std::ostream& out) {
  std::vector<std::string> written;
  try {
    return dispatch(name, cfg, opts, out, written);
  } catch (const std::invalid_argument& e) {
    for (const auto& p : written) fs::remove(p);
    out << "usage error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    for (const auto& p : written) fs::remove(p);
    const std::string msg = e.what();
    out << "error: " << msg << "\n";
    return msg.find("validation failed") != std::string::npos ? 1 : 2;
  }
}

}  // namespace oswitch
