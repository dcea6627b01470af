#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <sstream>

#include "oswitch/config.hpp"
#include "oswitch/dp.hpp"
#include "oswitch/ipde.hpp"
#include "oswitch/runner.hpp"
#include "oswitch/teugels.hpp"

namespace py = pybind11;
using namespace oswitch;

namespace {

Config config_from_text(const std::string& text) { return parse_config(text); }

std::vector<std::vector<std::vector<double>>> fields_to_nested(const ValueFields& f) {
  const Grid& g = f.grid();
  std::vector<std::vector<std::vector<double>>> out(
      f.modes(), std::vector<std::vector<double>>(g.nt + 1, std::vector<double>(g.nx + 1)));
  for (int i = 1; i <= f.modes(); ++i)
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n <= g.nx; ++n) out[i - 1][k][n] = f.at(i, k, n);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Optimal multi-mode switching under Levy noise: solvers and oracles";

  py::class_<Grid>(m, "Grid")
      .def(py::init<>())
      .def_readwrite("t_max", &Grid::t_max)
      .def_readwrite("nt", &Grid::nt)
      .def_readwrite("x_min", &Grid::x_min)
      .def_readwrite("x_max", &Grid::x_max)
      .def_readwrite("nx", &Grid::nx)
      .def_readwrite("delta", &Grid::delta);

  py::class_<SolveDiagnostics>(m, "SolveDiagnostics")
      .def_readonly("outer_iterations", &SolveDiagnostics::outer_iterations)
      .def_readonly("outer_diffs", &SolveDiagnostics::outer_diffs)
      .def_readonly("contraction_factors", &SolveDiagnostics::contraction_factors)
      .def_readonly("leak_mass", &SolveDiagnostics::leak_mass)
      .def_readonly("transformed", &SolveDiagnostics::transformed)
      .def_readonly("obstacle_active_fraction", &SolveDiagnostics::obstacle_active_fraction);

  py::class_<ValueFields>(m, "ValueFields")
      .def("grid", &ValueFields::grid)
      .def("modes", &ValueFields::modes)
      .def("value", &ValueFields::value, py::arg("mode"), py::arg("t"), py::arg("x"))
      .def("to_list", &fields_to_nested)
      .def_readonly("diagnostics", &ValueFields::diagnostics);

  py::class_<Config>(m, "Config")
      .def_static("parse", &config_from_text, py::arg("text"))
      .def("render", &render_config)
      .def_readonly("m", &Config::m)
      .def_readonly("scheme", &Config::scheme)
      .def_readonly("seed", &Config::seed);

  m.def("char_exponent",
        [](const Config& cfg, double theta) { return char_exponent(cfg.triplet(), theta); },
        py::arg("config"), py::arg("theta"));

  m.def("mean_l1", [](const Config& cfg) { return mean_l1(cfg.triplet()); });

  m.def("basis_table", [](const Config& cfg) {
    const auto basis = build_basis(cfg.triplet(), cfg.n_max);
    std::vector<std::vector<double>> rows(basis.n_max());
    for (int i = 1; i <= basis.n_max(); ++i)
      for (int k = 1; k <= i; ++k) rows[i - 1].push_back(basis.coeff(i, k));
    return py::make_tuple(basis.degenerate_rank(), rows);
  });

  m.def("solve", [](const Config& cfg) {
    const SwitchingSpec spec = cfg.switching();
    SolveOptions opts = cfg.solver;
    opts.delta_override = cfg.grid.delta;
    if (cfg.scheme == "picard")
      return solve_picard(spec, cfg.dynamics(), cfg.triplet(), cfg.grid, opts);
    return solve_monotone(spec, cfg.dynamics(), cfg.triplet(), cfg.grid, opts);
  });

  m.def("residual", [](const Config& cfg, const ValueFields& fields) {
    const Dynamics dyn = cfg.dynamics();
    const LevyTriplet tr = cfg.triplet();
    const double delta = fields.grid().delta > 0.0
                             ? fields.grid().delta
                             : default_delta(tr, fields.grid(), dyn.sigma_bound);
    const QuadTables quad = build_quadrature(tr, fields.grid(), delta);
    const auto rep = residual_check(fields, cfg.switching(), dyn, tr, quad, cfg.solver.proj_tol);
    py::dict d;
    d["max_min_abs"] = rep.max_min_abs;
    d["min_r1"] = rep.min_r1;
    d["max_r2_off_obstacle"] = rep.max_r2_off_obstacle;
    d["active_fraction"] = rep.active_fraction;
    d["residual_tol"] = rep.residual_tol;
    return d;
  });

  m.def("oracle_values", [](const Config& cfg) {
    const ChainModel chain = build_chain(cfg.dynamics(), cfg.triplet(), cfg.oracle_state_grid(),
                                         cfg.oracle_time_grid(), {cfg.oracle_leak_tol});
    const DPResult dp = dp_solve(chain, cfg.switching());
    std::vector<std::vector<double>> values(cfg.m, std::vector<double>(chain.n_states()));
    for (int i = 1; i <= cfg.m; ++i)
      for (int s = 0; s < chain.n_states(); ++s) values[i - 1][s] = dp.v(i, 0, s);
    return py::make_tuple(chain.states, values);
  });

  m.def("evaluate", [](const Config& cfg, const ValueFields& fields) {
    const ValueFields* f = &fields;
    McOptions mco;
    mco.switch_cap = cfg.switch_cap;
    const SwitchingSpec spec = cfg.switching();
    if (spec.drivers_coupled) mco.coupling_fields = f;
    const double stol =
        cfg.switch_tol > 0.0 ? cfg.switch_tol : 2.0 * residual_tolerance(fields);
    const McResult res = mc_payoff(spec, cfg.dynamics(), cfg.triplet(),
                                   Policy::from_fields(f, stol), cfg.t0, cfg.x0, cfg.i0,
                                   cfg.mc_paths, cfg.seed, mco);
    return py::make_tuple(res.mean, res.std_error);
  });

  m.def("run_subcommand", [](const std::string& name, const Config& cfg,
                             const std::string& out_dir) {
    RunOptions opts;
    opts.out_dir = out_dir;
    std::ostringstream out;
    const int code = run_subcommand(name, cfg, opts, out);
    return py::make_tuple(code, out.str());
  });
}
