#include "oswitch/ipde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "oswitch/numerics.hpp"

namespace oswitch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamped_interp(std::span<const double> u, const Grid& grid, double x) {
  const double fx = (x - grid.x_min) / grid.dx();
  if (fx <= 0.0) return u.front();
  if (fx >= grid.nx) return u.back();
  const int n0 = static_cast<int>(fx);
  const double w = fx - n0;
  return (1.0 - w) * u[n0] + w * u[n0 + 1];
}

/// Per-solve cached data: coefficient tables and the operator constants.
struct Workspace {
  Grid grid;
  double mean = 0.0;     // E[L_1]
  double j1 = 0.0;       // sum w_q y_q
  double s2 = 0.0;       // small-jump second moment
  double varpi2 = 0.0;
  const QuadTables* quad = nullptr;
  std::vector<double> sig;  // sigma(t_k, x_n), k-major, k = 0..nt-1
  std::vector<double> bco;  // b(t_k, x_n)
  std::vector<double> xs;

  double sigma(int k, int n) const { return sig[static_cast<std::size_t>(k) * (grid.nx + 1) + n]; }
  double bval(int k, int n) const { return bco[static_cast<std::size_t>(k) * (grid.nx + 1) + n]; }
  double adv(int k, int n) const { return mean * sigma(k, n) + bval(k, n) - sigma(k, n) * j1; }
  double dif(int k, int n) const {
    const double s = sigma(k, n);
    return 0.5 * s * s * (varpi2 + s2);
  }
};

Workspace make_workspace(const Grid& grid, const Dynamics& dyn, const LevyTriplet& levy,
                         const QuadTables& quad) {
  Workspace ws;
  ws.grid = grid;
  ws.mean = mean_l1(levy);
  ws.j1 = quad.node_first_moment;
  ws.s2 = quad.small_sq;
  ws.varpi2 = levy.varpi * levy.varpi;
  ws.quad = &quad;
  ws.xs.resize(grid.nx + 1);
  for (int n = 0; n <= grid.nx; ++n) ws.xs[n] = grid.x_node(n);
  ws.sig.resize(static_cast<std::size_t>(grid.nt) * (grid.nx + 1));
  ws.bco.resize(ws.sig.size());
  for (int k = 0; k < grid.nt; ++k) {
    const double t = grid.t_node(k);
    for (int n = 0; n <= grid.nx; ++n) {
      ws.sig[static_cast<std::size_t>(k) * (grid.nx + 1) + n] = dyn.eval_sigma(t, ws.xs[n]);
      ws.bco[static_cast<std::size_t>(k) * (grid.nx + 1) + n] = dyn.eval_b(t, ws.xs[n]);
    }
  }
  return ws;
}

/// A_loc u at one node with the scheme's own upwind/boundary stencils; the
/// tail first moment is folded into the drift.
double local_operator_node(const Workspace& ws, std::span<const double> u, int k, int n) {
  const Grid& g = ws.grid;
  const double dx = g.dx();
  const double a = ws.adv(k, n);
  if (n == 0) return a * (u[1] - u[0]) / dx;
  if (n == g.nx) return a * (u[g.nx] - u[g.nx - 1]) / dx;
  const double d = ws.dif(k, n);
  double acc = d * (u[n - 1] - 2.0 * u[n] + u[n + 1]) / (dx * dx);
  if (a >= 0.0) acc += a * (u[n + 1] - u[n]) / dx;
  else acc += a * (u[n] - u[n - 1]) / dx;
  return acc;
}

/// Explicit tail-jump remainder sum w_q [u~(x + sigma y_q) - u(x)].
void nonlocal_remainder(const Workspace& ws, std::span<const double> u_next, int k,
                        std::span<double> out) {
  const Grid& g = ws.grid;
  for (int n = 0; n <= g.nx; ++n) {
    const double s = ws.sigma(k, n);
    double acc = 0.0;
    for (const QuadNode& q : ws.quad->nodes) {
      acc += q.w * (clamped_interp(u_next, g, ws.xs[n] + s * q.y) - u_next[n]);
    }
    out[n] = acc;
  }
}

struct TriRows {
  std::vector<double> lower, diag, upper;
};

/// Rows of (I - dt A_loc) at time level k.
TriRows build_rows(const Workspace& ws, int k, double dt) {
  const Grid& g = ws.grid;
  const double dx = g.dx();
  const int nn = g.nx + 1;
  TriRows rows;
  rows.lower.assign(nn, 0.0);
  rows.diag.assign(nn, 0.0);
  rows.upper.assign(nn, 0.0);
  for (int n = 1; n < g.nx; ++n) {
    const double a = ws.adv(k, n);
    const double d = ws.dif(k, n);
    const double ap = std::max(a, 0.0), am = std::max(-a, 0.0);
    rows.lower[n] = -dt * (d / (dx * dx) + am / dx);
    rows.upper[n] = -dt * (d / (dx * dx) + ap / dx);
    rows.diag[n] = 1.0 + dt * (2.0 * d / (dx * dx) + std::abs(a) / dx);
  }
  // one-sided first differences into the domain, no diffusion row at the edge
  const double a0 = ws.adv(k, 0);
  rows.diag[0] = 1.0 + dt * a0 / dx;
  rows.upper[0] = -dt * a0 / dx;
  const double an = ws.adv(k, g.nx);
  rows.diag[g.nx] = 1.0 - dt * an / dx;
  rows.lower[g.nx] = dt * an / dx;
  if (std::abs(rows.diag[0]) < 0.1 || std::abs(rows.diag[g.nx]) < 0.1)
    throw std::runtime_error("boundary row lost dominance; reduce dt or widen the domain");
  return rows;
}

std::vector<double> imex_solve(const TriRows& rows, std::vector<double> rhs) {
  std::vector<double> diag = rows.diag;
  solve_tridiagonal(rows.lower, diag, rows.upper, rhs);
  return rhs;
}

void entry_checks(const SwitchingSpec& spec, const Dynamics& dyn, const Grid& grid,
                  const SolveOptions& opts, double t_max) {
  spec.check();
  grid.check();
  std::vector<std::pair<double, double>> pts;
  const int stride = std::max(1, grid.nx / 64);
  for (double t : {0.0, 0.5 * t_max, t_max})
    for (int n = 0; n <= grid.nx; n += stride) pts.emplace_back(t, grid.x_node(n));
  const auto loop = validate_no_free_loop(spec, pts, opts.cycle_tol);
  if (!loop.ok) throw std::runtime_error("no-free-loop validation failed: " + loop.summary());
  std::vector<double> xs(grid.nx + 1);
  for (int n = 0; n <= grid.nx; ++n) xs[n] = grid.x_node(n);
  const auto cons = validate_consistency(spec, t_max, xs);
  if (!cons.ok) throw std::runtime_error("consistency validation failed: " + cons.summary());
  const auto coup = validate_driver_coupling(spec, t_max, grid.x_min, grid.x_max);
  if (!coup.ok) throw std::runtime_error("driver coupling validation failed: " + coup.summary());
  const auto dynrep = probe_dynamics(dyn, 0.0, t_max, grid.x_min, grid.x_max);
  if (!dynrep.ok) throw std::runtime_error("dynamics validation failed: " + dynrep.summary());
}

double leak_at_probes(const Workspace& ws) {
  const Grid& g = ws.grid;
  const double mid = 0.5 * (g.x_min + g.x_max);
  const double quarter = 0.25 * (g.x_max - g.x_min);
  double worst = 0.0;
  for (int n = 0; n <= g.nx; ++n) {
    if (std::abs(ws.xs[n] - mid) > quarter) continue;
    const double s = ws.sigma(0, n);
    double leak = 0.0;
    for (const QuadNode& q : ws.quad->nodes) {
      const double target = ws.xs[n] + s * q.y;
      if (target < g.x_min || target > g.x_max) leak += q.w;
    }
    worst = std::max(worst, leak);
  }
  return worst;
}

double resolve_delta(const LevyTriplet& levy, const Grid& grid, const Dynamics& dyn,
                     const SolveOptions& opts) {
  if (opts.delta_override > 0.0) return opts.delta_override;
  return default_delta(levy, grid, dyn.sigma_bound);
}

double sup_diff(const ValueFields& a, const ValueFields& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

/// Final simultaneous feasibility pass over interior time slices; terminal
/// values are h exactly and stay untouched. Returns the active fraction.
double final_projection(ValueFields& u, const SwitchingSpec& spec, double proj_tol) {
  const Grid& g = u.grid();
  if (spec.m < 2) return 0.0;
  std::size_t active = 0, seen = 0;
  std::vector<double> v(spec.m);
  for (int k = 0; k < g.nt; ++k) {
    const double t = g.t_node(k);
    for (int n = 0; n <= g.nx; ++n) {
      const double x = g.x_node(n);
      for (int i = 1; i <= spec.m; ++i) v[i - 1] = u.at(i, k, n);
      obstacle_project(v, [&](int i, int j) { return spec.cost(i, j, t, x); }, proj_tol);
      for (int i = 1; i <= spec.m; ++i) {
        double obstacle = -kInf;
        for (int j = 1; j <= spec.m; ++j)
          if (j != i) obstacle = std::max(obstacle, v[j - 1] - spec.cost(i, j, t, x));
        ++seen;
        if (v[i - 1] <= obstacle + 10.0 * proj_tol) ++active;
        u.at(i, k, n) = v[i - 1];
      }
    }
  }
  return seen ? static_cast<double>(active) / seen : 0.0;
}

}  // namespace

double default_delta(const LevyTriplet& levy, const Grid& grid, double sigma_max) {
  const double dx = grid.dx();
  double delta = sigma_max > 0.0 ? 4.0 * dx / sigma_max : 4.0 * dx;
  if (levy.measure.kind() != MeasureKind::kAtoms) return delta;
  const double floor = sigma_max > 0.0 ? 2.0 * dx / sigma_max : 0.0;
  for (int pass = 0; pass < static_cast<int>(levy.measure.atoms().size()) + 2; ++pass) {
    bool conflict = false;
    for (const Atom& a : levy.measure.atoms()) {
      const double loc = std::abs(a.location);
      if (loc >= 0.9 * delta && loc <= 1.1 * delta) {
        const double down = loc / 1.11;
        delta = (down >= floor) ? down : loc / 0.89;
        conflict = true;
      }
    }
    if (!conflict) return delta;
  }
  throw std::runtime_error("could not separate the jump-split radius from the atom locations");
}

QuadTables build_quadrature(const LevyTriplet& levy, const Grid& grid, double delta) {
  grid.check();
  if (!(delta > 0.0)) throw std::invalid_argument("build_quadrature: delta must be positive");
  QuadTables tab;
  tab.delta = delta;
  const JumpMeasure& m = levy.measure;
  switch (m.kind()) {
    case MeasureKind::kNone: break;
    case MeasureKind::kAtoms:
      for (const Atom& a : m.atoms()) {
        if (std::abs(a.location) > delta) tab.nodes.push_back({a.location, a.mass});
        else tab.small_sq += a.mass * a.location * a.location;
      }
      break;
    case MeasureKind::kDensity: {
      tab.small_sq = m.truncated_square(delta);
      const double cut = m.truncation();
      const int per_panel = std::max(8, m.density().base_nodes);
      // geometric panels resolve the exponential tails
      for (int side = 0; side < 2; ++side) {
        const double sign = side == 0 ? 1.0 : -1.0;
        double lo = delta;
        const int n_panels = 6;
        for (int p = 0; p < n_panels && lo < cut; ++p) {
          double hi = (p + 1 == n_panels) ? cut : std::min(cut, lo * 2.0 + delta);
          const auto& rule = gauss_legendre(per_panel);
          const double midp = 0.5 * (lo + hi), hw = 0.5 * (hi - lo);
          for (int q = 0; q < per_panel; ++q) {
            const double y = sign * (midp + hw * rule.nodes[q]);
            const double w = hw * rule.weights[q] * m.density_at(y);
            if (w > 0.0) tab.nodes.push_back({y, w});
          }
          lo = hi;
        }
      }
      break;
    }
  }
  for (const QuadNode& q : tab.nodes) {
    tab.node_mass += q.w;
    tab.node_first_moment += q.w * q.y;
    tab.node_second_moment += q.w * q.y * q.y;
  }
  return tab;
}

std::vector<double> apply_local(std::span<const double> u_slice, const Grid& grid,
                                const Dynamics& dyn, const LevyTriplet& levy, double t) {
  grid.check();
  const double dx = grid.dx();
  const double mean = mean_l1(levy);
  const double varpi2 = levy.varpi * levy.varpi;
  std::vector<double> out(grid.nx + 1, 0.0);
  for (int n = 0; n <= grid.nx; ++n) {
    const double x = grid.x_node(n);
    const double a = mean * dyn.eval_sigma(t, x) + dyn.eval_b(t, x);
    if (n == 0) {
      out[n] = a * (u_slice[1] - u_slice[0]) / dx;
      continue;
    }
    if (n == grid.nx) {
      out[n] = a * (u_slice[grid.nx] - u_slice[grid.nx - 1]) / dx;
      continue;
    }
    const double s = dyn.eval_sigma(t, x);
    double acc = 0.5 * s * s * varpi2 * (u_slice[n - 1] - 2.0 * u_slice[n] + u_slice[n + 1]) /
                 (dx * dx);
    if (a >= 0.0) acc += a * (u_slice[n + 1] - u_slice[n]) / dx;
    else acc += a * (u_slice[n] - u_slice[n - 1]) / dx;
    out[n] = acc;
  }
  return out;
}

std::vector<double> apply_nonlocal(std::span<const double> u_slice, const Grid& grid,
                                   const QuadTables& quad, const Dynamics& dyn, double t,
                                   double* leak) {
  grid.check();
  const double dx = grid.dx();
  std::vector<double> out(grid.nx + 1, 0.0);
  double worst_leak = 0.0;
  for (int n = 0; n <= grid.nx; ++n) {
    const double x = grid.x_node(n);
    const double s = dyn.eval_sigma(t, x);
    // Taylor surrogate for the small-jump part
    double d2;
    if (n == 0 || n == grid.nx) d2 = 0.0;
    else d2 = (u_slice[n - 1] - 2.0 * u_slice[n] + u_slice[n + 1]) / (dx * dx);
    double acc = 0.5 * s * s * quad.small_sq * d2;
    // slope for the compensator of the tail part
    double slope;
    if (n == 0) slope = (u_slice[1] - u_slice[0]) / dx;
    else if (n == grid.nx) slope = (u_slice[grid.nx] - u_slice[grid.nx - 1]) / dx;
    else slope = (u_slice[n + 1] - u_slice[n - 1]) / (2.0 * dx);
    double node_leak = 0.0;
    for (const QuadNode& q : quad.nodes) {
      const double target = x + s * q.y;
      acc += q.w * (clamped_interp(u_slice, grid, target) - u_slice[n] - slope * s * q.y);
      if (target < grid.x_min || target > grid.x_max) node_leak += q.w;
    }
    worst_leak = std::max(worst_leak, node_leak);
    out[n] = acc;
  }
  if (leak != nullptr) *leak = worst_leak;
  return out;
}

int obstacle_project(std::span<double> values, const std::function<double(int, int)>& cost,
                     double proj_tol) {
  const int m = static_cast<int>(values.size());
  if (m < 2) return 0;
  std::vector<bool> raised(m, false);
  for (int sweep = 0; sweep <= m; ++sweep) {
    double worst_increase = 0.0;
    for (int i = 1; i <= m; ++i) {
      double obstacle = -kInf;
      for (int j = 1; j <= m; ++j) {
        if (j == i) continue;
        obstacle = std::max(obstacle, values[j - 1] - cost(i, j));
      }
      if (obstacle > values[i - 1]) {
        worst_increase = std::max(worst_increase, obstacle - values[i - 1]);
        values[i - 1] = obstacle;
        raised[i - 1] = true;
      }
    }
    if (worst_increase <= proj_tol) {
      int count = 0;
      for (bool r : raised)
        if (r) ++count;
      return count;
    }
  }
  throw std::runtime_error(
      "obstacle projection did not settle in m+1 sweeps (non-free-loop violated numerically)");
}

double residual_tolerance(const ValueFields& fields) {
  double scale = 1.0;
  for (double v : fields.data()) scale = std::max(scale, std::abs(v));
  const Grid& g = fields.grid();
  return 10.0 * (g.dx() * g.dx() + g.dt()) * scale;
}

std::vector<std::vector<double>> step_backward(
    const std::vector<std::vector<double>>& fields_next,
    const std::vector<std::vector<double>>& coupling_values, const SwitchingSpec& spec,
    const Grid& grid, const QuadTables& quad, const Dynamics& dyn, const LevyTriplet& levy,
    double t_k, double proj_tol) {
  spec.check();
  const int nn = grid.nx + 1;
  if (static_cast<int>(fields_next.size()) != spec.m ||
      static_cast<int>(coupling_values.size()) != spec.m)
    throw std::invalid_argument("step_backward: need one slice per mode");
  const double dt = grid.dt();
  if (dt * quad.node_mass > 1.0)
    throw std::runtime_error(
        "explicit nonlocal part violates stability (dt * tail mass > 1); reduce dt");
  // Workspace for a single level: reuse the solver machinery with nt = 1.
  Grid level = grid;
  level.nt = 1;
  level.t_max = dt;
  Workspace ws = make_workspace(level, dyn, levy, quad);
  // overwrite the k = 0 row with coefficients at t_k
  for (int n = 0; n < nn; ++n) {
    ws.sig[n] = dyn.eval_sigma(t_k, grid.x_node(n));
    ws.bco[n] = dyn.eval_b(t_k, grid.x_node(n));
  }
  const TriRows rows = build_rows(ws, 0, dt);
  std::vector<std::vector<double>> out(spec.m, std::vector<double>(nn, 0.0));
  std::vector<double> nonloc(nn), ybar(spec.m);
  for (int i = 1; i <= spec.m; ++i) {
    nonlocal_remainder(ws, fields_next[i - 1], 0, nonloc);
    std::vector<double> rhs(nn);
    for (int n = 0; n < nn; ++n) {
      for (int j = 1; j <= spec.m; ++j) ybar[j - 1] = coupling_values[j - 1][n];
      rhs[n] = fields_next[i - 1][n] +
               dt * (nonloc[n] + spec.driver(i, t_k, grid.x_node(n), ybar));
    }
    out[i - 1] = imex_solve(rows, std::move(rhs));
  }
  if (spec.m >= 2) {
    std::vector<double> v(spec.m);
    for (int n = 0; n < nn; ++n) {
      const double x = grid.x_node(n);
      for (int i = 0; i < spec.m; ++i) v[i] = out[i][n];
      obstacle_project(v, [&](int i, int j) { return spec.cost(i, j, t_k, x); }, proj_tol);
      for (int i = 0; i < spec.m; ++i) out[i][n] = v[i];
    }
  }
  return out;
}

namespace {

/// Envelope solves (3.28)-(3.29): obstacle-free fields with min/max data.
std::vector<std::vector<double>> solve_envelope(const Workspace& ws, const SwitchingSpec& spec,
                                                bool upper) {
  const Grid& g = ws.grid;
  const int nn = g.nx + 1;
  const double dt = g.dt();
  std::vector<std::vector<double>> field(g.nt + 1, std::vector<double>(nn, 0.0));
  for (int n = 0; n < nn; ++n) {
    double v = upper ? -kInf : kInf;
    for (int j = 1; j <= spec.m; ++j) {
      const double hj = spec.terminal(j, ws.xs[n]);
      v = upper ? std::max(v, hj) : std::min(v, hj);
    }
    field[g.nt][n] = v;
  }
  std::vector<double> nonloc(nn), ybar(spec.m);
  for (int k = g.nt - 1; k >= 0; --k) {
    const TriRows rows = build_rows(ws, k, dt);
    nonlocal_remainder(ws, field[k + 1], k, nonloc);
    std::vector<double> rhs(nn);
    for (int n = 0; n < nn; ++n) {
      std::fill(ybar.begin(), ybar.end(), field[k + 1][n]);
      double f = upper ? -kInf : kInf;
      for (int j = 1; j <= spec.m; ++j) {
        const double fj = spec.driver(j, g.t_node(k), ws.xs[n], ybar);
        f = upper ? std::max(f, fj) : std::min(f, fj);
      }
      rhs[n] = field[k + 1][n] + dt * (nonloc[n] + f);
    }
    field[k] = imex_solve(rows, std::move(rhs));
  }
  return field;
}

}  // namespace

ValueFields solve_monotone(const SwitchingSpec& spec, const Dynamics& dyn,
                           const LevyTriplet& levy, const Grid& grid, const SolveOptions& opts) {
  if (spec.coupling == Coupling::kNonincreasing)
    throw std::invalid_argument(
        "solve_monotone requires nondecreasing (or absent) coupling; use solve_picard");
  entry_checks(spec, dyn, grid, opts, grid.t_max);
  Grid g = grid;
  g.delta = resolve_delta(levy, grid, dyn, opts);
  const QuadTables quad = build_quadrature(levy, g, g.delta);
  if (dyn.sigma_bound * g.delta < 2.0 * g.dx() - 1e-12 &&
      levy.measure.kind() != MeasureKind::kNone)
    throw std::invalid_argument("jump-split radius too small: sigma_max * delta < 2 dx");
  const double dt = g.dt();
  if (dt * quad.node_mass > 1.0)
    throw std::runtime_error(
        "explicit nonlocal part violates stability (dt * tail mass > 1); reduce dt");
  const Workspace ws = make_workspace(g, dyn, levy, quad);
  const double leak = leak_at_probes(ws);
  if (leak > opts.leak_tol)
    throw std::runtime_error("nonlocal boundary leak " + std::to_string(leak) +
                             " exceeds the tolerance; widen the x-domain");

  const int nn = g.nx + 1;
  double cmax = 0.0;
  for (double c : spec.lipschitz_y) cmax = std::max(cmax, c);

  // Iterate 0: the lower envelope in every mode slot.
  const auto lower = solve_envelope(ws, spec, /*upper=*/false);
  const auto upper = solve_envelope(ws, spec, /*upper=*/true);
  ValueFields prev(g, spec.m);
  for (int i = 1; i <= spec.m; ++i)
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n < nn; ++n) prev.at(i, k, n) = lower[k][n];

  ValueFields cur(g, spec.m);
  ValueFields out(g, spec.m);
  double scale = 1.0;
  for (int n = 0; n < nn; ++n)
    for (int i = 1; i <= spec.m; ++i)
      scale = std::max(scale, std::abs(spec.terminal(i, ws.xs[n])));

  SolveDiagnostics diag;
  diag.min_iterate_increment = 0.0;
  double min_inc_seen = kInf;
  bool converged = false;
  std::vector<double> nonloc(nn), ybar(spec.m);
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    for (int i = 1; i <= spec.m; ++i) {
      for (int n = 0; n < nn; ++n) cur.at(i, g.nt, n) = spec.terminal(i, ws.xs[n]);
      for (int k = g.nt - 1; k >= 0; --k) {
        const double t = g.t_node(k);
        const TriRows rows = build_rows(ws, k, dt);
        std::vector<double> next(nn);
        for (int n = 0; n < nn; ++n) next[n] = cur.at(i, k + 1, n);
        nonlocal_remainder(ws, next, k, nonloc);
        std::vector<double> rhs(nn);
        for (int n = 0; n < nn; ++n) {
          for (int j = 1; j <= spec.m; ++j)
            ybar[j - 1] = (j == i) ? cur.at(i, k + 1, n) : prev.at(j, k + 1, n);
          rhs[n] = next[n] + dt * (nonloc[n] + spec.driver(i, t, ws.xs[n], ybar));
        }
        std::vector<double> slice = imex_solve(rows, std::move(rhs));
        if (spec.m >= 2) {
          for (int n = 0; n < nn; ++n) {
            double obstacle = -kInf;
            for (int j = 1; j <= spec.m; ++j) {
              if (j == i) continue;
              obstacle = std::max(obstacle, prev.at(j, k, n) - spec.cost(i, j, t, ws.xs[n]));
            }
            slice[n] = std::max(slice[n], obstacle);
          }
        }
        for (int n = 0; n < nn; ++n) cur.at(i, k, n) = slice[n];
      }
    }
    double diff = 0.0, min_inc = kInf;
    for (std::size_t idx = 0; idx < cur.data().size(); ++idx) {
      const double d = cur.data()[idx] - prev.data()[idx];
      diff = std::max(diff, std::abs(d));
      min_inc = std::min(min_inc, d);
    }
    diag.outer_diffs.push_back(diff);
    if (diag.outer_diffs.size() >= 2) {
      const double prev_diff = diag.outer_diffs[diag.outer_diffs.size() - 2];
      if (prev_diff > 0.0) diag.contraction_factors.push_back(diff / prev_diff);
    }
    min_inc_seen = std::min(min_inc_seen, min_inc);
    // explicit own-slot coupling can dent monotonicity by O(dt * C * diff)
    const double ord_tol = 10.0 * dt * (1.0 + cmax) * (diff + opts.outer_tol) + 1e-12 * scale;
    if (min_inc < -ord_tol)
      throw std::runtime_error("monotone iterate ordering violated by " +
                               std::to_string(-min_inc) +
                               " (coupling not nondecreasing, or a scheme bug)");
    prev.data() = cur.data();
    diag.outer_iterations = outer;
    if (diff < opts.outer_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error("monotone iteration did not converge in " +
                             std::to_string(opts.max_outer) + " sweeps");
  // record the envelope-bound slack as a diagnostic
  double upper_slack = 0.0;
  for (int i = 1; i <= spec.m; ++i)
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n < nn; ++n)
        upper_slack = std::max(upper_slack, prev.at(i, k, n) - upper[k][n]);
  out = prev;
  out.diagnostics = diag;
  out.diagnostics.min_iterate_increment = min_inc_seen;
  out.diagnostics.upper_envelope_slack = upper_slack;
  out.diagnostics.leak_mass = leak;
  out.diagnostics.obstacle_active_fraction = final_projection(out, spec, opts.proj_tol);
  return out;
}

ValueFields solve_picard(const SwitchingSpec& spec, const Dynamics& dyn, const LevyTriplet& levy,
                         const Grid& grid, const SolveOptions& opts) {
  entry_checks(spec, dyn, grid, opts, grid.t_max);
  Grid g = grid;
  g.delta = resolve_delta(levy, grid, dyn, opts);
  const QuadTables quad = build_quadrature(levy, g, g.delta);
  if (dyn.sigma_bound * g.delta < 2.0 * g.dx() - 1e-12 &&
      levy.measure.kind() != MeasureKind::kNone)
    throw std::invalid_argument("jump-split radius too small: sigma_max * delta < 2 dx");
  const double dt = g.dt();
  if (dt * quad.node_mass > 1.0)
    throw std::runtime_error(
        "explicit nonlocal part violates stability (dt * tail mass > 1); reduce dt");
  const Workspace ws = make_workspace(g, dyn, levy, quad);
  const double leak = leak_at_probes(ws);
  if (leak > opts.leak_tol)
    throw std::runtime_error("nonlocal boundary leak " + std::to_string(leak) +
                             " exceeds the tolerance; widen the x-domain");

  const bool transform = spec.coupling == Coupling::kNonincreasing;
  double lambda = 0.0;
  SwitchingSpec work = spec;
  if (transform) {
    if (spec.drivers_coupled && spec.lipschitz_y.empty())
      throw std::invalid_argument(
          "nonincreasing coupling requires declared lipschitz_y constants");
    double cmax = 0.0;
    for (double c : spec.lipschitz_y) cmax = std::max(cmax, c);
    lambda = spec.m * (1.0 + cmax);
    const double t_max = g.t_max;
    work.drivers.clear();
    work.costs.clear();
    work.terminals.clear();
    for (int i = 1; i <= spec.m; ++i) {
      work.drivers.push_back([&spec, i, lambda](double t, double x, std::span<const double> y) {
        std::vector<double> scaled(y.size());
        const double down = std::exp(-lambda * t);
        for (std::size_t k = 0; k < y.size(); ++k) scaled[k] = down * y[k];
        return std::exp(lambda * t) * spec.driver(i, t, x, scaled) - lambda * y[i - 1];
      });
      work.terminals.push_back(
          [&spec, i, lambda, t_max](double x) { return std::exp(lambda * t_max) * spec.terminal(i, x); });
    }
    work.costs.assign(spec.m, std::vector<CostFn>(spec.m));
    for (int i = 1; i <= spec.m; ++i)
      for (int j = 1; j <= spec.m; ++j)
        if (i != j)
          work.costs[i - 1][j - 1] = [&spec, i, j, lambda](double t, double x) {
            return std::exp(lambda * t) * spec.cost(i, j, t, x);
          };
    work.drivers_coupled = true;
  }

  const int nn = g.nx + 1;
  ValueFields gamma(g, spec.m);  // frozen coupling argument, starts at zero
  ValueFields cur(g, spec.m);
  SolveDiagnostics diag;
  diag.transformed = transform;
  diag.transform_lambda = lambda;
  bool converged = false;
  int rho_bad_streak = 0;
  std::vector<double> nonloc(nn), ybar(spec.m), v(spec.m);
  for (int outer = 1; outer <= opts.max_outer; ++outer) {
    for (int i = 1; i <= spec.m; ++i)
      for (int n = 0; n < nn; ++n) cur.at(i, g.nt, n) = work.terminal(i, ws.xs[n]);
    for (int k = g.nt - 1; k >= 0; --k) {
      const double t = g.t_node(k);
      const TriRows rows = build_rows(ws, k, dt);
      for (int i = 1; i <= spec.m; ++i) {
        std::vector<double> next(nn);
        for (int n = 0; n < nn; ++n) next[n] = cur.at(i, k + 1, n);
        nonlocal_remainder(ws, next, k, nonloc);
        std::vector<double> rhs(nn);
        for (int n = 0; n < nn; ++n) {
          for (int j = 1; j <= spec.m; ++j) ybar[j - 1] = gamma.at(j, k + 1, n);
          rhs[n] = next[n] + dt * (nonloc[n] + work.driver(i, t, ws.xs[n], ybar));
        }
        std::vector<double> slice = imex_solve(rows, std::move(rhs));
        for (int n = 0; n < nn; ++n) cur.at(i, k, n) = slice[n];
      }
      if (spec.m >= 2) {
        for (int n = 0; n < nn; ++n) {
          for (int i = 1; i <= spec.m; ++i) v[i - 1] = cur.at(i, k, n);
          obstacle_project(v, [&](int i, int j) { return work.cost(i, j, t, ws.xs[n]); },
                           opts.proj_tol);
          for (int i = 1; i <= spec.m; ++i) cur.at(i, k, n) = v[i - 1];
        }
      }
    }
    const double diff = sup_diff(cur, gamma);
    diag.outer_diffs.push_back(diff);
    if (diag.outer_diffs.size() >= 2) {
      const double prev_diff = diag.outer_diffs[diag.outer_diffs.size() - 2];
      if (prev_diff > 0.0) {
        const double rho = diff / prev_diff;
        diag.contraction_factors.push_back(rho);
        if (rho >= 1.0 && diff > 10.0 * opts.outer_tol) ++rho_bad_streak;
        else rho_bad_streak = 0;
        if (rho_bad_streak >= 3)
          throw std::runtime_error(
              "Picard iteration is not contracting (three expanding sweeps); refine the grid "
              "or check the declared Lipschitz constants");
      }
    }
    gamma.data() = cur.data();
    diag.outer_iterations = outer;
    if (diff < opts.outer_tol) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw std::runtime_error("Picard iteration did not converge in " +
                             std::to_string(opts.max_outer) + " sweeps");
  if (transform) {
    for (int i = 1; i <= spec.m; ++i)
      for (int k = 0; k <= g.nt; ++k) {
        const double down = std::exp(-lambda * g.t_node(k));
        for (int n = 0; n < nn; ++n) gamma.at(i, k, n) *= down;
      }
  }
  gamma.diagnostics = diag;
  gamma.diagnostics.leak_mass = leak;
  gamma.diagnostics.obstacle_active_fraction = final_projection(gamma, spec, opts.proj_tol);
  return gamma;
}

ResidualReport residual_check(const ValueFields& fields, const SwitchingSpec& spec,
                              const Dynamics& dyn, const LevyTriplet& levy,
                              const QuadTables& quad, double proj_tol) {
  spec.check();
  const Grid& g = fields.grid();
  const Workspace ws = make_workspace(g, dyn, levy, quad);
  const double dt = g.dt();
  ResidualReport rep;
  rep.scale = 1.0;
  for (double vv : fields.data()) rep.scale = std::max(rep.scale, std::abs(vv));
  rep.residual_tol = 10.0 * (g.dx() * g.dx() + dt) * rep.scale;
  rep.min_r1 = kInf;
  rep.min_min = kInf;
  rep.max_min = -kInf;
  std::size_t active = 0, seen = 0;
  const int nn = g.nx + 1;
  std::vector<double> u_k(nn), u_next(nn), nonloc(nn), ybar(spec.m);
  for (int i = 1; i <= spec.m; ++i) {
    for (int k = 0; k < g.nt; ++k) {
      const double t = g.t_node(k);
      for (int n = 0; n < nn; ++n) {
        u_k[n] = fields.at(i, k, n);
        u_next[n] = fields.at(i, k + 1, n);
      }
      nonlocal_remainder(ws, u_next, k, nonloc);
      for (int n = 1; n < g.nx; ++n) {
        double r1 = kInf;
        if (spec.m >= 2) {
          double obstacle = -kInf;
          for (int j = 1; j <= spec.m; ++j) {
            if (j == i) continue;
            obstacle = std::max(obstacle, fields.at(j, k, n) - spec.cost(i, j, t, ws.xs[n]));
          }
          r1 = u_k[n] - obstacle;
        }
        for (int j = 1; j <= spec.m; ++j) ybar[j - 1] = fields.at(j, k + 1, n);
        const double r2 = (u_k[n] - u_next[n]) / dt - local_operator_node(ws, u_k, k, n) -
                          nonloc[n] - spec.driver(i, t, ws.xs[n], ybar);
        const double mn = std::min(r1, r2);
        ++seen;
        if (r1 <= 10.0 * proj_tol) ++active;
        else rep.max_r2_off_obstacle = std::max(rep.max_r2_off_obstacle, std::abs(r2));
        rep.min_r1 = std::min(rep.min_r1, r1);
        rep.min_min = std::min(rep.min_min, mn);
        rep.max_min = std::max(rep.max_min, mn);
        if (std::abs(mn) > rep.max_min_abs) {
          rep.max_min_abs = std::abs(mn);
          rep.worst_mode = i;
          rep.worst_k = k;
          rep.worst_n = n;
        }
      }
    }
  }
  rep.active_fraction = seen ? static_cast<double>(active) / seen : 0.0;
  if (spec.m < 2) rep.min_r1 = kInf;
  return rep;
}

ValueFields perturb_fields(const ValueFields& fields, double theta, double lambda, int gamma,
                           int direction) {
  if (gamma < 0) throw std::invalid_argument("perturb_fields: gamma must be >= 0");
  ValueFields out = fields;
  const Grid& g = fields.grid();
  const int expo = 2 * gamma + 2;
  for (int i = 1; i <= fields.modes(); ++i)
    for (int k = 0; k <= g.nt; ++k) {
      const double w = theta * std::exp(-lambda * g.t_node(k));
      for (int n = 0; n <= g.nx; ++n) {
        const double growth = 1.0 + std::pow(std::abs(g.x_node(n)), expo);
        out.at(i, k, n) += direction * w * growth;
      }
    }
  return out;
}

PerturbationSearch perturbation_lambda_search(const ValueFields& fields,
                                              const SwitchingSpec& spec, const Dynamics& dyn,
                                              const LevyTriplet& levy, const QuadTables& quad,
                                              double theta, int gamma, int direction,
                                              double check_tol, double lambda_cap) {
  PerturbationSearch search;
  for (double lambda = 1.0; lambda <= lambda_cap; lambda *= 2.0) {
    const ValueFields v = perturb_fields(fields, theta, lambda, gamma, direction);
    const ResidualReport rep = residual_check(v, spec, dyn, levy, quad);
    const bool ok = direction > 0 ? rep.min_min >= -check_tol : rep.max_min <= check_tol;
    if (ok) {
      search.found = true;
      search.lambda0 = lambda;
      search.worst_residual = direction > 0 ? rep.min_min : rep.max_min;
      return search;
    }
  }
  return search;
}

}  // namespace oswitch
