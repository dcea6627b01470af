#pragma once

#include <functional>
#include <span>
#include <vector>

#include "oswitch/grid.hpp"
#include "oswitch/levy.hpp"
#include "oswitch/path_sim.hpp"
#include "oswitch/switching.hpp"

namespace oswitch {

struct QuadNode {
  double y = 0.0;
  double w = 0.0;
};

/// Split of the jump measure at radius delta: the small-jump second moment
/// enters the implicit diffusion row, the tail becomes explicit nodes.
struct QuadTables {
  double delta = 0.0;
  double small_sq = 0.0;              // ∫_{|y|<=delta} y^2 Pi(dy)
  std::vector<QuadNode> nodes;        // |y| > delta
  double node_mass = 0.0;             // sum w_q
  double node_first_moment = 0.0;     // sum w_q y_q
  double node_second_moment = 0.0;    // sum w_q y_q^2
};

/// Default jump-split radius: 4 dx / sigma_max, nudged so no atom sits within
/// 10% of the split.
double default_delta(const LevyTriplet& levy, const Grid& grid, double sigma_max);

QuadTables build_quadrature(const LevyTriplet& levy, const Grid& grid, double delta);

/// Spec-literal local operator (drift + Brownian diffusion) on one time slice;
/// upwind first differences, central second differences, one-sided at the
/// boundary.
std::vector<double> apply_local(std::span<const double> u_slice, const Grid& grid,
                                const Dynamics& dyn, const LevyTriplet& levy, double t);

/// Spec-literal nonlocal operator: small jumps through the Taylor surrogate
/// (1/2) sigma^2 s^2(delta) D_xx u, tail jumps by quadrature with flat-clamped
/// linear interpolation. leak, when given, receives the clamped tail mass at
/// the worst node.
std::vector<double> apply_nonlocal(std::span<const double> u_slice, const Grid& grid,
                                   const QuadTables& quad, const Dynamics& dyn, double t,
                                   double* leak = nullptr);

/// Smallest vector >= input satisfying v_i >= max_j (v_j - g(i,j)); repeated
/// sweeps, at most m+1 before a non-free-loop violation is reported.
/// Returns the number of components that were raised.
int obstacle_project(std::span<double> values,
                     const std::function<double(int, int)>& cost, double proj_tol);

struct SolveOptions {
  double proj_tol = 1e-12;
  double outer_tol = 1e-8;
  int max_outer = 200;
  double delta_override = 0.0;
  double leak_tol = 0.05;
  double cycle_tol = 1e-10;
};

/// residual_tol = 10 (dx^2 + dt) scale with scale = max(1, max |u|).
double residual_tolerance(const ValueFields& fields);

/// One IMEX backward step: implicit tridiagonal local solve per mode with the
/// coupling values frozen at the next time slice, explicit nonlocal term, then
/// simultaneous obstacle projection at every node. fields_next and
/// coupling_values hold one slice (nx+1 values) per mode.
std::vector<std::vector<double>> step_backward(
    const std::vector<std::vector<double>>& fields_next,
    const std::vector<std::vector<double>>& coupling_values, const SwitchingSpec& spec,
    const Grid& grid, const QuadTables& quad, const Dynamics& dyn, const LevyTriplet& levy,
    double t_k, double proj_tol = 1e-12);

/// Increasing-scheme solver for nondecreasing (or absent) driver coupling:
/// starts from the lower-envelope field and iterates single-obstacle solves
/// against the previous iterate.
ValueFields solve_monotone(const SwitchingSpec& spec, const Dynamics& dyn,
                           const LevyTriplet& levy, const Grid& grid,
                           const SolveOptions& opts = {});

/// Picard iteration on the frozen coupling argument; nonincreasing coupling is
/// routed through the exponential transform and inverted on output.
ValueFields solve_picard(const SwitchingSpec& spec, const Dynamics& dyn, const LevyTriplet& levy,
                         const Grid& grid, const SolveOptions& opts = {});

struct ResidualReport {
  double max_min_abs = 0.0;       // max over nodes of |min(r1, r2)|
  double min_r1 = 0.0;            // obstacle feasibility
  double min_min = 0.0;           // min over nodes of min(r1, r2)
  double max_min = 0.0;           // max over nodes of min(r1, r2)
  double max_r2_off_obstacle = 0.0;
  double active_fraction = 0.0;
  double residual_tol = 0.0;
  double scale = 0.0;
  int worst_mode = 0;             // location of max |min(r1, r2)|
  int worst_k = 0;
  int worst_n = 0;
};

/// Discrete residuals of system fields against the scheme's own operators:
/// r1 = obstacle slack, r2 = backward-difference PDE residual.
ResidualReport residual_check(const ValueFields& fields, const SwitchingSpec& spec,
                              const Dynamics& dyn, const LevyTriplet& levy,
                              const QuadTables& quad, double proj_tol = 1e-12);

/// fields +/- theta e^{-lambda t} (1 + |x|^{2 gamma + 2}) on every node.
ValueFields perturb_fields(const ValueFields& fields, double theta, double lambda, int gamma,
                           int direction);

struct PerturbationSearch {
  bool found = false;
  double lambda0 = 0.0;
  double worst_residual = 0.0;  // at the accepted lambda
};

/// Doubling search for the smallest lambda keeping the perturbed fields on the
/// supersolution side (direction +1) or subsolution side (direction -1).
PerturbationSearch perturbation_lambda_search(const ValueFields& fields,
                                              const SwitchingSpec& spec, const Dynamics& dyn,
                                              const LevyTriplet& levy, const QuadTables& quad,
                                              double theta, int gamma, int direction,
                                              double check_tol, double lambda_cap = 1e6);

}  // namespace oswitch
