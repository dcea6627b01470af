#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "oswitch/levy.hpp"
#include "oswitch/report.hpp"

namespace oswitch {

/// State coefficient function (t, x) -> value.
using CoefficientFn = std::function<double(double, double)>;

/// Coefficients of the controlled state equation. sigma_bound is the declared
/// uniform bound on |sigma|; exceeding it during a simulation is an error.
struct Dynamics {
  CoefficientFn b;
  CoefficientFn sigma;
  double sigma_bound = 1.0;

  double eval_sigma(double t, double x) const;
  double eval_b(double t, double x) const;
};

/// Probes Lipschitz behaviour of b and sigma on pairs inside [t0,T]x[x_lo,x_hi];
/// reports the largest observed difference quotient.
ValidationReport probe_dynamics(const Dynamics& dyn, double t0, double t1, double x_lo,
                                double x_hi, int n_probes = 64);

struct StepRecord {
  double gauss = 0.0;
  double drift = 0.0;
  double dl = 0.0;             // total noise increment over the step
  std::vector<double> jumps;   // individual jump sizes within the step
};

struct SimPath {
  double t0 = 0.0;
  double x0 = 0.0;
  std::vector<double> times;        // size n_steps + 1
  std::vector<double> states;       // size n_steps + 1
  std::vector<StepRecord> steps;    // size n_steps

  std::size_t n_steps() const { return steps.size(); }
  /// Left-continuous step lookup: state at the last grid time strictly
  /// before s (clamped to the first node).
  double state_before(double s) const;
  double state_at_or_before(double s) const;
};

/// Euler scheme for dX = b dt + sigma dL with per-step jump bookkeeping.
/// The state is frozen at x0 for grid times <= t0.
SimPath simulate_path(const Dynamics& dyn, const LevyTriplet& levy, double t0, double x0,
                      std::span<const double> time_grid, std::mt19937_64& rng);

struct MomentBoundReport {
  double estimate = 0.0;     // E[sup_{s<=T} |X_s|^p] Monte Carlo estimate
  double bound = 0.0;        // C (1 + |x0|^p)
  double ratio = 0.0;
  double std_error = 0.0;
};

MomentBoundReport moment_bound_check(const Dynamics& dyn, const LevyTriplet& levy, double t0,
                                     double x0, double t_max, int n_steps, int p, int n_paths,
                                     double growth_constant, std::uint64_t seed);

}  // namespace oswitch
