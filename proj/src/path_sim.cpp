#include "oswitch/path_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oswitch/numerics.hpp"

namespace oswitch {

double Dynamics::eval_sigma(double t, double x) const {
  const double s = sigma(t, x);
  if (!std::isfinite(s)) throw std::runtime_error("sigma evaluation is not finite");
  if (std::abs(s) > sigma_bound * (1.0 + 1e-12))
    throw std::runtime_error("sigma bound violated: |sigma(" + std::to_string(t) + ", " +
                             std::to_string(x) + ")| = " + std::to_string(std::abs(s)) +
                             " > " + std::to_string(sigma_bound));
  return s;
}

double Dynamics::eval_b(double t, double x) const {
  const double v = b(t, x);
  if (!std::isfinite(v)) throw std::runtime_error("drift evaluation is not finite");
  return v;
}

ValidationReport probe_dynamics(const Dynamics& dyn, double t0, double t1, double x_lo,
                                double x_hi, int n_probes) {
  ValidationReport report;
  std::mt19937_64 rng(0x9d5ab1c2f0e3d4a7ULL);
  std::uniform_real_distribution<double> ut(t0, t1);
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  double worst = 0.0;
  for (int k = 0; k < n_probes; ++k) {
    const double t = ut(rng);
    const double xa = ux(rng);
    double xb = ux(rng);
    if (xa == xb) xb += 1e-6;
    try {
      const double num = std::abs(dyn.eval_sigma(t, xa) - dyn.eval_sigma(t, xb)) +
                         std::abs(dyn.eval_b(t, xa) - dyn.eval_b(t, xb));
      worst = std::max(worst, num / std::abs(xa - xb));
    } catch (const std::exception& e) {
      report.fail(e.what());
      return report;
    }
  }
  report.metrics["lipschitz_estimate"] = worst;
  return report;
}

double SimPath::state_before(double s) const {
  auto it = std::lower_bound(times.begin(), times.end(), s);
  if (it == times.begin()) return states.front();
  const auto idx = static_cast<std::size_t>(it - times.begin()) - 1;
  return states[idx];
}

double SimPath::state_at_or_before(double s) const {
  auto it = std::upper_bound(times.begin(), times.end(), s);
  if (it == times.begin()) return states.front();
  const auto idx = static_cast<std::size_t>(it - times.begin()) - 1;
  return states[idx];
}

SimPath simulate_path(const Dynamics& dyn, const LevyTriplet& levy, double t0, double x0,
                      std::span<const double> time_grid, std::mt19937_64& rng) {
  if (time_grid.size() < 2) throw std::invalid_argument("simulate_path: need >= 2 grid times");
  for (std::size_t k = 1; k < time_grid.size(); ++k)
    if (!(time_grid[k] > time_grid[k - 1]))
      throw std::invalid_argument("simulate_path: time grid must increase");

  SimPath path;
  path.t0 = t0;
  path.x0 = x0;
  path.times.assign(time_grid.begin(), time_grid.end());
  path.states.resize(time_grid.size());
  path.steps.resize(time_grid.size() - 1);

  double x = x0;
  path.states[0] = x;
  for (std::size_t k = 0; k + 1 < time_grid.size(); ++k) {
    const double t = time_grid[k];
    const double dt = time_grid[k + 1] - time_grid[k];
    StepRecord& rec = path.steps[k];
    if (time_grid[k + 1] <= t0) {
      // Frozen before the start time; no noise is consumed.
      rec = StepRecord{};
      path.states[k + 1] = x;
      continue;
    }
    Increment inc = sample_increment(levy, dt, rng);
    rec.gauss = inc.gauss;
    rec.drift = inc.drift;
    rec.dl = inc.value;
    rec.jumps = std::move(inc.jumps);
    const double sig = dyn.eval_sigma(t, x);
    const double drift = dyn.eval_b(t, x);
    x = x + drift * dt + sig * rec.dl;
    if (!std::isfinite(x)) throw std::runtime_error("state overflow during path simulation");
    path.states[k + 1] = x;
  }
  return path;
}

MomentBoundReport moment_bound_check(const Dynamics& dyn, const LevyTriplet& levy, double t0,
                                     double x0, double t_max, int n_steps, int p, int n_paths,
                                     double growth_constant, std::uint64_t seed) {
  if (p < 1) throw std::invalid_argument("moment_bound_check: p must be >= 1");
  const std::vector<double> grid = linspace(t0, t_max, n_steps + 1);
  std::vector<double> sups(n_paths);
  for (int i = 0; i < n_paths; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const SimPath path = simulate_path(dyn, levy, t0, x0, grid, rng);
    double sup = 0.0;
    for (double s : path.states) sup = std::max(sup, std::pow(std::abs(s), p));
    sups[i] = sup;
  }
  const MeanStdErr ms = mean_std_error(sups);
  MomentBoundReport rep;
  rep.estimate = ms.mean;
  rep.std_error = ms.std_error;
  rep.bound = growth_constant * (1.0 + std::pow(std::abs(x0), p));
  rep.ratio = rep.bound > 0.0 ? rep.estimate / rep.bound : 0.0;
  return rep;
}

}  // namespace oswitch
