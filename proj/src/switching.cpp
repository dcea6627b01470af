#include "oswitch/switching.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oswitch/numerics.hpp"

namespace oswitch {

double SwitchingSpec::driver(int i, double t, double x, std::span<const double> y) const {
  return drivers[i - 1](t, x, y);
}

double SwitchingSpec::cost(int i, int j, double t, double x) const {
  if (i == j) return 0.0;
  const CostFn& g = costs[i - 1][j - 1];
  return g ? g(t, x) : 0.0;
}

double SwitchingSpec::terminal(int i, double x) const { return terminals[i - 1](x); }

void SwitchingSpec::check() const {
  if (m < 1) throw std::invalid_argument("switching spec: m must be >= 1");
  if (static_cast<int>(drivers.size()) != m || static_cast<int>(terminals.size()) != m)
    throw std::invalid_argument("switching spec: need one driver and terminal per mode");
  if (static_cast<int>(costs.size()) != m)
    throw std::invalid_argument("switching spec: cost matrix must be m x m");
  for (const auto& row : costs)
    if (static_cast<int>(row.size()) != m)
      throw std::invalid_argument("switching spec: cost matrix must be m x m");
  if (!lipschitz_y.empty() && static_cast<int>(lipschitz_y.size()) != m)
    throw std::invalid_argument("switching spec: lipschitz_y must have one entry per mode");
}

int Strategy::mode_at(double s) const {
  int mode = start_mode;
  for (const Event& e : events) {
    if (e.time < s) mode = e.mode;
    else break;
  }
  return mode;
}

void Strategy::check(int m, double t0, double t_max) const {
  if (start_mode < 1 || start_mode > m) throw std::invalid_argument("strategy: bad start mode");
  int prev_mode = start_mode;
  double prev_time = t0;
  bool first = true;
  for (const Event& e : events) {
    if (e.mode < 1 || e.mode > m) throw std::invalid_argument("strategy: bad event mode");
    if (e.mode == prev_mode) throw std::invalid_argument("strategy: event must change the mode");
    if (e.time > t_max || e.time < t0)
      throw std::invalid_argument("strategy: event time outside the horizon");
    if (!first && e.time < prev_time)
      throw std::invalid_argument("strategy: event times must be non-decreasing");
    prev_time = e.time;
    prev_mode = e.mode;
    first = false;
  }
}

namespace {

// All simple cycles of the complete digraph on {1..m}, each visited once by
// anchoring the smallest member first.
void for_each_cycle(int m, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> cycle;
  std::vector<bool> used(m + 1, false);
  std::function<void(int, int)> extend = [&](int anchor, int /*depth*/) {
    for (int next = anchor + 1; next <= m; ++next) {
      if (used[next]) continue;
      cycle.push_back(next);
      used[next] = true;
      if (cycle.size() >= 2) fn(cycle);
      extend(anchor, 0);
      used[next] = false;
      cycle.pop_back();
    }
  };
  for (int anchor = 1; anchor <= m; ++anchor) {
    cycle.assign(1, anchor);
    std::fill(used.begin(), used.end(), false);
    used[anchor] = true;
    extend(anchor, 0);
  }
}

}  // namespace

ValidationReport validate_no_free_loop(const SwitchingSpec& spec,
                                       std::span<const std::pair<double, double>> sample_points,
                                       double cycle_tol) {
  spec.check();
  ValidationReport report;
  if (spec.m < 2) {
    report.metrics["min_cycle_sum"] = 0.0;
    return report;  // vacuous
  }
  double min_sum = std::numeric_limits<double>::infinity();
  double min_t = 0.0, min_x = 0.0;
  std::vector<int> min_cycle;
  for (const auto& [t, x] : sample_points) {
    for (int i = 1; i <= spec.m; ++i) {
      for (int j = 1; j <= spec.m; ++j) {
        if (i != j && spec.cost(i, j, t, x) < 0.0)
          report.fail("negative switching cost g_" + std::to_string(i) + std::to_string(j) +
                      " at (t=" + std::to_string(t) + ", x=" + std::to_string(x) + ")");
      }
    }
    for_each_cycle(spec.m, [&](const std::vector<int>& cycle) {
      double sum = 0.0;
      for (std::size_t q = 0; q < cycle.size(); ++q) {
        const int from = cycle[q];
        const int to = cycle[(q + 1) % cycle.size()];
        sum += spec.cost(from, to, t, x);
      }
      if (sum < min_sum) {
        min_sum = sum;
        min_t = t;
        min_x = x;
        min_cycle = cycle;
      }
    });
  }
  report.metrics["min_cycle_sum"] = min_sum;
  report.metrics["min_cycle_t"] = min_t;
  report.metrics["min_cycle_x"] = min_x;
  if (min_sum <= cycle_tol) {
    std::string cyc;
    for (int i : min_cycle) cyc += std::to_string(i) + "->";
    cyc += std::to_string(min_cycle.front());
    report.fail("free loop " + cyc + " with cost sum " + std::to_string(min_sum) + " at (t=" +
                std::to_string(min_t) + ", x=" + std::to_string(min_x) + ")");
  }
  return report;
}

ValidationReport validate_consistency(const SwitchingSpec& spec, double t_max,
                                      std::span<const double> x_samples, double tol) {
  spec.check();
  ValidationReport report;
  double worst = std::numeric_limits<double>::infinity();
  double worst_x = 0.0;
  int worst_mode = 0;
  for (double x : x_samples) {
    for (int i = 1; i <= spec.m; ++i) {
      double obstacle = -std::numeric_limits<double>::infinity();
      for (int j = 1; j <= spec.m; ++j) {
        if (j == i) continue;
        obstacle = std::max(obstacle, spec.terminal(j, x) - spec.cost(i, j, t_max, x));
      }
      if (spec.m == 1) continue;
      const double margin = spec.terminal(i, x) - obstacle;
      if (margin < worst) {
        worst = margin;
        worst_x = x;
        worst_mode = i;
      }
    }
  }
  if (spec.m == 1 || x_samples.empty()) {
    report.metrics["worst_margin"] = 0.0;
    return report;  // vacuous
  }
  report.metrics["worst_margin"] = worst;
  report.metrics["worst_x"] = worst_x;
  report.metrics["worst_mode"] = worst_mode;
  if (worst < -tol)
    report.fail("terminal consistency fails at mode " + std::to_string(worst_mode) +
                ", x = " + std::to_string(worst_x) + " (margin " + std::to_string(worst) + ")");
  return report;
}

ValidationReport validate_driver_coupling(const SwitchingSpec& spec, double t_max, double x_lo,
                                          double x_hi, int n_probes) {
  spec.check();
  ValidationReport report;
  if (!spec.drivers_coupled) {
    report.metrics["lipschitz_worst"] = 0.0;
    return report;
  }
  std::mt19937_64 rng(0x51a7e6bd3c92f04bULL);
  std::uniform_real_distribution<double> ut(0.0, t_max);
  std::uniform_real_distribution<double> ux(x_lo, x_hi);
  std::uniform_real_distribution<double> uy(-2.0, 2.0);
  double worst_ratio = 0.0;
  for (int probe = 0; probe < n_probes; ++probe) {
    const double t = ut(rng), x = ux(rng);
    std::vector<double> y1(spec.m), y2(spec.m);
    for (int k = 0; k < spec.m; ++k) y1[k] = y2[k] = uy(rng);
    for (int i = 1; i <= spec.m; ++i) {
      // Lipschitz ratio in a single coordinate
      for (int k = 0; k < spec.m; ++k) {
        y2[k] = y1[k] + 0.5;
        const double diff = spec.driver(i, t, x, y2) - spec.driver(i, t, x, y1);
        const double ratio = std::abs(diff) / 0.5;
        worst_ratio = std::max(worst_ratio, ratio);
        if (!spec.lipschitz_y.empty() && ratio > spec.lipschitz_y[i - 1] + 1e-9) {
          report.fail("driver f_" + std::to_string(i) + " exceeds its declared Lipschitz-in-y " +
                      "constant at a probe (" + std::to_string(ratio) + " > " +
                      std::to_string(spec.lipschitz_y[i - 1]) + ")");
        }
        if (k != i - 1 && spec.coupling == Coupling::kNondecreasing && diff < -1e-12)
          report.fail("driver f_" + std::to_string(i) + " decreases in y" + std::to_string(k + 1) +
                      " despite declared nondecreasing coupling");
        if (k != i - 1 && spec.coupling == Coupling::kNonincreasing && diff > 1e-12)
          report.fail("driver f_" + std::to_string(i) + " increases in y" + std::to_string(k + 1) +
                      " despite declared nonincreasing coupling");
        y2[k] = y1[k];
        if (!report.ok) return report;
      }
    }
  }
  report.metrics["lipschitz_worst"] = worst_ratio;
  return report;
}

double CostProcess::at(double s) const {
  double value = 0.0;
  for (std::size_t j = 0; j < event_times.size(); ++j) {
    if (event_times[j] <= s) value = cumulative[j];
    else break;
  }
  return value;
}

CostProcess cumulative_cost(const SwitchingSpec& spec, const Strategy& strategy,
                            const SimPath& path) {
  CostProcess out;
  int prev_mode = strategy.start_mode;
  double acc = 0.0;
  for (const Strategy::Event& e : strategy.events) {
    if (e.time < path.times.front() || e.time > path.times.back())
      throw std::invalid_argument("cumulative_cost: event at t=" + std::to_string(e.time) +
                                  " lies outside the path horizon");
    const double x = path.state_before(e.time);
    acc += spec.cost(prev_mode, e.mode, e.time, x);
    out.event_times.push_back(e.time);
    out.cumulative.push_back(acc);
    prev_mode = e.mode;
  }
  out.total = acc;
  return out;
}

Policy Policy::fixed(Strategy s) {
  Policy p;
  p.fixed_ = true;
  p.strategy_ = std::move(s);
  return p;
}

Policy Policy::from_fields(const ValueFields* fields, double switch_tol) {
  if (fields == nullptr) throw std::invalid_argument("policy: fields must not be null");
  Policy p;
  p.fields_ = fields;
  p.switch_tol_ = switch_tol;
  return p;
}

Strategy strategy_from_fields(const ValueFields& fields, const SwitchingSpec& spec,
                              const SimPath& path, int i0, double switch_tol, int switch_cap) {
  if (i0 < 1 || i0 > spec.m) throw std::invalid_argument("strategy_from_fields: bad start mode");
  Strategy strat;
  strat.start_mode = i0;
  int mode = i0;
  const double t_end = fields.grid().t_max;
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    const double r = path.times[k];
    if (r < path.t0 || r >= t_end) continue;
    const double x = path.states[k];
    // chained hops at one grid time are allowed; the cap converts a free (or
    // nearly free) loop into a diagnosable error
    for (;;) {
      double best = -std::numeric_limits<double>::infinity();
      int best_mode = 0;
      for (int j = 1; j <= spec.m; ++j) {
        if (j == mode) continue;
        const double v = fields.value(j, r, x) - spec.cost(mode, j, r, x);
        if (v > best + 1e-15) {
          best = v;
          best_mode = j;
        }
      }
      if (best_mode == 0) break;  // m == 1
      if (fields.value(mode, r, x) <= best + switch_tol) {
        strat.events.push_back({r, best_mode});
        mode = best_mode;
        if (static_cast<int>(strat.events.size()) > switch_cap)
          throw std::runtime_error(
              "strategy_from_fields: switch cap exceeded (free-loop violation or "
              "switch_tol too large)");
      } else {
        break;
      }
    }
  }
  return strat;
}

McResult mc_payoff(const SwitchingSpec& spec, const Dynamics& dyn, const LevyTriplet& levy,
                   const Policy& policy, double t0, double x0, int i0, int n_paths,
                   std::uint64_t seed, const McOptions& opts) {
  spec.check();
  if (i0 < 1 || i0 > spec.m) throw std::invalid_argument("mc_payoff: bad start mode");
  if (n_paths < 1) throw std::invalid_argument("mc_payoff: need at least one path");
  if (spec.drivers_coupled && opts.coupling_fields == nullptr)
    throw std::invalid_argument(
        "mc_payoff: drivers depend on y; supply value fields for the coupling argument");
  const int cap = opts.switch_cap > 0 ? opts.switch_cap : 10 * spec.m;

  double t_end = opts.t_max;
  if (t_end <= t0) {
    if (policy.fields() != nullptr) t_end = policy.fields()->grid().t_max;
    else if (opts.coupling_fields != nullptr) t_end = opts.coupling_fields->grid().t_max;
    else throw std::invalid_argument("mc_payoff: horizon t_max is required");
  }
  std::vector<double> grid_times;
  if (policy.fields() != nullptr) {
    const Grid& g = policy.fields()->grid();
    // walk the solver grid so obstacle touches are seen at solver resolution
    for (int k = 0; k <= g.nt; ++k) {
      const double t = g.t_node(k);
      if (t >= t0) grid_times.push_back(t);
    }
    if (grid_times.empty() || grid_times.front() > t0) grid_times.insert(grid_times.begin(), t0);
  } else {
    grid_times = linspace(t0, t_end, opts.n_steps + 1);
  }

  std::vector<double> payoffs(n_paths);
  for (int p = 0; p < n_paths; ++p) {
    const std::uint64_t path_seed = derive_seed(seed, static_cast<std::uint64_t>(p));
    std::mt19937_64 rng(path_seed);
    const SimPath path = simulate_path(dyn, levy, t0, x0, grid_times, rng);

    Strategy strat;
    if (policy.fixed_strategy() != nullptr) {
      strat = *policy.fixed_strategy();
      strat.check(spec.m, t0, t_end);
      if (static_cast<int>(strat.events.size()) > cap)
        throw std::runtime_error("mc_payoff: fixed strategy exceeds the switch cap");
      if (strat.start_mode != i0)
        throw std::invalid_argument("mc_payoff: fixed strategy starts in the wrong mode");
    } else {
      try {
        strat = strategy_from_fields(*policy.fields(), spec, path, i0, policy.switch_tol(), cap);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string(e.what()) + " (path seed " +
                                 std::to_string(path_seed) + ")");
      }
    }

    double running = 0.0;
    std::vector<double> ybuf(spec.drivers_coupled ? spec.m : 0);
    for (std::size_t k = 0; k + 1 < path.times.size(); ++k) {
      const double t = path.times[k];
      const double dt = path.times[k + 1] - path.times[k];
      const int mode = strat.mode_at(std::nextafter(t, t_end));
      if (spec.drivers_coupled) {
        for (int j = 1; j <= spec.m; ++j)
          ybuf[j - 1] = opts.coupling_fields->value(j, t, path.states[k]);
      }
      running += spec.driver(mode, t, path.states[k], ybuf) * dt;
    }
    const CostProcess costs = cumulative_cost(spec, strat, path);
    const int final_mode = strat.mode_at(t_end);
    running += spec.terminal(final_mode, path.states.back()) - costs.total;
    payoffs[p] = running;
  }
  const MeanStdErr ms = mean_std_error(payoffs);
  return {ms.mean, ms.std_error, n_paths};
}

}  // namespace oswitch
