#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "oswitch/grid.hpp"
#include "oswitch/path_sim.hpp"
#include "oswitch/report.hpp"

namespace oswitch {

/// Driver f_i(t, x, y) with y = (y_1..y_m).
using DriverFn = std::function<double(double, double, std::span<const double>)>;
/// Switching cost g_ij(t, x) or terminal h_i(x).
using CostFn = std::function<double(double, double)>;
using TerminalFn = std::function<double(double)>;

enum class Coupling { kNone, kNondecreasing, kNonincreasing };

/// The switching problem data: modes are labelled 1..m.
struct SwitchingSpec {
  int m = 1;
  std::vector<DriverFn> drivers;              // size m
  std::vector<std::vector<CostFn>> costs;     // m x m, empty entries mean 0
  std::vector<TerminalFn> terminals;          // size m
  Coupling coupling = Coupling::kNone;
  std::vector<double> lipschitz_y;            // per-mode constants C_i
  bool drivers_coupled = false;               // any f_i reads y

  double driver(int i, double t, double x, std::span<const double> y) const;
  double cost(int i, int j, double t, double x) const;  // g_ii == 0
  double terminal(int i, double x) const;
  void check() const;
};

/// An admissible switching strategy: start mode plus (time, mode) events with
/// non-decreasing times; consecutive chained hops may share a time stamp.
struct Strategy {
  struct Event {
    double time = 0.0;
    int mode = 1;
  };
  int start_mode = 1;
  std::vector<Event> events;

  /// Mode in force at time s (events strictly before s have taken effect).
  int mode_at(double s) const;
  int terminal_mode(double t_max) const { return mode_at(t_max); }
  void check(int m, double t0, double t_max) const;
};

/// Enumerates all simple cycles of the complete digraph on the modes and
/// checks the summed cost along each cycle stays positive at every sample.
ValidationReport validate_no_free_loop(const SwitchingSpec& spec,
                                       std::span<const std::pair<double, double>> sample_points,
                                       double cycle_tol = 1e-10);

/// Terminal consistency h_i >= max_j (h_j - g_ij(T, .)) at the sampled states.
ValidationReport validate_consistency(const SwitchingSpec& spec, double t_max,
                                      std::span<const double> x_samples, double tol = 1e-12);

/// Lipschitz-in-y probe of the drivers against the declared constants and the
/// declared coupling monotonicity direction.
ValidationReport validate_driver_coupling(const SwitchingSpec& spec, double t_max, double x_lo,
                                          double x_hi, int n_probes = 64);

/// Cumulative switching cost along a path, as a right-continuous step function.
struct CostProcess {
  std::vector<double> event_times;
  std::vector<double> cumulative;  // value from event_times[j] onward
  double total = 0.0;

  double at(double s) const;
};

CostProcess cumulative_cost(const SwitchingSpec& spec, const Strategy& strategy,
                            const SimPath& path);

/// Policy evaluated by Monte Carlo: either a fixed strategy or the reflection
/// rule read off value fields.
struct Policy {
  static Policy fixed(Strategy s);
  static Policy from_fields(const ValueFields* fields, double switch_tol);

  const Strategy* fixed_strategy() const { return fixed_ ? &strategy_ : nullptr; }
  const ValueFields* fields() const { return fields_; }
  double switch_tol() const { return switch_tol_; }

 private:
  bool fixed_ = false;
  Strategy strategy_;
  const ValueFields* fields_ = nullptr;
  double switch_tol_ = 0.0;
};

struct McOptions {
  double t_max = 0.0;  // 0 = take the horizon from the policy's value fields
  int n_steps = 200;
  int switch_cap = 0;  // 0 = 10 * m
  /// Fields supplying the coupling argument when drivers read y.
  const ValueFields* coupling_fields = nullptr;
};

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
};

/// Estimates E[∫ f_a ds - A^a_T + h_{a_T}(X_T)] by left-endpoint quadrature
/// along simulated paths. Paths are seeded from (seed, path index).
McResult mc_payoff(const SwitchingSpec& spec, const Dynamics& dyn, const LevyTriplet& levy,
                   const Policy& policy, double t0, double x0, int i0, int n_paths,
                   std::uint64_t seed, const McOptions& opts = {});

/// Walks a path and extracts the reflection strategy from value fields:
/// switch at the first grid time where the current surface touches its
/// obstacle (within switch_tol); chained hops at one time are allowed.
Strategy strategy_from_fields(const ValueFields& fields, const SwitchingSpec& spec,
                              const SimPath& path, int i0, double switch_tol, int switch_cap);

}  // namespace oswitch
