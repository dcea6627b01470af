#pragma once

#include <vector>

#include "oswitch/levy.hpp"
#include "oswitch/path_sim.hpp"
#include "oswitch/switching.hpp"

namespace oswitch {

/// Discrete-time, discrete-state surrogate for the controlled state: one
/// row-stochastic transition matrix per time step.
struct ChainModel {
  std::vector<double> states;
  std::vector<double> times;
  // transition[k][s * n_states + s'] for the step from times[k] to times[k+1]
  std::vector<std::vector<double>> transition;

  int n_states() const { return static_cast<int>(states.size()); }
  int n_steps() const { return static_cast<int>(times.size()) - 1; }
  double prob(int k, int s, int s2) const { return transition[k][s * n_states() + s2]; }
  void check() const;
};

struct ChainBuildOptions {
  double leak_tol = 1e-6;    // mass clamped at the state-range ends
  double jump_tail_tol = 1e-12;  // per-atom Poisson truncation
  int max_jumps_per_atom = 12;
};

/// One Euler step from each state, projected onto the state set: jump-count
/// mixtures handled exactly per atom, the Gaussian part by a moment-matched
/// trinomial, point masses split over neighbours so the mean is exact.
ChainModel build_chain(const Dynamics& dyn, const LevyTriplet& levy,
                       std::vector<double> states, std::vector<double> times,
                       const ChainBuildOptions& opts = {});

enum class ChainAction : std::uint8_t { kContinue, kSwitch };

struct DPResult {
  int m = 0;
  int n_states = 0;
  int n_times = 0;
  std::vector<double> value;          // [mode][time][state]
  std::vector<ChainAction> action;    // same layout; kContinue at the terminal
  std::vector<int> switch_target;     // mode switched to, 0 when continuing

  double v(int mode, int k, int s) const {
    return value[(static_cast<std::size_t>(mode - 1) * n_times + k) * n_states + s];
  }
  ChainAction act(int mode, int k, int s) const {
    return action[(static_cast<std::size_t>(mode - 1) * n_times + k) * n_states + s];
  }
  int target(int mode, int k, int s) const {
    return switch_target[(static_cast<std::size_t>(mode - 1) * n_times + k) * n_states + s];
  }
};

/// Backward induction with chained instantaneous switching resolved by a
/// fixed-point sweep at every (time, state); coupled drivers read the next
/// time slice.
DPResult dp_solve(const ChainModel& chain, const SwitchingSpec& spec);

struct EnumerationResult {
  std::vector<double> best;  // [mode][state] at the first time
  double policies_evaluated = 0.0;
};

/// Exhaustive optimum over feedback policies (mode occupied after each
/// (time, state, mode) decision, chained hops priced by cheapest cost chains).
/// Requires y-independent drivers; guarded at ~1e7 policy evaluations.
EnumerationResult enumerate_strategies(const ChainModel& chain, const SwitchingSpec& spec,
                                       double guard = 1e7);

}  // namespace oswitch
