#include "oswitch/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "oswitch/ipde.hpp"
#include "oswitch/numerics.hpp"

namespace oswitch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double poisson_pmf(int k, double rate) {
  double p = std::exp(-rate);
  for (int i = 1; i <= k; ++i) p *= rate / i;
  return p;
}

struct RowBuilder {
  const std::vector<double>& states;
  std::vector<double>& row;
  double leak = 0.0;

  // mean-exact split of a point mass over the two straddling states
  void add_point(double y, double mass) {
    if (mass <= 0.0) return;
    const int n = static_cast<int>(states.size());
    if (y <= states.front()) {
      if (y < states.front()) leak += mass;
      row[0] += mass;
      return;
    }
    if (y >= states.back()) {
      if (y > states.back()) leak += mass;
      row[n - 1] += mass;
      return;
    }
    const auto it = std::upper_bound(states.begin(), states.end(), y);
    const int hi = static_cast<int>(it - states.begin());
    const int lo = hi - 1;
    const double w = (y - states[lo]) / (states[hi] - states[lo]);
    row[lo] += mass * (1.0 - w);
    row[hi] += mass * w;
  }

  // trinomial matched to mean and variance; widens the arms until the
  // weights are admissible, falling back to a mean-exact two-point mixture
  void add_gaussian(double mu, double sd, double mass) {
    if (mass <= 0.0) return;
    if (sd <= 0.0) {
      add_point(mu, mass);
      return;
    }
    const int n = static_cast<int>(states.size());
    if (mu <= states.front() || mu >= states.back()) {
      // centre outside the range: no trinomial fits, clamp both mixture arms
      add_point(mu - sd, 0.5 * mass);
      add_point(mu + sd, 0.5 * mass);
      return;
    }
    const auto it = std::lower_bound(states.begin(), states.end(), mu);
    int j = static_cast<int>(it - states.begin());
    if (j > 0 && (j == n || mu - states[j - 1] < states[j] - mu)) --j;
    for (int k = 1; j - k >= 0 && j + k < n; ++k) {
      const double dm = states[j - k] - mu;
      const double d0 = states[j] - mu;
      const double dp = states[j + k] - mu;
      // mean and second moment around mu
      const double a11 = dm - d0, a12 = dp - d0, b1 = -d0;
      const double a21 = dm * dm - d0 * d0, a22 = dp * dp - d0 * d0;
      const double b2 = sd * sd - d0 * d0;
      const double det = a11 * a22 - a12 * a21;
      if (det == 0.0) continue;
      double pm = (b1 * a22 - a12 * b2) / det;
      double pp = (a11 * b2 - b1 * a21) / det;
      double p0 = 1.0 - pm - pp;
      const double tol = -1e-13;
      if (pm >= tol && pp >= tol && p0 >= tol) {
        pm = std::max(pm, 0.0);
        pp = std::max(pp, 0.0);
        p0 = std::max(p0, 0.0);
        const double norm = pm + p0 + pp;
        row[j - k] += mass * pm / norm;
        row[j] += mass * p0 / norm;
        row[j + k] += mass * pp / norm;
        return;
      }
    }
    // arms hit the range ends: two-point mixture keeps the mean exact
    add_point(mu - sd, 0.5 * mass);
    add_point(mu + sd, 0.5 * mass);
  }
};

std::vector<Atom> jump_atoms(const JumpMeasure& measure) {
  switch (measure.kind()) {
    case MeasureKind::kNone: return {};
    case MeasureKind::kAtoms: return measure.atoms();
    case MeasureKind::kDensity:
      throw std::invalid_argument(
          "build_chain supports atomic jump measures; discretize the density into atoms first");
  }
  return {};
}

}  // namespace

void ChainModel::check() const {
  if (states.size() < 1 || times.size() < 2)
    throw std::invalid_argument("chain: need at least one state and two times");
  for (std::size_t i = 1; i < states.size(); ++i)
    if (!(states[i] > states[i - 1]))
      throw std::invalid_argument("chain: states must strictly increase");
  for (std::size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("chain: times must strictly increase");
  if (transition.size() != times.size() - 1)
    throw std::invalid_argument("chain: need one transition matrix per step");
  const int n = n_states();
  for (const auto& mat : transition) {
    if (static_cast<int>(mat.size()) != n * n)
      throw std::invalid_argument("chain: transition matrix size mismatch");
    for (int s = 0; s < n; ++s) {
      double sum = 0.0;
      for (int s2 = 0; s2 < n; ++s2) {
        if (mat[s * n + s2] < 0.0) throw std::invalid_argument("chain: negative probability");
        sum += mat[s * n + s2];
      }
      if (std::abs(sum - 1.0) > 1e-12)
        throw std::invalid_argument("chain: row " + std::to_string(s) + " sums to " +
                                    std::to_string(sum));
    }
  }
}

ChainModel build_chain(const Dynamics& dyn, const LevyTriplet& levy, std::vector<double> states,
                       std::vector<double> times, const ChainBuildOptions& opts) {
  ChainModel chain;
  chain.states = std::move(states);
  chain.times = std::move(times);
  const int n = chain.n_states();
  const int steps = chain.n_steps();
  if (n < 1 || steps < 1) throw std::invalid_argument("build_chain: empty state or time set");

  const std::vector<Atom> atoms = jump_atoms(levy.measure);
  const double comp = levy.drift - levy.measure.small_first_moment();

  // Per-atom truncated Poisson count distributions, rebuilt per step size.
  chain.transition.assign(steps, std::vector<double>(n * n, 0.0));
  for (int k = 0; k < steps; ++k) {
    const double t = chain.times[k];
    const double dt = chain.times[k + 1] - chain.times[k];
    std::vector<std::vector<double>> counts(atoms.size());
    double combos = 1.0;
    for (std::size_t a = 0; a < atoms.size(); ++a) {
      const double rate = atoms[a].mass * dt;
      double cum = 0.0;
      for (int c = 0; c <= opts.max_jumps_per_atom; ++c) {
        const double p = poisson_pmf(c, rate);
        counts[a].push_back(p);
        cum += p;
        if (1.0 - cum < opts.jump_tail_tol) break;
      }
      combos *= static_cast<double>(counts[a].size());
    }
    if (combos > 1e5)
      throw std::invalid_argument("build_chain: jump combination count too large; reduce dt");

    for (int s = 0; s < n; ++s) {
      const double x = chain.states[s];
      const double sig = dyn.eval_sigma(t, x);
      const double mu_base = x + dyn.eval_b(t, x) * dt + sig * comp * dt;
      const double sd = std::abs(sig) * levy.varpi * std::sqrt(dt);
      std::vector<double> row(n, 0.0);
      RowBuilder builder{chain.states, row};

      // odometer over per-atom jump counts
      std::vector<std::size_t> idx(atoms.size(), 0);
      for (;;) {
        double prob = 1.0;
        double shift = 0.0;
        for (std::size_t a = 0; a < atoms.size(); ++a) {
          prob *= counts[a][idx[a]];
          shift += static_cast<double>(idx[a]) * atoms[a].location;
        }
        builder.add_gaussian(mu_base + sig * shift, sd, prob);
        std::size_t pos = 0;
        for (; pos < atoms.size(); ++pos) {
          if (++idx[pos] < counts[pos].size()) break;
          idx[pos] = 0;
        }
        if (pos == atoms.size()) break;
      }

      if (builder.leak > opts.leak_tol)
        throw std::runtime_error("build_chain: state " + std::to_string(x) + " leaks " +
                                 std::to_string(builder.leak) +
                                 " probability mass outside the state range");
      double sum = 0.0;
      for (double p : row) sum += p;
      if (sum <= 0.0) throw std::runtime_error("build_chain: empty transition row");
      for (int s2 = 0; s2 < n; ++s2) chain.transition[k][s * n + s2] = row[s2] / sum;
    }
  }
  chain.check();
  return chain;
}

DPResult dp_solve(const ChainModel& chain, const SwitchingSpec& spec) {
  chain.check();
  spec.check();
  const int n = chain.n_states();
  const int nt = chain.n_steps() + 1;
  const double t_max = chain.times.back();

  // validators gate entry, as for the grid solver
  const auto cons = validate_consistency(spec, t_max, chain.states);
  if (!cons.ok) throw std::runtime_error("consistency validation failed: " + cons.summary());
  std::vector<std::pair<double, double>> pts;
  for (double t : chain.times)
    for (double x : chain.states) pts.emplace_back(t, x);
  const auto loop = validate_no_free_loop(spec, pts);
  if (!loop.ok) throw std::runtime_error("no-free-loop validation failed: " + loop.summary());

  DPResult res;
  res.m = spec.m;
  res.n_states = n;
  res.n_times = nt;
  res.value.assign(static_cast<std::size_t>(spec.m) * nt * n, 0.0);
  res.action.assign(res.value.size(), ChainAction::kContinue);
  res.switch_target.assign(res.value.size(), 0);
  auto vref = [&](int mode, int k, int s) -> double& {
    return res.value[(static_cast<std::size_t>(mode - 1) * nt + k) * n + s];
  };

  for (int i = 1; i <= spec.m; ++i)
    for (int s = 0; s < n; ++s) vref(i, nt - 1, s) = spec.terminal(i, chain.states[s]);

  std::vector<double> cont(spec.m), v(spec.m), ybar(spec.m);
  for (int k = nt - 2; k >= 0; --k) {
    const double t = chain.times[k];
    const double dt = chain.times[k + 1] - chain.times[k];
    for (int s = 0; s < n; ++s) {
      const double x = chain.states[s];
      for (int j = 1; j <= spec.m; ++j) ybar[j - 1] = vref(j, k + 1, s);
      for (int i = 1; i <= spec.m; ++i) {
        double expect = 0.0;
        for (int s2 = 0; s2 < n; ++s2) expect += chain.prob(k, s, s2) * vref(i, k + 1, s2);
        cont[i - 1] = spec.driver(i, t, x, ybar) * dt + expect;
      }
      v = cont;
      obstacle_project(v, [&](int a, int b) { return spec.cost(a, b, t, x); }, 0.0);
      for (int i = 1; i <= spec.m; ++i) {
        vref(i, k, s) = v[i - 1];
        double obstacle = -kInf;
        int best = 0;
        for (int j = 1; j <= spec.m; ++j) {
          if (j == i) continue;
          const double cand = v[j - 1] - spec.cost(i, j, t, x);
          if (cand > obstacle) {
            obstacle = cand;
            best = j;
          }
        }
        const std::size_t at = (static_cast<std::size_t>(i - 1) * nt + k) * n + s;
        if (spec.m >= 2 && obstacle > cont[i - 1]) {
          res.action[at] = ChainAction::kSwitch;
          res.switch_target[at] = best;
        }
      }
    }
  }
  return res;
}

EnumerationResult enumerate_strategies(const ChainModel& chain, const SwitchingSpec& spec,
                                       double guard) {
  chain.check();
  spec.check();
  if (spec.drivers_coupled)
    throw std::invalid_argument("enumerate_strategies requires y-independent drivers");
  const int n = chain.n_states();
  const int steps = chain.n_steps();
  const int m = spec.m;
  const int decisions = steps * n * m;
  const double count = std::pow(static_cast<double>(m), decisions);
  if (count > guard)
    throw std::invalid_argument("enumeration guard exceeded: " + std::to_string(count) +
                                " policies");

  // cheapest chained switching cost per (time, state) via Floyd-Warshall
  std::vector<std::vector<double>> sp(static_cast<std::size_t>(steps) * n,
                                      std::vector<double>(m * m, 0.0));
  for (int k = 0; k < steps; ++k) {
    for (int s = 0; s < n; ++s) {
      auto& d = sp[static_cast<std::size_t>(k) * n + s];
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
          d[i * m + j] = i == j ? 0.0 : spec.cost(i + 1, j + 1, chain.times[k], chain.states[s]);
      for (int mid = 0; mid < m; ++mid)
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j)
            d[i * m + j] = std::min(d[i * m + j], d[i * m + mid] + d[mid * m + j]);
    }
  }

  EnumerationResult out;
  out.best.assign(static_cast<std::size_t>(m) * n, -kInf);
  std::vector<int> policy(decisions, 0);  // (k, s, i) -> occupied mode - 1
  std::vector<double> w(static_cast<std::size_t>(m) * (steps + 1) * n, 0.0);
  auto wref = [&](int mode, int k, int s) -> double& {
    return w[(static_cast<std::size_t>(mode - 1) * (steps + 1) + k) * n + s];
  };
  const std::vector<double> empty_y;

  for (;;) {
    for (int i = 1; i <= m; ++i)
      for (int s = 0; s < n; ++s) wref(i, steps, s) = spec.terminal(i, chain.states[s]);
    for (int k = steps - 1; k >= 0; --k) {
      const double t = chain.times[k];
      const double dt = chain.times[k + 1] - chain.times[k];
      for (int s = 0; s < n; ++s) {
        const auto& d = sp[static_cast<std::size_t>(k) * n + s];
        for (int i = 1; i <= m; ++i) {
          const int occupied = policy[(k * n + s) * m + (i - 1)] + 1;
          double expect = 0.0;
          for (int s2 = 0; s2 < n; ++s2)
            expect += chain.prob(k, s, s2) * wref(occupied, k + 1, s2);
          wref(i, k, s) = -d[(i - 1) * m + (occupied - 1)] +
                          spec.driver(occupied, t, chain.states[s], empty_y) * dt + expect;
        }
      }
    }
    for (int i = 1; i <= m; ++i)
      for (int s = 0; s < n; ++s)
        out.best[static_cast<std::size_t>(i - 1) * n + s] =
            std::max(out.best[static_cast<std::size_t>(i - 1) * n + s], wref(i, 0, s));
    out.policies_evaluated += 1.0;

    int pos = 0;
    for (; pos < decisions; ++pos) {
      if (++policy[pos] < m) break;
      policy[pos] = 0;
    }
    if (pos == decisions) break;
  }
  return out;
}

}  // namespace oswitch
