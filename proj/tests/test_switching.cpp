#include <cmath>

#include "doctest.h"
#include "oswitch/numerics.hpp"
#include "oswitch/switching.hpp"

using namespace oswitch;

namespace {

DriverFn const_driver(double c) {
  return [c](double, double, std::span<const double>) { return c; };
}
TerminalFn const_terminal(double c) {
  return [c](double) { return c; };
}
CostFn const_cost(double c) {
  return [c](double, double) { return c; };
}

SwitchingSpec two_mode_spec(double f1, double f2, double h1, double h2, double g12, double g21) {
  SwitchingSpec spec;
  spec.m = 2;
  spec.drivers = {const_driver(f1), const_driver(f2)};
  spec.terminals = {const_terminal(h1), const_terminal(h2)};
  spec.costs.assign(2, std::vector<CostFn>(2));
  spec.costs[0][1] = const_cost(g12);
  spec.costs[1][0] = const_cost(g21);
  return spec;
}

SimPath flat_path(double t0, double t1, int steps, double x) {
  SimPath p;
  p.t0 = t0;
  p.x0 = x;
  p.times = linspace(t0, t1, steps + 1);
  p.states.assign(steps + 1, x);
  p.steps.resize(steps);
  return p;
}

}  // namespace

TEST_CASE("non-free-loop validation") {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}, {0.5, 1.0}};
  SUBCASE("one-sided cost keeps every cycle positive") {
    auto spec = two_mode_spec(0, 0, 0, 0, 0.3, 0.0);
    const auto rep = validate_no_free_loop(spec, pts);
    CHECK(rep.ok);
    CHECK(rep.metrics.at("min_cycle_sum") == doctest::Approx(0.3));
  }
  SUBCASE("zero round trip is rejected naming the point") {
    auto spec = two_mode_spec(0, 0, 0, 0, 0.0, 0.0);
    const auto rep = validate_no_free_loop(spec, pts);
    CHECK_FALSE(rep.ok);
    CHECK(rep.summary().find("free loop") != std::string::npos);
    CHECK(rep.metrics.at("min_cycle_sum") == doctest::Approx(0.0));
  }
  SUBCASE("three-mode cycle sums") {
    SwitchingSpec spec;
    spec.m = 3;
    for (int i = 0; i < 3; ++i) {
      spec.drivers.push_back(const_driver(0));
      spec.terminals.push_back(const_terminal(0));
    }
    spec.costs.assign(3, std::vector<CostFn>(3));
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j)
        if (i != j) spec.costs[i - 1][j - 1] = const_cost(1.0);
    spec.costs[0][1] = const_cost(0.1);  // g12
    spec.costs[1][2] = const_cost(0.1);  // g23
    spec.costs[2][0] = const_cost(0.1);  // g31
    const auto rep = validate_no_free_loop(spec, pts);
    CHECK(rep.ok);
    CHECK(rep.metrics.at("min_cycle_sum") == doctest::Approx(0.3));
  }
  SUBCASE("single mode is vacuous") {
    SwitchingSpec spec;
    spec.m = 1;
    spec.drivers = {const_driver(0)};
    spec.terminals = {const_terminal(0)};
    spec.costs.assign(1, std::vector<CostFn>(1));
    CHECK(validate_no_free_loop(spec, pts).ok);
  }
}

TEST_CASE("terminal consistency validation") {
  std::vector<double> xs{-1.0, 0.0, 2.0};
  SUBCASE("equal terminals with positive costs pass") {
    auto spec = two_mode_spec(0, 0, 0.0, 0.0, 0.5, 0.5);
    const auto rep = validate_consistency(spec, 1.0, xs);
    CHECK(rep.ok);
    CHECK(rep.metrics.at("worst_margin") == doctest::Approx(0.5));
  }
  SUBCASE("a dominated terminal fails at mode 1") {
    auto spec = two_mode_spec(0, 0, 0.0, 1.0, 0.5, 0.5);
    const auto rep = validate_consistency(spec, 1.0, xs);
    CHECK_FALSE(rep.ok);
    CHECK(rep.metrics.at("worst_margin") == doctest::Approx(-0.5));
    CHECK(rep.metrics.at("worst_mode") == doctest::Approx(1));
  }
  SUBCASE("single mode is vacuous") {
    SwitchingSpec spec;
    spec.m = 1;
    spec.drivers = {const_driver(0)};
    spec.terminals = {const_terminal(0)};
    spec.costs.assign(1, std::vector<CostFn>(1));
    CHECK(validate_consistency(spec, 1.0, xs).ok);
  }
}

TEST_CASE("cumulative switching cost") {
  auto spec = two_mode_spec(0, 0, 0, 0, 0.3, 0.4);
  const SimPath path = flat_path(0.0, 1.0, 10, 0.0);
  SUBCASE("no events") {
    Strategy s{1, {}};
    const auto cost = cumulative_cost(spec, s, path);
    CHECK(cost.total == doctest::Approx(0.0));
    CHECK(cost.at(1.0) == doctest::Approx(0.0));
  }
  SUBCASE("single event") {
    Strategy s{1, {{0.5, 2}}};
    auto spec2 = two_mode_spec(0, 0, 0, 0, 0.5, 0.5);
    const auto cost = cumulative_cost(spec2, s, path);
    CHECK(cost.total == doctest::Approx(0.5));
    CHECK(cost.at(0.4) == doctest::Approx(0.0));
    CHECK(cost.at(0.5) == doctest::Approx(0.5));
  }
  SUBCASE("two events accumulate") {
    Strategy s{1, {{0.3, 2}, {0.7, 1}}};
    const auto cost = cumulative_cost(spec, s, path);
    CHECK(cost.total == doctest::Approx(0.7));
  }
  SUBCASE("additive over concatenation") {
    Strategy head{1, {{0.2, 2}}};
    Strategy tail{2, {{0.8, 1}}};
    Strategy joined{1, {{0.2, 2}, {0.8, 1}}};
    const double split = cumulative_cost(spec, head, path).total +
                         cumulative_cost(spec, tail, path).total;
    CHECK(cumulative_cost(spec, joined, path).total == doctest::Approx(split));
  }
  SUBCASE("event outside the horizon is rejected") {
    Strategy s{1, {{1.5, 2}}};
    CHECK_THROWS_AS(cumulative_cost(spec, s, path), std::invalid_argument);
  }
}

TEST_CASE("strategy mode lookup") {
  Strategy s{1, {{0.25, 2}, {0.5, 1}}};
  CHECK(s.mode_at(0.0) == 1);
  CHECK(s.mode_at(0.25) == 1);   // switch takes effect just after its stamp
  CHECK(s.mode_at(0.26) == 2);
  CHECK(s.mode_at(0.75) == 1);
  s.check(2, 0.0, 1.0);
  Strategy bad{1, {{0.25, 1}}};  // no mode change
  CHECK_THROWS_AS(bad.check(2, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("monte carlo payoff") {
  LevyTriplet brownian{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn{[](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 1.0};
  SUBCASE("never-switch constant driver integrates exactly") {
    auto spec = two_mode_spec(1.5, 0.0, 0.0, 0.0, 0.3, 0.3);
    McOptions opts;
    opts.t_max = 1.0;
    opts.n_steps = 50;
    const auto res =
        mc_payoff(spec, dyn, brownian, Policy::fixed(Strategy{1, {}}), 0.0, 0.0, 1, 200, 9, opts);
    CHECK(res.mean == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(res.std_error == doctest::Approx(0.0));
  }
  SUBCASE("a single switch pays its cost") {
    auto spec = two_mode_spec(0.0, 0.0, 0.0, 0.0, 0.5, 0.5);
    McOptions opts;
    opts.t_max = 1.0;
    const auto res = mc_payoff(spec, dyn, brownian, Policy::fixed(Strategy{1, {{0.5, 2}}}), 0.0,
                               0.0, 1, 100, 9, opts);
    CHECK(res.mean == doctest::Approx(-0.5).epsilon(1e-12));
  }
  SUBCASE("raising a driver never lowers the payoff") {
    auto lo = two_mode_spec(0.2, 0.0, 0.0, 0.0, 0.3, 0.3);
    auto hi = two_mode_spec(0.7, 0.0, 0.0, 0.0, 0.3, 0.3);
    McOptions opts;
    opts.t_max = 1.0;
    const Policy policy = Policy::fixed(Strategy{1, {}});
    const auto a = mc_payoff(lo, dyn, brownian, policy, 0.0, 0.0, 1, 500, 4, opts);
    const auto b = mc_payoff(hi, dyn, brownian, policy, 0.0, 0.0, 1, 500, 4, opts);
    CHECK(b.mean >= a.mean - 1e-12);
  }
  SUBCASE("coupled drivers require coupling fields") {
    SwitchingSpec spec = two_mode_spec(0, 0, 0, 0, 0.3, 0.3);
    spec.drivers[0] = [](double, double, std::span<const double> y) {
      return y.empty() ? 0.0 : y[1];
    };
    spec.drivers_coupled = true;
    McOptions opts;
    opts.t_max = 1.0;
    CHECK_THROWS_AS(mc_payoff(spec, dyn, brownian, Policy::fixed(Strategy{1, {}}), 0.0, 0.0, 1,
                              10, 1, opts),
                    std::invalid_argument);
  }
}

TEST_CASE("strategy extraction from fields") {
  Grid g;
  g.t_max = 1.0;
  g.nt = 10;
  g.x_min = -2.0;
  g.x_max = 2.0;
  g.nx = 20;
  SUBCASE("no touching: empty event list") {
    auto spec = two_mode_spec(0, 0, 0, 0, 0.4, 0.4);
    ValueFields fields(g, 2);
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n <= g.nx; ++n) {
        fields.at(1, k, n) = 1.0;  // u1 > u2 - g12 always
        fields.at(2, k, n) = 1.0;
      }
    const SimPath path = flat_path(0.0, 1.0, g.nt, 0.0);
    const auto s = strategy_from_fields(fields, spec, path, 1, 1e-9, 20);
    CHECK(s.events.empty());
  }
  SUBCASE("dominated start mode switches immediately") {
    auto spec = two_mode_spec(0, 0, 0, 0, 0.4, 0.4);
    ValueFields fields(g, 2);
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n <= g.nx; ++n) {
        fields.at(1, k, n) = 0.6;  // exactly u2 - g12: touching
        fields.at(2, k, n) = 1.0;
      }
    const SimPath path = flat_path(0.0, 1.0, g.nt, 0.0);
    const auto s = strategy_from_fields(fields, spec, path, 1, 1e-9, 20);
    REQUIRE(s.events.size() == 1);
    CHECK(s.events[0].time == doctest::Approx(0.0));
    CHECK(s.events[0].mode == 2);
  }
  SUBCASE("cap converts a near-free loop into an error") {
    auto spec = two_mode_spec(0, 0, 0, 0, 0.0, 0.0);  // free loop
    ValueFields fields(g, 2);
    const SimPath path = flat_path(0.0, 1.0, g.nt, 0.0);
    CHECK_THROWS_AS(strategy_from_fields(fields, spec, path, 1, 1e-6, 5), std::runtime_error);
  }
}
