#include <cmath>

#include "doctest.h"
#include "oswitch/ipde.hpp"
#include "oswitch/numerics.hpp"

using namespace oswitch;

namespace {

Dynamics unit_dyn(double sigma = 1.0, double b = 0.0) {
  return Dynamics{[b](double, double) { return b; },
                  [sigma](double, double) { return sigma; }, std::abs(sigma) + 0.001};
}

Grid make_grid(double T, int nt, double lo, double hi, int nx) {
  Grid g;
  g.t_max = T;
  g.nt = nt;
  g.x_min = lo;
  g.x_max = hi;
  g.nx = nx;
  return g;
}

SwitchingSpec single_mode(DriverFn f, TerminalFn h) {
  SwitchingSpec spec;
  spec.m = 1;
  spec.drivers = {std::move(f)};
  spec.terminals = {std::move(h)};
  spec.costs.assign(1, std::vector<CostFn>(1));
  return spec;
}

DriverFn zero_driver() {
  return [](double, double, std::span<const double>) { return 0.0; };
}

}  // namespace

TEST_CASE("quadrature split") {
  Grid g = make_grid(1.0, 10, -3, 3, 60);
  SUBCASE("empty measure") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    const auto tab = build_quadrature(tr, g, 0.5);
    CHECK(tab.small_sq == doctest::Approx(0.0));
    CHECK(tab.nodes.empty());
  }
  SUBCASE("single large atom becomes one node") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{1.0, 1.0}})};
    const auto tab = build_quadrature(tr, g, 0.5);
    REQUIRE(tab.nodes.size() == 1);
    CHECK(tab.nodes[0].y == doctest::Approx(1.0));
    CHECK(tab.nodes[0].w == doctest::Approx(1.0));
    CHECK(tab.small_sq == doctest::Approx(0.0));
  }
  SUBCASE("atoms split by the radius") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{0.1, 1.0}, {2.0, 1.0}})};
    const auto tab = build_quadrature(tr, g, 0.5);
    REQUIRE(tab.nodes.size() == 1);
    CHECK(tab.small_sq == doctest::Approx(0.01));
    CHECK(tab.nodes[0].y == doctest::Approx(2.0));
  }
  SUBCASE("density tails integrate to the tail mass") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::double_exp(2.0, 0.6, 2.5, 3.0)};
    const double delta = 0.3;
    const auto tab = build_quadrature(tr, g, delta);
    CHECK(tab.node_mass ==
          doctest::Approx(tr.measure.tail_mass(delta)).epsilon(1e-8));
    const double second = tab.small_sq + tab.node_second_moment;
    CHECK(second == doctest::Approx(tr.measure.moment(2)).epsilon(1e-6));
  }
}

TEST_CASE("default jump-split radius avoids atoms") {
  Grid g = make_grid(1.0, 10, -3, 3, 60);  // dx = 0.1
  LevyTriplet clean{0.0, 0.0, JumpMeasure::from_atoms({{2.0, 1.0}})};
  CHECK(default_delta(clean, g, 1.0) == doctest::Approx(0.4));
  LevyTriplet clash{0.0, 0.0, JumpMeasure::from_atoms({{0.41, 1.0}})};
  const double d = default_delta(clash, g, 1.0);
  CHECK((std::abs(d * 0.9) > 0.41 || std::abs(d * 1.1) < 0.41));
  CHECK(d * 1.0 >= 2.0 * g.dx() - 1e-12);
}

TEST_CASE("nonlocal operator examples") {
  Grid g = make_grid(1.0, 10, -4, 4, 80);
  Dynamics dyn = unit_dyn();
  SUBCASE("linear slices are annihilated away from the clamp") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{1.0, 0.7}})};
    const auto tab = build_quadrature(tr, g, 0.4);
    std::vector<double> u(g.nx + 1);
    for (int n = 0; n <= g.nx; ++n) u[n] = 2.0 * g.x_node(n) + 1.0;
    const auto out = apply_nonlocal(u, g, tab, dyn, 0.0);
    for (int n = 0; n <= g.nx; ++n) {
      if (g.x_node(n) + 1.0 > g.x_max || g.x_node(n) - 1.0 < g.x_min) continue;
      CHECK(std::abs(out[n]) <= 1e-12);
    }
  }
  SUBCASE("quadratic slice picks up c^2 per unit mass") {
    const double c = 1.5;
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{c, 1.0}})};
    const auto tab = build_quadrature(tr, g, 0.4);
    std::vector<double> u(g.nx + 1);
    for (int n = 0; n <= g.nx; ++n) u[n] = g.x_node(n) * g.x_node(n);
    const auto out = apply_nonlocal(u, g, tab, dyn, 0.0);
    for (int n = 1; n < g.nx; ++n) {
      const double x = g.x_node(n);
      if (x + c > g.x_max || x - c < g.x_min) continue;
      CHECK(out[n] == doctest::Approx(c * c).epsilon(1e-10));
    }
  }
  SUBCASE("zero measure gives the zero operator") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    const auto tab = build_quadrature(tr, g, 0.4);
    std::vector<double> u(g.nx + 1);
    for (int n = 0; n <= g.nx; ++n) u[n] = std::sin(g.x_node(n));
    const auto out = apply_nonlocal(u, g, tab, dyn, 0.0);
    for (double v : out) CHECK(v == doctest::Approx(0.0));
  }
}

TEST_CASE("local operator examples") {
  Grid g = make_grid(1.0, 10, -4, 4, 80);
  SUBCASE("constants are annihilated") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    std::vector<double> u(g.nx + 1, 3.7);
    const auto out = apply_local(u, g, unit_dyn(), tr, 0.0);
    for (double v : out) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("pure drift on a linear slice") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::none()};
    Dynamics dyn{[](double, double) { return 0.8; }, [](double, double) { return 0.0; }, 0.1};
    std::vector<double> u(g.nx + 1);
    for (int n = 0; n <= g.nx; ++n) u[n] = g.x_node(n);
    const auto out = apply_local(u, g, dyn, tr, 0.0);
    for (int n = 0; n <= g.nx; ++n) CHECK(out[n] == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("Brownian diffusion on a quadratic slice") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    std::vector<double> u(g.nx + 1);
    for (int n = 0; n <= g.nx; ++n) u[n] = g.x_node(n) * g.x_node(n);
    const auto out = apply_local(u, g, unit_dyn(), tr, 0.0);
    for (int n = 1; n < g.nx; ++n) CHECK(out[n] == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("obstacle projection") {
  SUBCASE("two sweeps stabilize the documented example") {
    std::vector<double> v{0.0, 1.0};
    obstacle_project(v, [](int, int) { return 0.4; }, 1e-12);
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(1.0));
  }
  SUBCASE("feasible input is a fixed point") {
    std::vector<double> v{1.0, 1.1};
    obstacle_project(v, [](int, int) { return 0.4; }, 1e-12);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v[1] == doctest::Approx(1.1));
  }
  SUBCASE("three modes lift through the cheap target") {
    std::vector<double> v{0.0, 0.0, 5.0};
    auto cost = [](int i, int j) { return j == 3 ? 1.0 : (i == j ? 0.0 : 10.0); };
    obstacle_project(v, cost, 1e-12);
    CHECK(v[0] == doctest::Approx(4.0));
    CHECK(v[1] == doctest::Approx(4.0));
    CHECK(v[2] == doctest::Approx(5.0));
  }
  SUBCASE("free loop fails to settle") {
    std::vector<double> v{0.0, 1.0};
    CHECK_THROWS_AS(obstacle_project(v, [](int, int) { return -0.2; }, 1e-12),
                    std::runtime_error);
  }
}

TEST_CASE("single backward step") {
  Grid g = make_grid(1.0, 10, -6, 6, 120);
  LevyTriplet brownian{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  const auto quad = build_quadrature(brownian, g, 0.4);
  SUBCASE("zero data stays zero") {
    SwitchingSpec spec = single_mode(zero_driver(), [](double) { return 0.0; });
    std::vector<std::vector<double>> next(1, std::vector<double>(g.nx + 1, 0.0));
    const auto out = step_backward(next, next, spec, g, quad, dyn, brownian, 0.9);
    for (double v : out[0]) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("linear terminal is invariant") {
    SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x; });
    std::vector<std::vector<double>> next(1, std::vector<double>(g.nx + 1));
    for (int n = 0; n <= g.nx; ++n) next[0][n] = g.x_node(n);
    const auto out = step_backward(next, next, spec, g, quad, dyn, brownian, 0.9);
    for (int n = 0; n <= g.nx; ++n)
      CHECK(out[0][n] == doctest::Approx(g.x_node(n)).epsilon(1e-10));
  }
  SUBCASE("quadratic terminal gains dt") {
    SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x * x; });
    std::vector<std::vector<double>> next(1, std::vector<double>(g.nx + 1));
    for (int n = 0; n <= g.nx; ++n) next[0][n] = g.x_node(n) * g.x_node(n);
    const auto out = step_backward(next, next, spec, g, quad, dyn, brownian, 0.9);
    // boundary rows carry no diffusion; their deficit decays geometrically
    // into the interior, so check well away from the edges
    for (int n = 0; n <= g.nx; ++n) {
      const double x = g.x_node(n);
      if (std::abs(x) > 2.5) continue;
      const double want = x * x + g.dt();
      CHECK(std::abs(out[0][n] - want) <= 1e-8 * (1.0 + std::abs(want)));
    }
  }
}

TEST_CASE("monotone solver on closed forms") {
  LevyTriplet brownian{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  SUBCASE("zero data solves to zero") {
    Grid g = make_grid(1.0, 20, -5, 5, 50);
    SwitchingSpec spec = single_mode(zero_driver(), [](double) { return 0.0; });
    const auto fields = solve_monotone(spec, dyn, brownian, g);
    for (double v : fields.data()) CHECK(v == doctest::Approx(0.0));
    CHECK(fields.diagnostics.outer_iterations <= 2);
  }
  SUBCASE("martingale terminal stays linear") {
    Grid g = make_grid(1.0, 40, -8, 8, 80);
    SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x; });
    const auto fields = solve_monotone(spec, dyn, brownian, g);
    for (int k = 0; k <= g.nt; ++k)
      for (int n = 0; n <= g.nx; ++n)
        CHECK(std::abs(fields.at(1, k, n) - g.x_node(n)) <= 1e-8);
  }
  SUBCASE("second moment accrues T - t in the interior") {
    Grid g = make_grid(1.0, 50, -10, 10, 100);
    SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x * x; });
    const auto fields = solve_monotone(spec, dyn, brownian, g);
    for (int k = 0; k < g.nt; ++k) {
      for (int n = 0; n <= g.nx; ++n) {
        const double x = g.x_node(n);
        if (std::abs(x) > 2.0) continue;
        const double want = x * x + (g.t_max - g.t_node(k));
        CHECK(std::abs(fields.at(1, k, n) - want) <= 1e-6);
      }
    }
  }
}

TEST_CASE("symmetric two-mode problem collapses to the single-mode solution") {
  LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  Grid g = make_grid(0.5, 20, -6, 6, 60);
  auto f = [](double, double x, std::span<const double>) { return 0.3 * std::sin(x); };
  auto h = [](double x) { return std::cos(x); };
  SwitchingSpec one = single_mode(f, h);
  SwitchingSpec two;
  two.m = 2;
  two.drivers = {f, f};
  two.terminals = {h, h};
  two.costs.assign(2, std::vector<CostFn>(2));
  two.costs[0][1] = [](double, double) { return 0.25; };
  two.costs[1][0] = [](double, double) { return 0.25; };
  const auto u1 = solve_monotone(one, dyn, tr, g);
  const auto u2 = solve_monotone(two, dyn, tr, g);
  for (int k = 0; k <= g.nt; ++k)
    for (int n = 0; n <= g.nx; ++n) {
      CHECK(std::abs(u2.at(1, k, n) - u2.at(2, k, n)) <= 1e-9);
      CHECK(std::abs(u2.at(1, k, n) - u1.at(1, k, n)) <= 1e-7);
    }
  CHECK(u2.diagnostics.obstacle_active_fraction == doctest::Approx(0.0));
}

TEST_CASE("picard solver") {
  LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  Grid g = make_grid(0.5, 20, -6, 6, 60);
  SUBCASE("decoupled drivers converge on the second sweep") {
    SwitchingSpec spec;
    spec.m = 2;
    spec.drivers = {[](double, double x, std::span<const double>) { return 0.2 * x; },
                    [](double, double x, std::span<const double>) { return -0.1 * x; }};
    spec.terminals = {[](double) { return 0.0; }, [](double) { return 0.0; }};
    spec.costs.assign(2, std::vector<CostFn>(2));
    spec.costs[0][1] = [](double, double) { return 0.3; };
    spec.costs[1][0] = [](double, double) { return 0.3; };
    const auto fields = solve_picard(spec, dyn, tr, g);
    CHECK(fields.diagnostics.outer_iterations == 2);
  }
  SUBCASE("agrees with the monotone scheme under nondecreasing coupling") {
    SwitchingSpec spec;
    spec.m = 2;
    spec.coupling = Coupling::kNondecreasing;
    spec.lipschitz_y = {0.3, 0.3};
    spec.drivers = {[](double, double x, std::span<const double> y) {
                      return 0.2 * x + 0.3 * y[1];
                    },
                    [](double, double x, std::span<const double> y) {
                      return -0.1 * x + 0.3 * y[0];
                    }};
    spec.drivers_coupled = true;
    spec.terminals = {[](double x) { return std::cos(x); }, [](double x) { return std::cos(x); }};
    spec.costs.assign(2, std::vector<CostFn>(2));
    spec.costs[0][1] = [](double, double) { return 0.2; };
    spec.costs[1][0] = [](double, double) { return 0.2; };
    const auto a = solve_monotone(spec, dyn, tr, g);
    const auto b = solve_picard(spec, dyn, tr, g);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
      worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    CHECK(worst <= 2e-6);  // both fixed points of the same discrete system
    // contraction factors settle below one
    REQUIRE_FALSE(b.diagnostics.contraction_factors.empty());
    CHECK(b.diagnostics.contraction_factors.back() < 1.0);
  }
}

TEST_CASE("residual diagnostics") {
  LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  Grid g = make_grid(0.5, 20, -8, 8, 80);
  SUBCASE("zero solution has zero residual") {
    SwitchingSpec spec;
    spec.m = 2;
    spec.drivers = {zero_driver(), zero_driver()};
    spec.terminals = {[](double) { return 0.0; }, [](double) { return 0.0; }};
    spec.costs.assign(2, std::vector<CostFn>(2));
    spec.costs[0][1] = [](double, double) { return 0.5; };
    spec.costs[1][0] = [](double, double) { return 0.5; };
    const auto fields = solve_monotone(spec, dyn, tr, g);
    const auto quad = build_quadrature(tr, g, default_delta(tr, g, 1.0));
    const auto rep = residual_check(fields, spec, dyn, tr, quad);
    CHECK(rep.max_min_abs <= 1e-10);
    CHECK(rep.min_r1 >= 0.5 - 1e-12);  // obstacle slack is the switching cost
  }
  SUBCASE("martingale solution passes at tight tolerance") {
    SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x; });
    const auto fields = solve_monotone(spec, dyn, tr, g);
    const auto quad = build_quadrature(tr, g, default_delta(tr, g, 1.0));
    const auto rep = residual_check(fields, spec, dyn, tr, quad);
    CHECK(rep.max_min_abs <= 1e-6);
  }
  SUBCASE("an injected obstacle violation is located") {
    SwitchingSpec spec;
    spec.m = 2;
    spec.drivers = {zero_driver(), zero_driver()};
    spec.terminals = {[](double) { return 0.0; }, [](double) { return 0.0; }};
    spec.costs.assign(2, std::vector<CostFn>(2));
    spec.costs[0][1] = [](double, double) { return 0.5; };
    spec.costs[1][0] = [](double, double) { return 0.5; };
    auto fields = solve_monotone(spec, dyn, tr, g);
    fields.at(1, 3, 10) = -1.0;  // forces u1 < u2 - g12 there
    const auto quad = build_quadrature(tr, g, default_delta(tr, g, 1.0));
    const auto rep = residual_check(fields, spec, dyn, tr, quad);
    CHECK(rep.min_r1 == doctest::Approx(-0.5));
  }
}

TEST_CASE("perturbation keeps the supersolution side for large lambda") {
  LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  Grid g = make_grid(0.5, 20, -6, 6, 60);
  SwitchingSpec spec = single_mode(zero_driver(), [](double x) { return x; });
  const auto fields = solve_monotone(spec, dyn, tr, g);
  const auto quad = build_quadrature(tr, g, default_delta(tr, g, 1.0));
  SUBCASE("theta = 0 leaves the fields untouched") {
    const auto v = perturb_fields(fields, 0.0, 4.0, 1, +1);
    CHECK(v.data() == fields.data());
  }
  SUBCASE("doubling search terminates on both sides") {
    const double tol = residual_tolerance(fields);
    const auto sup = perturbation_lambda_search(fields, spec, dyn, tr, quad, 0.1, 1, +1, tol);
    CHECK(sup.found);
    const auto sub = perturbation_lambda_search(fields, spec, dyn, tr, quad, 0.1, 1, -1, tol);
    CHECK(sub.found);
  }
}

TEST_CASE("comparison monotonicity of the solver") {
  LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
  Dynamics dyn = unit_dyn();
  Grid g = make_grid(0.5, 20, -6, 6, 60);
  auto base = [&](double bump_f, double bump_h, double shrink_g) {
    SwitchingSpec spec;
    spec.m = 2;
    spec.drivers = {[bump_f](double, double x, std::span<const double>) {
                      return 0.4 * std::max(x, 0.0) + bump_f;
                    },
                    [bump_f](double, double x, std::span<const double>) {
                      return -0.2 * x + bump_f;
                    }};
    spec.terminals = {[bump_h](double x) { return std::cos(x) + bump_h; },
                      [bump_h](double x) { return std::cos(x) + bump_h; }};
    spec.costs.assign(2, std::vector<CostFn>(2));
    spec.costs[0][1] = [shrink_g](double, double) { return 0.3 * shrink_g; };
    spec.costs[1][0] = [shrink_g](double, double) { return 0.3 * shrink_g; };
    return solve_monotone(spec, dyn, tr, g);
  };
  const auto lo = base(0.0, 0.0, 1.0);
  const auto hi = base(0.2, 0.2, 0.5);  // raise f, raise h, halve g
  const double tol = 2.0 * residual_tolerance(lo);
  for (std::size_t i = 0; i < lo.data().size(); ++i)
    CHECK(hi.data()[i] >= lo.data()[i] - tol);
}
