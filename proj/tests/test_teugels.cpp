#include <cmath>
#include <random>

#include "doctest.h"
#include "oswitch/numerics.hpp"
#include "oswitch/teugels.hpp"

using namespace oswitch;

namespace {

// Exact integral of q_n * q_m against nu for atom measures: nu has an atom of
// weight mass*x^2 at each jump atom plus varpi^2 at zero.
double nu_inner(const OrthonormalBasis& basis, const LevyTriplet& tr, int n, int m) {
  double acc = 0.0;
  for (const Atom& a : tr.measure.atoms()) {
    acc += a.mass * a.location * a.location * basis.eval_q(n, a.location) *
           basis.eval_q(m, a.location);
  }
  acc += tr.varpi * tr.varpi * basis.eval_q(n, 0.0) * basis.eval_q(m, 0.0);
  return acc;
}

}  // namespace

TEST_CASE("nu moment table") {
  SUBCASE("pure Brownian: nu is the Dirac mass at zero") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    const auto mu = nu_moment_table(tr, 2);
    REQUIRE(mu.size() == 5);
    CHECK(mu[0] == doctest::Approx(1.0));
    for (int k = 1; k <= 4; ++k) CHECK(mu[k] == doctest::Approx(0.0));
  }
  SUBCASE("two symmetric atoms") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{-1.0, 1.0}, {1.0, 1.0}})};
    const auto mu = nu_moment_table(tr, 1);
    CHECK(mu[0] == doctest::Approx(2.0));
    CHECK(mu[1] == doctest::Approx(0.0));
    CHECK(mu[2] == doctest::Approx(2.0));
  }
  SUBCASE("single atom closed form") {
    const double lam = 2.0, c = 0.7;
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{c, lam}})};
    const auto mu = nu_moment_table(tr, 3);
    for (int k = 0; k <= 6; ++k) CHECK(mu[k] == doctest::Approx(lam * std::pow(c, k + 2)));
  }
}

TEST_CASE("basis construction and degeneracy") {
  SUBCASE("Brownian: only the constant polynomial survives") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    const auto basis = build_basis(tr, 3);
    CHECK(basis.degenerate_rank() == 1);
    CHECK(basis.eval_q(0, 0.37) == doctest::Approx(1.0));
    CHECK(basis.eval_q(1, 0.37) == doctest::Approx(0.0));
    CHECK(basis.eval_q(2, -2.0) == doctest::Approx(0.0));
    CHECK(basis.coeff(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("Poisson-type: single support point") {
    const double lam = 2.0;
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{1.0, lam}})};
    const auto basis = build_basis(tr, 3);
    CHECK(basis.degenerate_rank() == 1);
    CHECK(basis.eval_q(0, 5.0) == doctest::Approx(1.0 / std::sqrt(lam)));
  }
  SUBCASE("two atoms: rank two and explicit polynomials") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{-1.0, 1.0}, {1.0, 1.0}})};
    const auto basis = build_basis(tr, 3);
    CHECK(basis.degenerate_rank() == 2);
    CHECK(basis.eval_q(0, 3.0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(basis.eval_q(1, 3.0) == doctest::Approx(3.0 / std::sqrt(2.0)));
    CHECK(basis.eval_q(2, 3.0) == doctest::Approx(0.0));
  }
  SUBCASE("zero measure is rejected") {
    LevyTriplet tr{1.0, 0.0, JumpMeasure::none()};
    CHECK_THROWS_WITH_AS(build_basis(tr, 2), doctest::Contains("degenerate"),
                         std::runtime_error);
  }
  SUBCASE("c_{1,1} equals the closed form") {
    LevyTriplet tr{0.0, 0.7, JumpMeasure::from_atoms({{0.5, 2.0}, {-1.2, 0.4}})};
    const auto basis = build_basis(tr, 4);
    const double want = 1.0 / std::sqrt(pi_moment(tr.measure, 2) + tr.varpi * tr.varpi);
    CHECK(basis.coeff(1, 1) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("orthonormality via exact atom sums") {
  LevyTriplet tr{0.0, 0.4, JumpMeasure::from_atoms({{-1.0, 0.8}, {0.6, 1.0}, {1.7, 0.3}})};
  const auto basis = build_basis(tr, 5);
  CHECK(basis.degenerate_rank() == 4);  // support of nu = {-1, 0, 0.6, 1.7}
  for (int n = 0; n < basis.degenerate_rank(); ++n) {
    for (int m = 0; m < basis.degenerate_rank(); ++m) {
      const double want = n == m ? 1.0 : 0.0;
      CHECK(std::abs(nu_inner(basis, tr, n, m) - want) <= 1e-10);
    }
  }
}

TEST_CASE("scale consistency: scaling the measure rescales the polynomials") {
  const double c = 3.7;
  LevyTriplet tr{0.0, 0.5, JumpMeasure::from_atoms({{0.9, 1.1}, {-0.4, 0.6}})};
  LevyTriplet scaled{0.0, std::sqrt(c) * 0.5,
                     JumpMeasure::from_atoms({{0.9, c * 1.1}, {-0.4, c * 0.6}})};
  const auto b1 = build_basis(tr, 3);
  const auto b2 = build_basis(scaled, 3);
  CHECK(b1.degenerate_rank() == b2.degenerate_rank());
  for (int i = 0; i < b1.degenerate_rank(); ++i) {
    for (double x : {-1.0, 0.0, 0.3, 2.0}) {
      CHECK(std::abs(b2.eval_q(i, x) - b1.eval_q(i, x) / std::sqrt(c)) <= 1e-10);
    }
  }
}

TEST_CASE("p and ptilde evaluations") {
  SUBCASE("Brownian p_1 is the identity") {
    LevyTriplet tr{0.0, 1.0, JumpMeasure::none()};
    const auto basis = build_basis(tr, 2);
    CHECK(basis.eval_p(1, 1.7) == doctest::Approx(1.7));
  }
  SUBCASE("ptilde_1 vanishes identically") {
    LevyTriplet tr{0.0, 0.3, JumpMeasure::from_atoms({{0.8, 1.5}})};
    const auto basis = build_basis(tr, 3);
    for (double x : {-2.0, 0.0, 0.5, 4.0}) CHECK(basis.eval_p_tilde(1, x) == doctest::Approx(0.0));
  }
  SUBCASE("two-atom p_2 at the support") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{-1.0, 1.0}, {1.0, 1.0}})};
    const auto basis = build_basis(tr, 3);
    CHECK(basis.eval_p(2, 1.0) == doctest::Approx(1.0 / std::sqrt(2.0)));
    // ptilde_2(2) = 2 (q_1(2) - q_1(0)) = 2 * 2/sqrt(2)
    CHECK(basis.eval_p_tilde(2, 2.0) == doctest::Approx(2.0 * std::sqrt(2.0)));
  }
}

TEST_CASE("path increments") {
  SUBCASE("no jumps: only the compensated linear term") {
    LevyTriplet tr{0.4, 1.0, JumpMeasure::none()};
    const auto basis = build_basis(tr, 2);
    const auto comp = make_compensator(basis, tr);
    Dynamics dyn{[](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 1.0};
    std::mt19937_64 rng(5);
    const auto grid = linspace(0.0, 1.0, 11);
    const auto path = simulate_path(dyn, tr, 0.0, 0.0, grid, rng);
    const auto inc = teugels_path_increments(basis, path, comp);
    const double c11 = basis.coeff(1, 1);
    for (std::size_t k = 0; k < path.n_steps(); ++k) {
      const double dl = path.steps[k].dl;
      CHECK(inc.at(k, 1) == doctest::Approx(c11 * (dl - comp.mean_l1 * 0.1)).epsilon(1e-12));
      CHECK(inc.at(k, 2) == doctest::Approx(0.0));  // beyond the rank
    }
  }
  SUBCASE("jump part evaluates ptilde at the jump size") {
    LevyTriplet tr{0.0, 0.0, JumpMeasure::from_atoms({{-1.0, 1.0}, {1.0, 1.0}})};
    const auto basis = build_basis(tr, 3);
    const auto comp = make_compensator(basis, tr);
    SimPath path;
    path.t0 = 0.0;
    path.x0 = 0.0;
    path.times = {0.0, 0.001};
    path.states = {0.0, 2.0};
    StepRecord rec;
    rec.jumps = {2.0};
    rec.dl = 2.0;
    path.steps = {rec};
    const auto inc = teugels_path_increments(basis, path, comp);
    const double dt = 0.001;
    const double want2 = basis.q_at_zero(2) * (2.0 - comp.mean_l1 * dt) -
                         comp.ptilde_rate[1] * dt + basis.eval_p_tilde(2, 2.0);
    CHECK(inc.at(0, 2) == doctest::Approx(want2));
    // dt -> 0 limit: the jump contribution dominates and equals 2 sqrt(2)
    CHECK(std::abs(inc.at(0, 2) - 2.0 * std::sqrt(2.0)) <= 0.01);
  }
}

TEST_CASE("bracket statistics on a small sample") {
  // E[(H^i_1)^2] = 1 and cross moments vanish; small-sample version of the
  // acceptance check.
  LevyTriplet tr{0.1, 0.5, JumpMeasure::from_atoms({{-1.0, 0.6}, {0.7, 1.2}})};
  const auto basis = build_basis(tr, 3);
  REQUIRE(basis.degenerate_rank() == 3);
  const auto comp = make_compensator(basis, tr);
  Dynamics dyn{[](double, double) { return 0.0; }, [](double, double) { return 1.0; }, 1.0};
  const auto grid = linspace(0.0, 1.0, 101);
  const int n_paths = 4000;
  std::vector<std::vector<double>> h(3, std::vector<double>(n_paths));
  for (int p = 0; p < n_paths; ++p) {
    std::mt19937_64 rng(derive_seed(77, p));
    const auto path = simulate_path(dyn, tr, 0.0, 0.0, grid, rng);
    const auto inc = teugels_path_increments(basis, path, comp);
    for (int i = 1; i <= 3; ++i) h[i - 1][p] = inc.total(i);
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      std::vector<double> prod(n_paths);
      for (int p = 0; p < n_paths; ++p) prod[p] = h[i][p] * h[j][p];
      const auto ms = mean_std_error(prod);
      const double want = i == j ? 1.0 : 0.0;
      CHECK(std::abs(ms.mean - want) <= 4.0 * ms.std_error);
    }
    const auto mh = mean_std_error(h[i]);
    CHECK(std::abs(mh.mean) <= 4.0 * mh.std_error);
  }
}
