#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace oswitch {

struct QuadratureError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GaussLegendre {
  std::vector<double> nodes;    // on (-1, 1)
  std::vector<double> weights;  // sum to 2
};

/// Nodes and weights of the n-point Gauss-Legendre rule on (-1, 1).
const GaussLegendre& gauss_legendre(int n);

/// Integrates f over [a, b] with a fixed n-point rule.
double integrate_fixed(const std::function<double(double)>& f, double a, double b, int n);

/// Composite Gauss-Legendre over [a, b], doubling the panel count until two
/// successive levels agree to rel_tol (relative) or abs_floor (absolute).
/// Throws QuadratureError when the doubling ladder does not settle.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-8, double abs_floor = 1e-14);

/// Solves a tridiagonal system in place. lower[0] and upper[n-1] are unused.
/// rhs is overwritten with the solution.
void solve_tridiagonal(std::span<const double> lower, std::span<double> diag,
                       std::span<const double> upper, std::span<double> rhs);

/// splitmix64 step; used to derive independent stream seeds from (seed, index).
std::uint64_t mix64(std::uint64_t x);

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

struct MeanStdErr {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

MeanStdErr mean_std_error(std::span<const double> samples);

std::vector<double> linspace(double a, double b, int n_points);

}  // namespace oswitch
