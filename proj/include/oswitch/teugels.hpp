#pragma once

#include <vector>

#include "oswitch/levy.hpp"
#include "oswitch/path_sim.hpp"

namespace oswitch {

/// Moments of nu(dx) = x^2 Pi(dx) + varpi^2 delta_0(dx) for k = 0..2n.
std::vector<double> nu_moment_table(const LevyTriplet& triplet, int n);

/// Coefficients of the polynomials orthonormal in L^2(nu), plus the derived
/// families p_i(x) = x q_{i-1}(x) and ptilde_i(x) = x (q_{i-1}(x) - q_{i-1}(0)).
/// Rows at or beyond degenerate_rank are identically zero: the polynomial
/// space of nu has fewer than n_max dimensions there.
class OrthonormalBasis {
 public:
  int n_max() const { return n_max_; }
  int degenerate_rank() const { return rank_; }
  const std::vector<double>& nu_moments() const { return nu_moments_; }

  /// c_{i,k} with 1 <= k <= i <= n_max (zero beyond the rank).
  double coeff(int i, int k) const;

  double eval_q(int i, double x) const;        // 0-based degree index
  double eval_p(int i, double x) const;        // 1-based martingale index
  double eval_p_tilde(int i, double x) const;  // 1-based
  double q_at_zero(int i) const;               // q_{i-1}(0) = c_{i,1}

 private:
  int n_max_ = 0;
  int rank_ = 0;
  std::vector<double> coeffs_;  // row-major lower triangle, n_max x n_max
  std::vector<double> nu_moments_;
  friend OrthonormalBasis build_basis(const LevyTriplet&, int);
};

/// Gram-Schmidt of 1, x, x^2, ... in L^2(nu) via Cholesky of the Hankel moment
/// matrix. Throws on a zero nu measure or an ill-conditioned moment matrix.
OrthonormalBasis build_basis(const LevyTriplet& triplet, int n_max);

/// Deterministic compensator rates entering the martingale increments.
struct TeugelsCompensator {
  double mean_l1 = 0.0;
  std::vector<double> ptilde_rate;  // ∫ ptilde_i dPi for i = 1..n_max
};

TeugelsCompensator make_compensator(const OrthonormalBasis& basis, const LevyTriplet& triplet);

struct TeugelsIncrements {
  std::size_t n_steps = 0;
  int n_max = 0;
  std::vector<double> dh;  // [step][i], row-major

  double at(std::size_t step, int i) const { return dh[step * n_max + (i - 1)]; }
  /// H^(i)_T accumulated over the whole path.
  double total(int i) const;
};

/// Martingale increments along a simulated path, assembled from the recorded
/// jump sizes and the deterministic compensator.
TeugelsIncrements teugels_path_increments(const OrthonormalBasis& basis, const SimPath& path,
                                          const TeugelsCompensator& comp);

}  // namespace oswitch
