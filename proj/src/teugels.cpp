#include "oswitch/teugels.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace oswitch {

namespace {
constexpr double kPivotRel = 1e-12;
constexpr double kCondLimit = 1e14;
}  // namespace

std::vector<double> nu_moment_table(const LevyTriplet& triplet, int n) {
  if (n < 1) throw std::invalid_argument("nu_moment_table: n must be >= 1");
  std::vector<double> mu(2 * n + 1, 0.0);
  for (int k = 0; k <= 2 * n; ++k) {
    mu[k] = triplet.measure.is_zero() ? 0.0 : triplet.measure.moment(k + 2);
  }
  mu[0] += triplet.varpi * triplet.varpi;
  return mu;
}

double OrthonormalBasis::coeff(int i, int k) const {
  if (i < 1 || i > n_max_ || k < 1 || k > i) throw std::out_of_range("coeff index out of range");
  return coeffs_[(i - 1) * n_max_ + (k - 1)];
}

double OrthonormalBasis::eval_q(int i, double x) const {
  if (i < 0 || i >= n_max_) throw std::out_of_range("eval_q: degree out of range");
  if (i >= rank_) return 0.0;
  // q_i(x) = c_{i+1,i+1} x^i + ... + c_{i+1,1}
  const double* row = &coeffs_[i * n_max_];
  double acc = row[i];
  for (int k = i - 1; k >= 0; --k) acc = acc * x + row[k];
  return acc;
}

double OrthonormalBasis::eval_p(int i, double x) const {
  if (i < 1 || i > n_max_) throw std::out_of_range("eval_p: index out of range");
  return x * eval_q(i - 1, x);
}

double OrthonormalBasis::eval_p_tilde(int i, double x) const {
  return eval_p(i, x) - q_at_zero(i) * x;
}

double OrthonormalBasis::q_at_zero(int i) const {
  if (i < 1 || i > n_max_) throw std::out_of_range("q_at_zero: index out of range");
  if (i - 1 >= rank_) return 0.0;
  return coeffs_[(i - 1) * n_max_];
}

OrthonormalBasis build_basis(const LevyTriplet& triplet, int n_max) {
  if (n_max < 1) throw std::invalid_argument("build_basis: n_max must be >= 1");
  if (triplet.varpi < 0.0) throw std::invalid_argument("build_basis: varpi must be >= 0");
  const std::vector<double> mu = nu_moment_table(triplet, n_max);
  if (mu[0] <= 0.0)
    throw std::runtime_error("degenerate Levy process: nu is the zero measure");

  const int n = n_max;
  std::vector<double> hankel(n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) hankel[i * n + j] = mu[i + j];

  // Cholesky with rank detection: a pivot below the relative threshold means
  // x^j lies in the span of lower powers on the support of nu, and so do all
  // higher powers.
  std::vector<double> chol(n * n, 0.0);
  int rank = n;
  double min_pivot = 0.0, max_pivot = 0.0;
  for (int j = 0; j < n; ++j) {
    double d = hankel[j * n + j];
    for (int k = 0; k < j; ++k) d -= chol[j * n + k] * chol[j * n + k];
    const double scale = std::max(mu[0], hankel[j * n + j]);
    if (d <= kPivotRel * scale) {
      rank = j;
      break;
    }
    const double piv = std::sqrt(d);
    chol[j * n + j] = piv;
    min_pivot = (j == 0) ? d : std::min(min_pivot, d);
    max_pivot = std::max(max_pivot, d);
    for (int i = j + 1; i < n; ++i) {
      double s = hankel[i * n + j];
      for (int k = 0; k < j; ++k) s -= chol[i * n + k] * chol[j * n + k];
      chol[i * n + j] = s / piv;
    }
  }
  if (rank == 0) throw std::runtime_error("degenerate Levy process: nu is the zero measure");
  if (max_pivot / min_pivot > kCondLimit)
    throw std::runtime_error("moment matrix is ill-conditioned (pivot ratio " +
                             std::to_string(max_pivot / min_pivot) + ")");

  // Row i of inv(chol) gives the coefficients of q_i in the monomial basis.
  OrthonormalBasis basis;
  basis.n_max_ = n;
  basis.rank_ = rank;
  basis.nu_moments_ = mu;
  basis.coeffs_.assign(n * n, 0.0);
  for (int i = 0; i < rank; ++i) {
    basis.coeffs_[i * n + i] = 1.0 / chol[i * n + i];
    for (int j = i - 1; j >= 0; --j) {
      double s = 0.0;
      for (int k = j; k < i; ++k) s += chol[i * n + k] * basis.coeffs_[k * n + j];
      basis.coeffs_[i * n + j] = -s / chol[i * n + i];
    }
  }
  return basis;
}

TeugelsCompensator make_compensator(const OrthonormalBasis& basis, const LevyTriplet& triplet) {
  TeugelsCompensator comp;
  comp.mean_l1 = mean_l1(triplet);
  comp.ptilde_rate.assign(basis.n_max(), 0.0);
  if (triplet.measure.is_zero()) return comp;
  // ∫ ptilde_i dPi = sum_{k=2..i} c_{i,k} ∫ x^k dPi.
  std::vector<double> pi_moments(basis.n_max() + 1, 0.0);
  for (int k = 2; k <= basis.n_max(); ++k) pi_moments[k] = triplet.measure.moment(k);
  for (int i = 2; i <= basis.n_max(); ++i) {
    double rate = 0.0;
    if (i - 1 < basis.degenerate_rank()) {
      for (int k = 2; k <= i; ++k) rate += basis.coeff(i, k) * pi_moments[k];
    }
    comp.ptilde_rate[i - 1] = rate;
  }
  return comp;
}

double TeugelsIncrements::total(int i) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) acc += at(k, i);
  return acc;
}

TeugelsIncrements teugels_path_increments(const OrthonormalBasis& basis, const SimPath& path,
                                          const TeugelsCompensator& comp) {
  if (static_cast<int>(comp.ptilde_rate.size()) != basis.n_max())
    throw std::invalid_argument("teugels_path_increments: basis/compensator size mismatch");
  TeugelsIncrements out;
  out.n_steps = path.n_steps();
  out.n_max = basis.n_max();
  out.dh.assign(out.n_steps * out.n_max, 0.0);
  for (std::size_t k = 0; k < out.n_steps; ++k) {
    if (path.times[k + 1] <= path.t0) continue;  // frozen segment, no noise
    const double dt = path.times[k + 1] - path.times[k];
    const StepRecord& rec = path.steps[k];
    for (int i = 1; i <= out.n_max; ++i) {
      if (i - 1 >= basis.degenerate_rank()) continue;  // q_{i-1} vanishes in L^2(nu)
      double dh = basis.q_at_zero(i) * (rec.dl - comp.mean_l1 * dt) -
                  comp.ptilde_rate[i - 1] * dt;
      for (double jump : rec.jumps) dh += basis.eval_p_tilde(i, jump);
      out.dh[k * out.n_max + (i - 1)] = dh;
    }
  }
  return out;
}

}  // namespace oswitch
