#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace oswitch {

/// Uniform space-time grid on [0, T] x [x_min, x_max] with the jump-split
/// radius delta used by the nonlocal operator.
struct Grid {
  double t_max = 1.0;
  int nt = 100;
  double x_min = -1.0;
  double x_max = 1.0;
  int nx = 100;
  double delta = 0.0;  // 0 = derive from the grid and sigma scale

  double dt() const { return t_max / nt; }
  double dx() const { return (x_max - x_min) / nx; }
  double t_node(int k) const { return k == nt ? t_max : k * dt(); }
  double x_node(int n) const { return n == nx ? x_max : x_min + n * dx(); }
  int n_time_nodes() const { return nt + 1; }
  int n_space_nodes() const { return nx + 1; }

  void check() const {
    if (!(t_max > 0.0)) throw std::invalid_argument("grid: T must be positive");
    if (nt < 1 || nx < 2) throw std::invalid_argument("grid: nt >= 1 and nx >= 2 required");
    if (!(x_max > x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
  }
};

struct SolveDiagnostics {
  std::vector<double> outer_diffs;          // sup-norm change per outer sweep
  std::vector<double> contraction_factors;  // ratio of successive outer diffs
  double min_iterate_increment = 0.0;       // monotone scheme ordering check
  double upper_envelope_slack = 0.0;        // max (u - upper envelope), monotone scheme
  double obstacle_active_fraction = 0.0;
  double leak_mass = 0.0;                   // clamped nonlocal mass at probes
  int outer_iterations = 0;
  bool transformed = false;                 // nonincreasing-coupling transform used
  double transform_lambda = 0.0;
};

/// The m discrete value surfaces on a grid, stored mode-major.
class ValueFields {
 public:
  ValueFields() = default;
  ValueFields(const Grid& grid, int m)
      : grid_(grid), m_(m),
        u_(static_cast<std::size_t>(m) * grid.n_time_nodes() * grid.n_space_nodes(), 0.0) {
    grid.check();
    if (m < 1) throw std::invalid_argument("ValueFields: m must be >= 1");
  }

  const Grid& grid() const { return grid_; }
  int modes() const { return m_; }

  double& at(int mode, int k, int n) { return u_[index(mode, k, n)]; }
  double at(int mode, int k, int n) const { return u_[index(mode, k, n)]; }

  /// Clamped bilinear interpolation in (t, x); mode is 1-based.
  double value(int mode, double t, double x) const {
    const double dt = grid_.dt(), dx = grid_.dx();
    double ft = (t - 0.0) / dt;
    double fx = (x - grid_.x_min) / dx;
    if (ft < 0.0) ft = 0.0;
    if (ft > grid_.nt) ft = grid_.nt;
    if (fx < 0.0) fx = 0.0;
    if (fx > grid_.nx) fx = grid_.nx;
    const int k0 = std::min(static_cast<int>(ft), grid_.nt - 1);
    const int n0 = std::min(static_cast<int>(fx), grid_.nx - 1);
    const double wt = ft - k0, wx = fx - n0;
    return (1.0 - wt) * ((1.0 - wx) * at(mode, k0, n0) + wx * at(mode, k0, n0 + 1)) +
           wt * ((1.0 - wx) * at(mode, k0 + 1, n0) + wx * at(mode, k0 + 1, n0 + 1));
  }

  const std::vector<double>& data() const { return u_; }
  std::vector<double>& data() { return u_; }

  SolveDiagnostics diagnostics;

 private:
  std::size_t index(int mode, int k, int n) const {
    return (static_cast<std::size_t>(mode - 1) * grid_.n_time_nodes() + k) *
               grid_.n_space_nodes() +
           n;
  }

  Grid grid_;
  int m_ = 0;
  std::vector<double> u_;
};

}  // namespace oswitch
