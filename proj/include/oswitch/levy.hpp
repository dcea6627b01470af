#pragma once

#include <complex>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oswitch/report.hpp"

namespace oswitch {

struct Atom {
  double location = 0.0;  // must be nonzero
  double mass = 0.0;      // must be positive
};

enum class MeasureKind { kNone, kAtoms, kDensity };

/// Parametric finite-activity jump densities. Both families have exponential
/// (or lighter) tails, so every power moment and the exponential moment test
/// are finite.
enum class DensityFamily { kDoubleExp, kGaussian };

struct DensitySpec {
  DensityFamily family = DensityFamily::kDoubleExp;
  double intensity = 0.0;  // total mass of the measure
  // double_exp: p * eta_pos * exp(-eta_pos x) on x>0, (1-p) * eta_neg * exp(eta_neg x) on x<0
  double p = 0.5;
  double eta_pos = 1.0;
  double eta_neg = 1.0;
  // gaussian: normal(mean, stddev) jump sizes
  double mean = 0.0;
  double stddev = 1.0;
  // quadrature descriptor
  double x_max = 0.0;  // 0 = derive from the tail decay
  int base_nodes = 16;
};

/// A finite-activity jump measure: empty, a finite list of atoms, or a named
/// density family. Atoms at zero and non-positive masses are rejected on
/// construction ("offending field named").
class JumpMeasure {
 public:
  static JumpMeasure none();
  static JumpMeasure from_atoms(std::vector<Atom> atoms);
  static JumpMeasure double_exp(double intensity, double p, double eta_pos, double eta_neg);
  static JumpMeasure gaussian(double intensity, double mean, double stddev);

  MeasureKind kind() const { return kind_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const DensitySpec& density() const { return density_; }

  /// Density value at x (kDensity only).
  double density_at(double x) const;
  /// Truncation bound actually used for quadrature.
  double truncation() const;

  double total_mass() const;

  /// ∫ x^i Π(dx); with large_only the integrand is restricted to |x| >= 1.
  double moment(int i, bool large_only = false) const;
  /// ∫_{0<|x|<1} x Π(dx), the small-jump compensator rate.
  double small_first_moment() const;
  /// ∫_{|x|>=eps} e^{lambda |x|} Π(dx).
  double exp_moment(double eps, double lambda) const;
  /// ∫ (1 ∧ x²) Π(dx).
  double one_wedge_square() const;
  /// ∫_{|y| <= delta} y² Π(dy).
  double truncated_square(double delta) const;
  /// Π({|y| > delta}).
  double tail_mass(double delta) const;

  /// Draws one jump size from Π / total_mass (requires total_mass > 0).
  double sample_jump(std::mt19937_64& rng) const;

  bool is_zero() const { return total_mass() == 0.0; }

 private:
  JumpMeasure() = default;
  double density_integral(const std::function<double(double)>& f, double lo, double hi) const;

  MeasureKind kind_ = MeasureKind::kNone;
  std::vector<Atom> atoms_;
  DensitySpec density_;
};

/// The driving-noise specification (drift, Gaussian coefficient, jump measure).
struct LevyTriplet {
  double drift = 0.0;   // a
  double varpi = 0.0;   // Gaussian coefficient, >= 0
  JumpMeasure measure = JumpMeasure::none();
};

ValidationReport validate_measure(const JumpMeasure& measure, double eps, double lam);

double pi_moment(const JumpMeasure& measure, int i, bool large_only = false);

/// a + ∫_{|x|>=1} x Π(dx), the mean of the time-one marginal.
double mean_l1(const LevyTriplet& triplet);

/// Characteristic exponent: Psi(theta) = i a theta - varpi² theta²/2
/// + ∫ (e^{i theta x} - 1 - i theta x 1_{|x|<1}) Π(dx).
std::complex<double> char_exponent(const LevyTriplet& triplet, double theta);

struct Increment {
  double value = 0.0;          // total increment over the step
  double gauss = 0.0;          // varpi sqrt(dt) Z part
  double drift = 0.0;          // (a - small-jump compensator) dt part
  std::vector<double> jumps;   // individual jump sizes, in arrival order
};

/// Samples one increment over dt: compensated drift + Gaussian part + compound
/// Poisson jumps. Deterministic given the rng state. Throws on non-positive dt.
Increment sample_increment(const LevyTriplet& triplet, double dt, std::mt19937_64& rng);

}  // namespace oswitch
