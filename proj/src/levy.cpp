#include "oswitch/levy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "oswitch/numerics.hpp"

namespace oswitch {

namespace {
constexpr double kOverflowGuard = 1e100;

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
}  // namespace

JumpMeasure JumpMeasure::none() { return JumpMeasure(); }

JumpMeasure JumpMeasure::from_atoms(std::vector<Atom> atoms) {
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (atoms[i].location == 0.0)
      throw std::invalid_argument("jump measure atom " + std::to_string(i + 1) +
                                  ": location must be nonzero");
    if (!(atoms[i].mass > 0.0))
      throw std::invalid_argument("jump measure atom " + std::to_string(i + 1) +
                                  ": mass must be positive");
  }
  JumpMeasure m;
  m.kind_ = atoms.empty() ? MeasureKind::kNone : MeasureKind::kAtoms;
  m.atoms_ = std::move(atoms);
  return m;
}

JumpMeasure JumpMeasure::double_exp(double intensity, double p, double eta_pos, double eta_neg) {
  if (intensity < 0.0) throw std::invalid_argument("double_exp: intensity must be >= 0");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("double_exp: p must lie in [0, 1]");
  if (!(eta_pos > 0.0) || !(eta_neg > 0.0))
    throw std::invalid_argument("double_exp: decay rates must be positive");
  if (intensity == 0.0) return none();
  JumpMeasure m;
  m.kind_ = MeasureKind::kDensity;
  m.density_.family = DensityFamily::kDoubleExp;
  m.density_.intensity = intensity;
  m.density_.p = p;
  m.density_.eta_pos = eta_pos;
  m.density_.eta_neg = eta_neg;
  return m;
}

JumpMeasure JumpMeasure::gaussian(double intensity, double mean, double stddev) {
  if (intensity < 0.0) throw std::invalid_argument("gaussian: intensity must be >= 0");
  if (!(stddev > 0.0)) throw std::invalid_argument("gaussian: stddev must be positive");
  if (intensity == 0.0) return none();
  JumpMeasure m;
  m.kind_ = MeasureKind::kDensity;
  m.density_.family = DensityFamily::kGaussian;
  m.density_.intensity = intensity;
  m.density_.mean = mean;
  m.density_.stddev = stddev;
  return m;
}

double JumpMeasure::density_at(double x) const {
  if (kind_ != MeasureKind::kDensity || x == 0.0) return 0.0;
  const DensitySpec& d = density_;
  if (d.family == DensityFamily::kDoubleExp) {
    if (x > 0.0) return d.intensity * d.p * d.eta_pos * std::exp(-d.eta_pos * x);
    return d.intensity * (1.0 - d.p) * d.eta_neg * std::exp(d.eta_neg * x);
  }
  return d.intensity * normal_pdf((x - d.mean) / d.stddev) / d.stddev;
}

double JumpMeasure::truncation() const {
  if (kind_ != MeasureKind::kDensity) return 0.0;
  if (density_.x_max > 0.0) return density_.x_max;
  if (density_.family == DensityFamily::kDoubleExp)
    return std::max(1.0, 50.0 / std::min(density_.eta_pos, density_.eta_neg));
  return std::abs(density_.mean) + 10.0 * density_.stddev;
}

double JumpMeasure::density_integral(const std::function<double(double)>& f, double lo,
                                     double hi) const {
  const double cut = truncation();
  lo = std::max(lo, -cut);
  hi = std::min(hi, cut);
  if (lo >= hi) return 0.0;
  auto g = [&](double x) { return f(x) * density_at(x); };
  // Split at 0: the double-exponential density has a kink there.
  double acc = 0.0;
  if (lo < 0.0) acc += integrate_adaptive(g, lo, std::min(hi, 0.0));
  if (hi > 0.0) acc += integrate_adaptive(g, std::max(lo, 0.0), hi);
  return acc;
}

double JumpMeasure::total_mass() const {
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_) acc += a.mass;
      return acc;
    }
    case MeasureKind::kDensity: return density_.intensity;
  }
  return 0.0;
}

double JumpMeasure::moment(int i, bool large_only) const {
  if (i < 1) throw std::invalid_argument("pi_moment: order must be >= 1");
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_) {
        if (large_only && std::abs(a.location) < 1.0) continue;
        acc += a.mass * std::pow(a.location, i);
      }
      return acc;
    }
    case MeasureKind::kDensity: {
      auto f = [i](double x) { return std::pow(x, i); };
      if (!large_only) return density_integral(f, -truncation(), truncation());
      return density_integral(f, -truncation(), -1.0) + density_integral(f, 1.0, truncation());
    }
  }
  return 0.0;
}

double JumpMeasure::small_first_moment() const {
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_)
        if (std::abs(a.location) < 1.0) acc += a.mass * a.location;
      return acc;
    }
    case MeasureKind::kDensity:
      return density_integral([](double x) { return x; }, -1.0, 1.0);
  }
  return 0.0;
}

double JumpMeasure::exp_moment(double eps, double lambda) const {
  if (!(eps > 0.0) || !(lambda > 0.0))
    throw std::invalid_argument("exp_moment: eps and lambda must be positive");
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_)
        if (std::abs(a.location) >= eps) acc += a.mass * std::exp(lambda * std::abs(a.location));
      return acc;
    }
    case MeasureKind::kDensity: {
      auto f = [lambda](double x) { return std::exp(lambda * std::abs(x)); };
      return density_integral(f, -truncation(), -eps) + density_integral(f, eps, truncation());
    }
  }
  return 0.0;
}

double JumpMeasure::one_wedge_square() const {
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_) acc += a.mass * std::min(1.0, a.location * a.location);
      return acc;
    }
    case MeasureKind::kDensity:
      return density_integral([](double x) { return std::min(1.0, x * x); }, -truncation(),
                              truncation());
  }
  return 0.0;
}

double JumpMeasure::truncated_square(double delta) const {
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_)
        if (std::abs(a.location) <= delta) acc += a.mass * a.location * a.location;
      return acc;
    }
    case MeasureKind::kDensity:
      return density_integral([](double x) { return x * x; }, -delta, delta);
  }
  return 0.0;
}

double JumpMeasure::tail_mass(double delta) const {
  switch (kind_) {
    case MeasureKind::kNone: return 0.0;
    case MeasureKind::kAtoms: {
      double acc = 0.0;
      for (const Atom& a : atoms_)
        if (std::abs(a.location) > delta) acc += a.mass;
      return acc;
    }
    case MeasureKind::kDensity:
      return density_integral([](double) { return 1.0; }, -truncation(), -delta) +
             density_integral([](double) { return 1.0; }, delta, truncation());
  }
  return 0.0;
}

double JumpMeasure::sample_jump(std::mt19937_64& rng) const {
  const double mass = total_mass();
  if (mass <= 0.0) throw std::logic_error("sample_jump on a zero measure");
  if (kind_ == MeasureKind::kAtoms) {
    std::uniform_real_distribution<double> unif(0.0, mass);
    double u = unif(rng);
    for (const Atom& a : atoms_) {
      if (u < a.mass) return a.location;
      u -= a.mass;
    }
    return atoms_.back().location;
  }
  const DensitySpec& d = density_;
  if (d.family == DensityFamily::kDoubleExp) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> pos(d.eta_pos);
    std::exponential_distribution<double> neg(d.eta_neg);
    if (unif(rng) < d.p) return pos(rng);
    return -neg(rng);
  }
  std::normal_distribution<double> normal(d.mean, d.stddev);
  return normal(rng);
}

ValidationReport validate_measure(const JumpMeasure& measure, double eps, double lam) {
  ValidationReport report;
  if (!(eps > 0.0)) report.fail("eps must be positive");
  if (!(lam > 0.0)) report.fail("lambda must be positive");
  if (!report.ok) return report;
  try {
    const double ows = measure.one_wedge_square();
    report.metrics["one_wedge_square"] = ows;
    if (!std::isfinite(ows) || ows >= kOverflowGuard)
      report.fail("integral of (1 ^ x^2) exceeds the overflow guard");
  } catch (const QuadratureError& e) {
    report.fail(std::string("(1 ^ x^2) integral: ") + e.what());
  }
  try {
    const double em = measure.exp_moment(eps, lam);
    report.metrics["exp_moment"] = em;
    if (!std::isfinite(em) || em >= kOverflowGuard)
      report.fail("exponential moment outside (-eps, eps) exceeds the overflow guard");
  } catch (const QuadratureError& e) {
    report.fail(std::string("exponential moment: ") + e.what());
  }
  report.metrics["total_mass"] = measure.total_mass();
  return report;
}

double pi_moment(const JumpMeasure& measure, int i, bool large_only) {
  return measure.moment(i, large_only);
}

double mean_l1(const LevyTriplet& triplet) {
  return triplet.drift + triplet.measure.moment(1, /*large_only=*/true);
}

std::complex<double> char_exponent(const LevyTriplet& triplet, double theta) {
  const std::complex<double> i_unit(0.0, 1.0);
  std::complex<double> psi = i_unit * triplet.drift * theta -
                             0.5 * triplet.varpi * triplet.varpi * theta * theta;
  const JumpMeasure& m = triplet.measure;
  switch (m.kind()) {
    case MeasureKind::kNone: break;
    case MeasureKind::kAtoms: {
      for (const Atom& a : m.atoms()) {
        std::complex<double> term = std::exp(i_unit * theta * a.location) - 1.0;
        if (std::abs(a.location) < 1.0) term -= i_unit * theta * a.location;
        psi += a.mass * term;
      }
      break;
    }
    case MeasureKind::kDensity: {
      const double cut = m.truncation();
      auto re_part = [&](double x) { return (std::cos(theta * x) - 1.0) * m.density_at(x); };
      auto im_small = [&](double x) {
        return (std::sin(theta * x) - theta * x) * m.density_at(x);
      };
      auto im_large = [&](double x) { return std::sin(theta * x) * m.density_at(x); };
      double re = 0.0, im = 0.0;
      const double lo1 = std::max(-cut, -1.0), hi1 = std::min(cut, 1.0);
      re += integrate_adaptive(re_part, -cut, 0.0) + integrate_adaptive(re_part, 0.0, cut);
      im += integrate_adaptive(im_small, lo1, 0.0) + integrate_adaptive(im_small, 0.0, hi1);
      if (cut > 1.0) {
        im += integrate_adaptive(im_large, -cut, -1.0) + integrate_adaptive(im_large, 1.0, cut);
      }
      psi += std::complex<double>(re, im);
      break;
    }
  }
  return psi;
}

Increment sample_increment(const LevyTriplet& triplet, double dt, std::mt19937_64& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_increment: dt must be positive");
  Increment inc;
  inc.drift = (triplet.drift - triplet.measure.small_first_moment()) * dt;
  if (triplet.varpi > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    inc.gauss = triplet.varpi * std::sqrt(dt) * normal(rng);
  }
  const double mass = triplet.measure.total_mass();
  if (mass > 0.0) {
    std::poisson_distribution<int> pois(mass * dt);
    const int n_jumps = pois(rng);
    inc.jumps.reserve(n_jumps);
    for (int k = 0; k < n_jumps; ++k) inc.jumps.push_back(triplet.measure.sample_jump(rng));
  }
  inc.value = inc.drift + inc.gauss;
  for (double j : inc.jumps) inc.value += j;
  return inc;
}

}  // namespace oswitch
