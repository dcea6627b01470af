#include "oswitch/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace oswitch {

namespace {

GaussLegendre compute_gauss_legendre(int n) {
  GaussLegendre rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev starting guess, refined by Newton on P_n.
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

}  // namespace

const GaussLegendre& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::map<int, GaussLegendre> cache;
  static std::mutex mtx;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

double integrate_fixed(const std::function<double(double)>& f, double a, double b, int n) {
  const auto& rule = gauss_legendre(n);
  const double mid = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += rule.weights[i] * f(mid + hw * rule.nodes[i]);
  return acc * hw;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol, double abs_floor) {
  if (a == b) return 0.0;
  constexpr int kOrder = 16;
  constexpr int kMaxLevel = 12;
  double prev = 0.0;
  for (int level = 0; level <= kMaxLevel; ++level) {
    const int panels = 1 << level;
    const double h = (b - a) / panels;
    double acc = 0.0;
    for (int p = 0; p < panels; ++p) acc += integrate_fixed(f, a + p * h, a + (p + 1) * h, kOrder);
    if (level > 0) {
      const double diff = std::abs(acc - prev);
      if (diff <= rel_tol * std::abs(acc) + abs_floor) return acc;
    }
    prev = acc;
  }
  throw QuadratureError("quadrature did not stabilize under panel doubling");
}

void solve_tridiagonal(std::span<const double> lower, std::span<double> diag,
                       std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

MeanStdErr mean_std_error(std::span<const double> samples) {
  MeanStdErr out;
  out.n = samples.size();
  if (out.n == 0) return out;
  double acc = 0.0;
  for (double s : samples) acc += s;
  out.mean = acc / static_cast<double>(out.n);
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double s : samples) {
    const double d = s - out.mean;
    ss += d * d;
  }
  const double var = ss / static_cast<double>(out.n - 1);
  out.std_error = std::sqrt(var / static_cast<double>(out.n));
  return out;
}

std::vector<double> linspace(double a, double b, int n_points) {
  if (n_points < 2) throw std::invalid_argument("linspace: need at least two points");
  std::vector<double> xs(n_points);
  const double h = (b - a) / (n_points - 1);
  for (int i = 0; i < n_points; ++i) xs[i] = a + i * h;
  xs.back() = b;
  return xs;
}

}  // namespace oswitch
