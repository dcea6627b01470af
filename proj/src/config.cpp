#include "oswitch/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "oswitch/numerics.hpp"

namespace oswitch {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Parser {
  std::vector<std::string> errors;

  void err(int line, int col, const std::string& msg) {
    errors.push_back(std::to_string(line) + ":" + std::to_string(col) + ": " + msg);
  }

  bool parse_double(const std::string& value, double& out) {
    const char* begin = value.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end != begin && trim(std::string(end)).empty();
  }

  bool parse_int(const std::string& value, int& out) {
    double d;
    if (!parse_double(value, d) || d != std::floor(d)) return false;
    out = static_cast<int>(d);
    return true;
  }

  bool parse_u64(const std::string& value, std::uint64_t& out) {
    const char* begin = value.c_str();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(begin, &end, 10);
    if (end == begin || !trim(std::string(end)).empty()) return false;
    out = v;
    return true;
  }

  bool parse_atoms(const std::string& value, std::vector<Atom>& out, std::string& bad) {
    // (loc, mass); (loc, mass); ...
    out.clear();
    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < value.size() && (std::isspace(static_cast<unsigned char>(value[i])) ||
                                  value[i] == ';'))
        ++i;
    };
    skip_ws();
    while (i < value.size()) {
      if (value[i] != '(') {
        bad = "expected '('";
        return false;
      }
      const std::size_t close = value.find(')', i);
      if (close == std::string::npos) {
        bad = "missing ')'";
        return false;
      }
      const std::string body = value.substr(i + 1, close - i - 1);
      const std::size_t comma = body.find(',');
      if (comma == std::string::npos) {
        bad = "expected (location, mass)";
        return false;
      }
      double loc = 0.0, mass = 0.0;
      if (!parse_double(trim(body.substr(0, comma)), loc) ||
          !parse_double(trim(body.substr(comma + 1)), mass)) {
        bad = "malformed atom '" + body + "'";
        return false;
      }
      out.push_back({loc, mass});
      i = close + 1;
      skip_ws();
    }
    return true;
  }
};

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"levy",
       {"a", "varpi", "measure", "atoms", "density", "intensity", "p", "eta_pos", "eta_neg",
        "mean", "stddev", "eps", "lambda", "n_max"}},
      {"dynamics", {"b", "sigma", "sigma_bound"}},
      {"problem", {"m", "coupling", "lipschitz_y"}},  // plus f<i>, h<i>, g<ij>
      {"grid", {"T", "nt", "x_min", "x_max", "nx", "delta"}},
      {"solver",
       {"scheme", "tolerance", "proj_tol", "max_outer", "leak_tol", "switch_tol", "switch_cap"}},
      {"oracle", {"states", "x_lo", "x_hi", "nt", "leak_tol"}},
      {"mc", {"paths", "n_steps", "t0", "x0", "i0"}},
      {"seeds", {"master"}}};
  return keys;
}

std::string suggest(const std::string& section, const std::string& key) {
  const auto it = known_keys().find(section);
  if (it == known_keys().end()) return "";
  int best = 3;
  std::string pick;
  for (const auto& k : it->second) {
    const int d = edit_distance(key, k);
    if (d < best) {
      best = d;
      pick = k;
    }
  }
  return pick;
}

bool is_pattern_key(const std::string& section, const std::string& key, char& kind, int& i,
                    int& j) {
  if (section != "problem" || key.size() < 2) return false;
  kind = key[0];
  if (kind != 'f' && kind != 'h' && kind != 'g') return false;
  for (std::size_t q = 1; q < key.size(); ++q)
    if (!std::isdigit(static_cast<unsigned char>(key[q]))) return false;
  if (kind == 'g') {
    if (key.size() != 3) return false;
    i = key[1] - '0';
    j = key[2] - '0';
    return i >= 1 && j >= 1;
  }
  i = std::atoi(key.c_str() + 1);
  j = 0;
  return i >= 1;
}

}  // namespace

Config parse_config(const std::string& text) {
  Parser ps;
  Config cfg;
  std::map<int, Expr> f_exprs, h_exprs;
  std::map<std::pair<int, int>, std::pair<Expr, int>> g_exprs;  // expr + line
  bool have_b = false, have_sigma = false;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        ps.err(line_no, 1, "malformed section header '" + t + "'");
        continue;
      }
      section = trim(t.substr(1, t.size() - 2));
      if (known_keys().find(section) == known_keys().end()) {
        ps.err(line_no, 1, "unknown section '" + section + "'");
        section.clear();
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      ps.err(line_no, 1, "expected 'key = value'");
      continue;
    }
    if (section.empty()) {
      ps.err(line_no, 1, "key outside any section");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const int kcol = static_cast<int>(line.find_first_not_of(" \t")) + 1;
    const int vcol = static_cast<int>(eq) + 2;

    char kind = 0;
    int pi = 0, pj = 0;
    const bool pattern = is_pattern_key(section, key, kind, pi, pj);
    const auto& keys = known_keys().at(section);
    if (!pattern && std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string msg = "unknown key '" + section + "." + key + "'";
      const std::string s = suggest(section, key);
      if (!s.empty()) msg += "; did you mean '" + s + "'?";
      ps.err(line_no, kcol, msg);
      continue;
    }

    auto want_double = [&](double& slot) {
      if (!ps.parse_double(value, slot)) ps.err(line_no, vcol, "expected a number for " + key);
    };
    auto want_int = [&](int& slot) {
      if (!ps.parse_int(value, slot)) ps.err(line_no, vcol, "expected an integer for " + key);
    };
    auto want_expr = [&](Expr& slot) {
      try {
        slot = Expr::parse(value);
      } catch (const ExprError& e) {
        ps.err(line_no, vcol + static_cast<int>(e.pos), key + ": " + e.what());
      }
    };

    if (section == "levy") {
      if (key == "a") want_double(cfg.a);
      else if (key == "varpi") want_double(cfg.varpi);
      else if (key == "eps") want_double(cfg.eps);
      else if (key == "lambda") want_double(cfg.lambda);
      else if (key == "n_max") want_int(cfg.n_max);
      else if (key == "intensity") want_double(cfg.intensity);
      else if (key == "p") want_double(cfg.p);
      else if (key == "eta_pos") want_double(cfg.eta_pos);
      else if (key == "eta_neg") want_double(cfg.eta_neg);
      else if (key == "mean") want_double(cfg.mean);
      else if (key == "stddev") want_double(cfg.stddev);
      else if (key == "measure") {
        if (value == "none") cfg.measure_kind = MeasureKind::kNone;
        else if (value == "atoms") cfg.measure_kind = MeasureKind::kAtoms;
        else if (value == "density") cfg.measure_kind = MeasureKind::kDensity;
        else ps.err(line_no, vcol, "measure must be none, atoms or density");
      } else if (key == "density") {
        if (value == "double_exp") cfg.density_family = DensityFamily::kDoubleExp;
        else if (value == "gaussian") cfg.density_family = DensityFamily::kGaussian;
        else ps.err(line_no, vcol, "density must be double_exp or gaussian");
      } else if (key == "atoms") {
        std::string bad;
        if (!ps.parse_atoms(value, cfg.atoms, bad)) ps.err(line_no, vcol, "atoms: " + bad);
      }
    } else if (section == "dynamics") {
      if (key == "b") {
        want_expr(cfg.b_expr);
        have_b = true;
      } else if (key == "sigma") {
        want_expr(cfg.sigma_expr);
        have_sigma = true;
      } else if (key == "sigma_bound") want_double(cfg.sigma_bound);
    } else if (section == "problem") {
      if (pattern) {
        Expr e;
        try {
          e = Expr::parse(value);
        } catch (const ExprError& ee) {
          ps.err(line_no, vcol + static_cast<int>(ee.pos), key + ": " + ee.what());
          continue;
        }
        if (kind == 'f') f_exprs[pi] = e;
        else if (kind == 'h') h_exprs[pi] = e;
        else g_exprs[{pi, pj}] = {e, line_no};
      } else if (key == "m") want_int(cfg.m);
      else if (key == "coupling") {
        if (value == "none") cfg.coupling = Coupling::kNone;
        else if (value == "nondecreasing") cfg.coupling = Coupling::kNondecreasing;
        else if (value == "nonincreasing") cfg.coupling = Coupling::kNonincreasing;
        else ps.err(line_no, vcol, "coupling must be none, nondecreasing or nonincreasing");
      } else if (key == "lipschitz_y") {
        cfg.lipschitz_y.clear();
        std::istringstream vs(value);
        std::string tok;
        while (std::getline(vs, tok, ',')) {
          double c;
          if (!ps.parse_double(trim(tok), c)) {
            ps.err(line_no, vcol, "lipschitz_y: malformed number '" + trim(tok) + "'");
            break;
          }
          cfg.lipschitz_y.push_back(c);
        }
      }
    } else if (section == "grid") {
      if (key == "T") want_double(cfg.grid.t_max);
      else if (key == "nt") want_int(cfg.grid.nt);
      else if (key == "x_min") want_double(cfg.grid.x_min);
      else if (key == "x_max") want_double(cfg.grid.x_max);
      else if (key == "nx") want_int(cfg.grid.nx);
      else if (key == "delta") want_double(cfg.grid.delta);
    } else if (section == "solver") {
      if (key == "scheme") {
        if (value == "monotone" || value == "picard") cfg.scheme = value;
        else ps.err(line_no, vcol, "scheme must be monotone or picard");
      } else if (key == "tolerance") want_double(cfg.solver.outer_tol);
      else if (key == "proj_tol") want_double(cfg.solver.proj_tol);
      else if (key == "max_outer") want_int(cfg.solver.max_outer);
      else if (key == "leak_tol") want_double(cfg.solver.leak_tol);
      else if (key == "switch_tol") want_double(cfg.switch_tol);
      else if (key == "switch_cap") want_int(cfg.switch_cap);
    } else if (section == "oracle") {
      if (key == "states") want_int(cfg.oracle_states);
      else if (key == "x_lo") want_double(cfg.oracle_lo);
      else if (key == "x_hi") want_double(cfg.oracle_hi);
      else if (key == "nt") want_int(cfg.oracle_nt);
      else if (key == "leak_tol") want_double(cfg.oracle_leak_tol);
    } else if (section == "mc") {
      if (key == "paths") want_int(cfg.mc_paths);
      else if (key == "n_steps") want_int(cfg.mc_steps);
      else if (key == "t0") want_double(cfg.t0);
      else if (key == "x0") want_double(cfg.x0);
      else if (key == "i0") want_int(cfg.i0);
    } else if (section == "seeds") {
      if (key == "master") {
        if (!ps.parse_u64(value, cfg.seed)) ps.err(line_no, vcol, "expected an unsigned seed");
      }
    }
  }

  // assemble per-mode expressions
  if (cfg.m < 1) ps.err(0, 0, "problem.m must be >= 1");
  for (int i = 1; i <= cfg.m && cfg.m >= 1; ++i) {
    if (f_exprs.count(i)) cfg.drivers.push_back(f_exprs[i]);
    else ps.err(0, 0, "missing driver f" + std::to_string(i));
    if (h_exprs.count(i)) cfg.terminals.push_back(h_exprs[i]);
    else ps.err(0, 0, "missing terminal h" + std::to_string(i));
  }
  for (const auto& [idx, e] : f_exprs)
    if (idx > cfg.m) ps.err(0, 0, "driver f" + std::to_string(idx) + " exceeds m");
  for (const auto& [idx, e] : h_exprs)
    if (idx > cfg.m) ps.err(0, 0, "terminal h" + std::to_string(idx) + " exceeds m");
  for (const auto& [ij, ex] : g_exprs) {
    const auto [i, j] = ij;
    const auto& [e, gline] = ex;
    if (i > cfg.m || j > cfg.m) {
      ps.err(gline, 1, "cost g" + std::to_string(i) + std::to_string(j) + " exceeds m");
      continue;
    }
    if (i == j) {
      // only a literal zero is tolerated
      bool zero = true;
      try {
        for (double t : {0.0, 0.3, 1.0})
          for (double x : {-1.0, 0.0, 2.0})
            if (e.eval(Bindings::tx(t, x)) != 0.0) zero = false;
      } catch (...) {
        zero = false;
      }
      if (!zero) ps.err(gline, 1, "g_ii must be zero");
      continue;
    }
    cfg.costs[{i, j}] = e;
  }

  // structural checks
  if (cfg.measure_kind == MeasureKind::kAtoms && cfg.atoms.empty())
    ps.err(0, 0, "measure = atoms requires an atoms list");
  if (cfg.measure_kind == MeasureKind::kDensity && !(cfg.intensity > 0.0))
    ps.err(0, 0, "measure = density requires a positive intensity");
  if (cfg.measure_kind == MeasureKind::kAtoms) {
    for (std::size_t q = 0; q < cfg.atoms.size(); ++q) {
      if (cfg.atoms[q].location == 0.0)
        ps.err(0, 0, "atom " + std::to_string(q + 1) + " sits at the origin");
      if (!(cfg.atoms[q].mass > 0.0))
        ps.err(0, 0, "atom " + std::to_string(q + 1) + " has non-positive mass");
    }
  }
  if (!cfg.lipschitz_y.empty() && static_cast<int>(cfg.lipschitz_y.size()) != cfg.m)
    ps.err(0, 0, "lipschitz_y must list one constant per mode");
  if (cfg.grid.nt < 1 || cfg.grid.nx < 2 || !(cfg.grid.t_max > 0.0) ||
      !(cfg.grid.x_max > cfg.grid.x_min))
    ps.err(0, 0, "grid: need T > 0, nt >= 1, nx >= 2 and x_max > x_min");
  if (cfg.i0 < 1 || cfg.i0 > cfg.m) ps.err(0, 0, "mc.i0 must name a mode in 1..m");
  if (cfg.oracle_states < 1) ps.err(0, 0, "oracle.states must be >= 1");

  // variable-usage rules and 64-point finiteness probes
  auto probe = [&](const Expr& e, const std::string& name, bool allow_t, bool allow_y) {
    if (!allow_t && e.uses_t()) {
      ps.err(0, 0, name + " must not depend on t");
      return;
    }
    if (!allow_y && e.max_y_index() > 0) {
      ps.err(0, 0, name + " must not depend on y");
      return;
    }
    if (e.max_y_index() > cfg.m) {
      ps.err(0, 0, name + " references y" + std::to_string(e.max_y_index()) + " beyond m");
      return;
    }
    std::vector<double> y(cfg.m, 0.7);
    for (int a = 0; a < 8; ++a) {
      for (int b = 0; b < 8; ++b) {
        const double t = cfg.grid.t_max * a / 7.0;
        const double x = cfg.grid.x_min + (cfg.grid.x_max - cfg.grid.x_min) * b / 7.0;
        try {
          const double v = e.eval(Bindings::txy(t, x, y));
          if (!std::isfinite(v)) {
            ps.err(0, 0, name + " is not finite at (t=" + fmt_double(t) + ", x=" + fmt_double(x) +
                             ")");
            return;
          }
        } catch (const ExprError& ee) {
          ps.err(0, 0, name + " fails to evaluate at (t=" + fmt_double(t) +
                           ", x=" + fmt_double(x) + "): " + ee.what());
          return;
        }
      }
    }
  };
  if (ps.errors.empty()) {
    probe(cfg.b_expr, "dynamics.b", true, false);
    probe(cfg.sigma_expr, "dynamics.sigma", true, false);
    for (int i = 0; i < cfg.m; ++i) {
      probe(cfg.drivers[i], "f" + std::to_string(i + 1), true, true);
      probe(cfg.terminals[i], "h" + std::to_string(i + 1), false, false);
    }
    for (const auto& [ij, e] : cfg.costs)
      probe(e, "g" + std::to_string(ij.first) + std::to_string(ij.second), true, false);
  }
  (void)have_b;
  (void)have_sigma;

  if (!ps.errors.empty()) throw ConfigError(std::move(ps.errors));
  return cfg;
}

std::string render_config(const Config& cfg) {
  std::ostringstream out;
  out << "[levy]\n";
  out << "a = " << fmt_double(cfg.a) << "\n";
  out << "varpi = " << fmt_double(cfg.varpi) << "\n";
  out << "measure = "
      << (cfg.measure_kind == MeasureKind::kNone
              ? "none"
              : cfg.measure_kind == MeasureKind::kAtoms ? "atoms" : "density")
      << "\n";
  if (cfg.measure_kind == MeasureKind::kAtoms) {
    out << "atoms = ";
    for (std::size_t q = 0; q < cfg.atoms.size(); ++q) {
      if (q) out << "; ";
      out << "(" << fmt_double(cfg.atoms[q].location) << ", " << fmt_double(cfg.atoms[q].mass)
          << ")";
    }
    out << "\n";
  }
  if (cfg.measure_kind == MeasureKind::kDensity) {
    out << "density = "
        << (cfg.density_family == DensityFamily::kDoubleExp ? "double_exp" : "gaussian") << "\n";
    out << "intensity = " << fmt_double(cfg.intensity) << "\n";
    if (cfg.density_family == DensityFamily::kDoubleExp) {
      out << "p = " << fmt_double(cfg.p) << "\n";
      out << "eta_pos = " << fmt_double(cfg.eta_pos) << "\n";
      out << "eta_neg = " << fmt_double(cfg.eta_neg) << "\n";
    } else {
      out << "mean = " << fmt_double(cfg.mean) << "\n";
      out << "stddev = " << fmt_double(cfg.stddev) << "\n";
    }
  }
  out << "eps = " << fmt_double(cfg.eps) << "\n";
  out << "lambda = " << fmt_double(cfg.lambda) << "\n";
  out << "n_max = " << cfg.n_max << "\n";
  out << "\n[dynamics]\n";
  out << "b = " << cfg.b_expr.to_string() << "\n";
  out << "sigma = " << cfg.sigma_expr.to_string() << "\n";
  out << "sigma_bound = " << fmt_double(cfg.sigma_bound) << "\n";
  out << "\n[problem]\n";
  out << "m = " << cfg.m << "\n";
  for (int i = 0; i < cfg.m; ++i)
    out << "f" << (i + 1) << " = " << cfg.drivers[i].to_string() << "\n";
  for (int i = 0; i < cfg.m; ++i)
    out << "h" << (i + 1) << " = " << cfg.terminals[i].to_string() << "\n";
  for (const auto& [ij, e] : cfg.costs)
    out << "g" << ij.first << ij.second << " = " << e.to_string() << "\n";
  out << "coupling = "
      << (cfg.coupling == Coupling::kNone
              ? "none"
              : cfg.coupling == Coupling::kNondecreasing ? "nondecreasing" : "nonincreasing")
      << "\n";
  if (!cfg.lipschitz_y.empty()) {
    out << "lipschitz_y = ";
    for (std::size_t i = 0; i < cfg.lipschitz_y.size(); ++i) {
      if (i) out << ", ";
      out << fmt_double(cfg.lipschitz_y[i]);
    }
    out << "\n";
  }
  out << "\n[grid]\n";
  out << "T = " << fmt_double(cfg.grid.t_max) << "\n";
  out << "nt = " << cfg.grid.nt << "\n";
  out << "x_min = " << fmt_double(cfg.grid.x_min) << "\n";
  out << "x_max = " << fmt_double(cfg.grid.x_max) << "\n";
  out << "nx = " << cfg.grid.nx << "\n";
  if (cfg.grid.delta > 0.0) out << "delta = " << fmt_double(cfg.grid.delta) << "\n";
  out << "\n[solver]\n";
  out << "scheme = " << cfg.scheme << "\n";
  out << "tolerance = " << fmt_double(cfg.solver.outer_tol) << "\n";
  out << "proj_tol = " << fmt_double(cfg.solver.proj_tol) << "\n";
  out << "max_outer = " << cfg.solver.max_outer << "\n";
  out << "leak_tol = " << fmt_double(cfg.solver.leak_tol) << "\n";
  if (cfg.switch_tol > 0.0) out << "switch_tol = " << fmt_double(cfg.switch_tol) << "\n";
  if (cfg.switch_cap > 0) out << "switch_cap = " << cfg.switch_cap << "\n";
  out << "\n[oracle]\n";
  out << "states = " << cfg.oracle_states << "\n";
  if (cfg.oracle_lo != 0.0 || cfg.oracle_hi != 0.0) {
    out << "x_lo = " << fmt_double(cfg.oracle_lo) << "\n";
    out << "x_hi = " << fmt_double(cfg.oracle_hi) << "\n";
  }
  if (cfg.oracle_nt > 0) out << "nt = " << cfg.oracle_nt << "\n";
  out << "leak_tol = " << fmt_double(cfg.oracle_leak_tol) << "\n";
  out << "\n[mc]\n";
  out << "paths = " << cfg.mc_paths << "\n";
  out << "n_steps = " << cfg.mc_steps << "\n";
  out << "t0 = " << fmt_double(cfg.t0) << "\n";
  out << "x0 = " << fmt_double(cfg.x0) << "\n";
  out << "i0 = " << cfg.i0 << "\n";
  out << "\n[seeds]\n";
  out << "master = " << cfg.seed << "\n";
  return out.str();
}

LevyTriplet Config::triplet() const {
  LevyTriplet tr;
  tr.drift = a;
  tr.varpi = varpi;
  switch (measure_kind) {
    case MeasureKind::kNone: tr.measure = JumpMeasure::none(); break;
    case MeasureKind::kAtoms: tr.measure = JumpMeasure::from_atoms(atoms); break;
    case MeasureKind::kDensity:
      tr.measure = density_family == DensityFamily::kDoubleExp
                       ? JumpMeasure::double_exp(intensity, p, eta_pos, eta_neg)
                       : JumpMeasure::gaussian(intensity, mean, stddev);
      break;
  }
  return tr;
}

Dynamics Config::dynamics() const {
  Dynamics dyn;
  dyn.b = [e = b_expr](double t, double x) { return e.eval(Bindings::tx(t, x)); };
  dyn.sigma = [e = sigma_expr](double t, double x) { return e.eval(Bindings::tx(t, x)); };
  dyn.sigma_bound = sigma_bound;
  return dyn;
}

SwitchingSpec Config::switching() const {
  SwitchingSpec spec;
  spec.m = m;
  spec.coupling = coupling;
  spec.lipschitz_y = lipschitz_y;
  for (int i = 0; i < m; ++i) {
    spec.drivers.push_back([e = drivers[i]](double t, double x, std::span<const double> y) {
      return e.eval(Bindings::txy(t, x, y));
    });
    spec.terminals.push_back([e = terminals[i]](double x) {
      Bindings b;
      b.x = x;
      b.has_x = true;
      return e.eval(b);
    });
    if (drivers[i].max_y_index() > 0) spec.drivers_coupled = true;
  }
  spec.costs.assign(m, std::vector<CostFn>(m));
  for (const auto& [ij, e] : costs) {
    spec.costs[ij.first - 1][ij.second - 1] = [ex = e](double t, double x) {
      return ex.eval(Bindings::tx(t, x));
    };
  }
  return spec;
}

std::vector<double> Config::oracle_state_grid() const {
  double lo = oracle_lo, hi = oracle_hi;
  if (lo == 0.0 && hi == 0.0) {
    const double span = grid.x_max - grid.x_min;
    lo = grid.x_min + 0.25 * span;
    hi = grid.x_max - 0.25 * span;
  }
  if (oracle_states == 1) return {0.5 * (lo + hi)};
  return linspace(lo, hi, oracle_states);
}

std::vector<double> Config::oracle_time_grid() const {
  const int steps = oracle_nt > 0 ? oracle_nt : grid.nt;
  return linspace(0.0, grid.t_max, steps + 1);
}

}  // namespace oswitch
