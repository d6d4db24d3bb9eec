#include "isp/activation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace isp {

namespace {

constexpr double kFloorClosed = 1e-300;
constexpr double kFloorQuad = 1e-14;
constexpr double kZMax = 10.0;  // Simpson range in standard deviations

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

double base_eval(const ActivationSpec& s, double y) {
  switch (s.kind) {
    case Kind::halfspace:
      return y >= s.p1 ? 1.0 : 0.0;
    case Kind::band:
      return (y >= s.p1 && y <= s.p2) ? 1.0 : 0.0;
    case Kind::gauss_bump: {
      const double d = (y - s.p1) / s.p2;
      return std::exp(-0.5 * d * d);
    }
    case Kind::clipped_exp:
      return y >= 0.0 ? 1.0 : std::exp(s.p1 * y);
    case Kind::tabulated: {
      const auto& xs = s.xs;
      if (y <= xs.front() || y >= xs.back()) {
        if (y < xs.front() || y > xs.back())
          warn_once("tabulated grid does not cover x; clamped to the nearest end (" + s.describe() + ")");
        return y <= xs.front() ? s.us.front() : s.us.back();
      }
      const auto it = std::upper_bound(xs.begin(), xs.end(), y);
      const std::size_t j = static_cast<std::size_t>(it - xs.begin());
      const double t = (y - xs[j - 1]) / (xs[j] - xs[j - 1]);
      return (1.0 - t) * s.us[j - 1] + t * s.us[j];
    }
  }
  return 0.0;
}

// Points where the unsmoothed U is not smooth.
std::vector<double> kinks(const ActivationSpec& s) {
  switch (s.kind) {
    case Kind::halfspace:
      return {s.p1};
    case Kind::band:
      return {s.p1, s.p2};
    case Kind::clipped_exp:
      return {0.0};
    case Kind::tabulated:
      return s.xs;
    case Kind::gauss_bump:
      return {};
  }
  return {};
}

// Simpson breakpoints in xi for y = x + c xi.
std::vector<double> xi_breaks(const ActivationSpec& s, double x, double c, bool with_kinks) {
  std::vector<double> b{-kZMax, kZMax};
  if (with_kinks)
    for (double k : kinks(s)) {
      const double z = (k - x) / c;
      if (z > -kZMax && z < kZMax) b.push_back(z);
    }
  return b;
}

// E xi^k U0(x + s xi) for the unsmoothed U0.
void base_raw(const ActivationSpec& sp, double x, double s, int pmax, double* out) {
  switch (sp.kind) {
    case Kind::halfspace:
      interval_moments((sp.p1 - x) / s, INFINITY, pmax, out);
      return;
    case Kind::band:
      interval_moments((sp.p1 - x) / s, (sp.p2 - x) / s, pmax, out);
      return;
    case Kind::gauss_bump: {
      // Gaussian times Gaussian: the tilted xi is normal with mean mu and variance v.
      const double s2 = sp.p2 * sp.p2, d = s2 + s * s, dx = x - sp.p1;
      const double mu = -s * dx / d, v = s2 / d;
      out[0] = std::sqrt(s2 / d) * std::exp(-0.5 * dx * dx / d);
      double e0 = 1.0, e1 = mu;
      if (pmax >= 1) out[1] = out[0] * mu;
      for (int k = 2; k <= pmax; ++k) {
        const double e2 = mu * e1 + (k - 1) * v * e0;
        out[k] = out[0] * e2;
        e0 = e1;
        e1 = e2;
      }
      return;
    }
    case Kind::clipped_exp: {
      // Flat part above -x/s; below it e^{lambda(x + s xi)} phi(xi) is a shifted normal density.
      const double lam = sp.p1, b = -x / s, sh = lam * s;
      double up[16], lo[16];
      interval_moments(b, INFINITY, pmax, up);
      interval_moments(-INFINITY, b - sh, pmax, lo);
      const double pre = std::exp(lam * x + 0.5 * sh * sh);
      for (int k = 0; k <= pmax; ++k) {
        double v = 0.0, shp = 1.0;
        for (int j = 0; j <= k; ++j, shp *= sh) v += binom(k, j) * shp * lo[k - j];
        out[k] = up[k] + pre * v;
      }
      return;
    }
    case Kind::tabulated: {
      auto f = [&](double z, double* o) {
        double v = norm_pdf(z) * base_eval(sp, x + s * z);
        for (int k = 0; k <= pmax; ++k) {
          o[k] = v;
          v *= z;
        }
      };
      adaptive_simpson(f, pmax + 1, xi_breaks(sp, x, s, true), 1e-11, out);
      return;
    }
  }
}

}  // namespace

std::string ActivationSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::halfspace:
      os << "halfspace(kappa=" << p1 << ")";
      break;
    case Kind::band:
      os << "band(" << p1 << "," << p2 << ")";
      break;
    case Kind::gauss_bump:
      os << "gauss_bump(m=" << p1 << ",sigma=" << p2 << ")";
      break;
    case Kind::clipped_exp:
      os << "clipped_exp(lambda=" << p1 << ")";
      break;
    case Kind::tabulated:
      os << "tabulated(" << xs.size() << " points on [" << xs.front() << "," << xs.back() << "])";
      break;
  }
  if (eta > 0) os << "*eta=" << eta;
  return os.str();
}

ActivationSpec halfspace(double kappa) {
  ActivationSpec s;
  s.kind = Kind::halfspace;
  s.p1 = kappa;
  s.delta_prime = 0.5;
  s.e_max = std::abs(kappa) + 1.0;
  s.closed_form = true;
  return s;
}

ActivationSpec band(double lo, double hi) {
  if (!(lo < hi)) throw UsageError("band needs lo < hi");
  ActivationSpec s;
  s.kind = Kind::band;
  s.p1 = lo;
  s.p2 = hi;
  s.delta_prime = 0.5;
  s.e_max = std::max(std::abs(lo), std::abs(hi));
  s.closed_form = true;
  return s;
}

ActivationSpec gauss_bump(double mean, double sigma) {
  if (!(sigma > 0)) throw UsageError("gauss_bump needs sigma > 0");
  ActivationSpec s;
  s.kind = Kind::gauss_bump;
  s.p1 = mean;
  s.p2 = sigma;
  s.delta_prime = 0.5;  // U >= e^{-1/2} on [m - sigma, m + sigma]
  s.e_max = std::abs(mean) + sigma;
  return s;
}

ActivationSpec clipped_exp(double lambda) {
  if (!(lambda > 0)) throw UsageError("clipped_exp needs lambda > 0");
  ActivationSpec s;
  s.kind = Kind::clipped_exp;
  s.p1 = lambda;
  s.delta_prime = 0.3;  // U >= e^{-1} on [-1/lambda, 1]
  s.e_max = std::max(1.0, 1.0 / lambda);
  return s;
}

ActivationSpec tabulated(std::vector<double> xs, std::vector<double> us) {
  if (xs.size() < 2 || xs.size() != us.size()) throw UsageError("tabulated activation needs >= 2 (x,value) rows");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0 && !(xs[i] > xs[i - 1])) throw UsageError("tabulated x values must be strictly increasing");
    if (!(us[i] >= 0.0 && us[i] <= 1.0)) throw UsageError("tabulated values must lie in [0,1]");
  }
  ActivationSpec s;
  s.kind = Kind::tabulated;
  s.xs = std::move(xs);
  s.us = std::move(us);
  const double top = *std::max_element(s.us.begin(), s.us.end());
  if (!(top > 0)) throw UsageError("tabulated activation vanishes identically");
  s.delta_prime = 0.5 * top;
  s.e_max = std::max(std::abs(s.xs.front()), std::abs(s.xs.back()));
  s.closed_form = false;
  return s;
}

ActivationSpec constant_one() { return tabulated({-1e6, 1e6}, {1.0, 1.0}); }

ActivationSpec load_tabulated(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open tabulated activation file: " + path);
  std::vector<double> xs, us;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double x, u;
    if (!(ls >> x)) continue;
    if (!(ls >> u)) throw UsageError("malformed line in " + path + ": " + line);
    xs.push_back(x);
    us.push_back(u);
  }
  return tabulated(std::move(xs), std::move(us));
}

ActivationSpec smooth(ActivationSpec spec, double eta) {
  if (eta < 0) throw UsageError("smoothing width must be non-negative");
  spec.eta = eta;
  return spec;
}

ActivationSpec parse_activation(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  std::vector<double> v;
  if (kind != "tabulated") {
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        v.push_back(std::stod(tok));
      } catch (...) {
        throw UsageError("bad activation parameter '" + tok + "' in " + text);
      }
    }
  }
  auto need = [&](std::size_t n) {
    if (v.size() != n) throw UsageError("activation " + kind + " expects " + std::to_string(n) + " parameter(s)");
  };
  if (kind == "halfspace") {
    if (v.empty()) v.push_back(0.0);
    need(1);
    return halfspace(v[0]);
  }
  if (kind == "band") {
    need(2);
    return band(v[0], v[1]);
  }
  if (kind == "gauss_bump") {
    need(2);
    return gauss_bump(v[0], v[1]);
  }
  if (kind == "clipped_exp") {
    need(1);
    return clipped_exp(v[0]);
  }
  if (kind == "tabulated") return load_tabulated(rest);
  if (kind == "one") return constant_one();
  throw UsageError("unknown activation kind: " + kind);
}

void validate(const ActivationSpec& spec) {
  if (!(spec.delta_prime > 0)) throw UsageError("delta_prime must be positive");
  // E(U) for the built-in kinds, used for the lower-bound check.
  double lo = 0, hi = 0;
  switch (spec.kind) {
    case Kind::halfspace: lo = spec.p1; hi = spec.p1 + 1.0; break;
    case Kind::band: lo = spec.p1; hi = spec.p2; break;
    case Kind::gauss_bump: lo = spec.p1 - spec.p2; hi = spec.p1 + spec.p2; break;
    case Kind::clipped_exp: lo = -1.0 / spec.p1; hi = 1.0; break;
    case Kind::tabulated: {
      // Neighbouring grid points above delta_prime around the maximum.
      const auto it = std::max_element(spec.us.begin(), spec.us.end());
      std::size_t j0 = static_cast<std::size_t>(it - spec.us.begin()), j1 = j0;
      while (j0 > 0 && spec.us[j0 - 1] > spec.delta_prime) --j0;
      while (j1 + 1 < spec.xs.size() && spec.us[j1 + 1] > spec.delta_prime) ++j1;
      lo = spec.xs[j0];
      hi = spec.xs[j1];
      break;
    }
  }
  const ActivationSpec raw = smooth(spec, 0.0);
  double y0 = -3 * spec.e_max - 3, y1 = 3 * spec.e_max + 3;
  if (spec.kind == Kind::tabulated) {
    y0 = spec.xs.front();
    y1 = spec.xs.back();
  }
  for (int i = 0; i <= 400; ++i) {
    const double y = y0 + i * (y1 - y0) / 400.0;
    const double u = base_eval(raw, y);
    if (!(u >= 0.0 && u <= 1.0)) throw UsageError("activation value outside [0,1] at " + fmt17(y));
    if (y > lo && y < hi && !(u > spec.delta_prime))
      throw UsageError("activation not above delta_prime on E(U) at " + fmt17(y));
  }
}

double mass_floor(const ActivationSpec& spec) { return spec.closed_form ? kFloorClosed : kFloorQuad; }

void raw_moments(const ActivationSpec& spec, double x, double c, int pmax, double* out) {
  if (!(c > 0)) throw UsageError("tilted moments need c > 0");
  if (pmax > 12) throw UsageError("moment order too large");
  if (spec.eta <= 0.0) {
    base_raw(spec, x, c, pmax, out);
    return;
  }
  // xi = (c/s) zeta + (eta/s) zeta', with x + c xi + eta xi' = x + s zeta.
  const double s = std::sqrt(c * c + spec.eta * spec.eta);
  double r[16];
  base_raw(spec, x, s, pmax, r);
  const double a = c / s, b = spec.eta / s;
  for (int p = 0; p <= pmax; ++p) {
    double v = 0.0;
    for (int k = 0; k <= p; ++k) {
      const int j = p - k;
      if (j % 2) continue;
      v += binom(p, k) * std::pow(a, k) * std::pow(b, j) * r[k] * gaussian_moment(j);
    }
    out[p] = v;
  }
}

void raw_abs_moments(const ActivationSpec& spec, double x, double c, int pmax, double* out) {
  if (spec.eta <= 0.0 && (spec.kind == Kind::halfspace || spec.kind == Kind::band)) {
    const double lo = (spec.p1 - x) / c;
    const double hi = spec.kind == Kind::halfspace ? INFINITY : (spec.p2 - x) / c;
    interval_abs_moments(lo, hi, pmax, out);
    return;
  }
  auto f = [&](double z, double* o) {
    double v = norm_pdf(z) * eval_U(spec, x + c * z);
    const double az = std::abs(z);
    for (int k = 0; k <= pmax; ++k) {
      o[k] = v;
      v *= az;
    }
  };
  auto br = xi_breaks(spec, x, c, spec.eta <= 0.0);
  br.push_back(0.0);
  adaptive_simpson(f, pmax + 1, br, 1e-11, out);
}

double eval_U(const ActivationSpec& spec, double x) {
  if (spec.eta <= 0.0) return base_eval(spec, x);
  double r[1];
  base_raw(spec, x, spec.eta, 0, r);
  return r[0];
}

double mean_score(const ActivationSpec& spec) {
  double r[2];
  raw_moments(spec, 0.0, 1.0, 1, r);
  return r[1];
}

Tilt tilt(const ActivationSpec& spec, double x, double c, int pmax) {
  if (pmax > 8) throw UsageError("tilted moment order above 8");
  double r[16];
  raw_moments(spec, x, c, pmax, r);
  Tilt t;
  t.mass = r[0];
  if (!(r[0] > mass_floor(spec)))
    throw VanishingMass("vanishing tilted mass " + fmt17(r[0]) + " at x=" + fmt17(x) + ", c=" + fmt17(c), r[0]);
  t.m[0] = 1.0;
  for (int k = 1; k <= pmax; ++k) t.m[k] = r[k] / r[0];
  return t;
}

double tilted_moment(const ActivationSpec& spec, double x, double c, int p) { return tilt(spec, x, c, p).m[p]; }

double L(const ActivationSpec& spec, double q, double x) {
  double r[1];
  raw_moments(spec, x, std::sqrt(1.0 - q), 0, r);
  if (!(r[0] > mass_floor(spec)))
    throw VanishingMass("L undefined (-inf): mass " + fmt17(r[0]) + " at x=" + fmt17(x), r[0]);
  return std::log(r[0]);
}

double F(const ActivationSpec& spec, double q, double x) {
  const double c = std::sqrt(1.0 - q);
  return tilt(spec, x, c, 1).m[1] / c;
}

double F_prime(const ActivationSpec& spec, double q, double x) {
  const double c = std::sqrt(1.0 - q);
  const Tilt t = tilt(spec, x, c, 2);
  return (t.m[2] - t.m[1] * t.m[1] - 1.0) / (c * c);
}

HessIngredients hess_ingredients(const ActivationSpec& spec, double x, double c) {
  const EllDerivs d = ell_derivs(spec, x, c);
  return {d.lxx, d.lxc, d.lc, d.lcc};
}

EllDerivs ell_derivs(const ActivationSpec& spec, double x, double c) {
  const Tilt t = tilt(spec, x, c, 4);
  const double m1 = t.m[1], m2 = t.m[2], m3 = t.m[3], m4 = t.m[4];
  const double c2 = c * c;
  EllDerivs d;
  d.l = std::log(t.mass);
  d.lx = m1 / c;
  d.lc = (m2 - 1.0) / c;
  d.lxx = (m2 - m1 * m1 - 1.0) / c2;
  d.lxc = (m3 - m1 * m2 - 2.0 * m1) / c2;
  d.lcc = (m4 - m2 * m2 - 3.0 * m2 + 1.0) / c2;
  return d;
}

}  // namespace isp
