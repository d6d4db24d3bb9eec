#include "isp/moments.hpp"

#include <algorithm>
#include <cmath>

#include "isp/rs.hpp"

namespace isp {

DeskParams desk_params(const ConstantsReport& rep, double alpha) {
  DeskParams d;
  d.c1 = rep.c1_empirical;
  d.k2 = rep.k2_empirical;
  const double sa = std::sqrt(alpha);
  d.eps_bar = std::min(std::exp(5.0) * d.c1 * sa, 1.0 / (d.c1 * d.c1 * d.k2));
  d.radius = 16.0 * d.c1 * sa;
  d.L_cap = 5.0 * d.c1 * d.c1;
  return d;
}

Eigen::VectorXd pi_star(const AmpTrace& tr) { return std::sqrt(tr.q) * tr.Lambda.row(tr.t - 1).transpose(); }

Eigen::VectorXd varpi_star(const AmpTrace& tr) {
  if (tr.t < 2) return Eigen::VectorXd();
  return (1.0 - tr.q) * std::sqrt(tr.psi) * tr.Gamma.row(tr.t - 2).transpose();
}

namespace {

void need_t2(const AmpTrace& tr) {
  if (tr.t < 2) throw UsageError("overlap parameters need t >= 2");
}

// J'' and the coefficients a with J' = m[t]^T a.
Eigen::VectorXd split_config(const Eigen::VectorXd& J, const AmpTrace& tr, Eigen::VectorXd* coef) {
  const Eigen::MatrixXd mt = tr.m_stack(tr.t).transpose();
  const Eigen::VectorXd a = mt.householderQr().solve(J);
  Eigen::VectorXd Jpp = J - mt * a;
  if (!(Jpp.norm() > 1e-9 * std::sqrt(double(tr.N)))) throw NumericalError("degenerate configuration");
  if (coef) *coef = a;
  return Jpp;
}

}  // namespace

void pi_varpi(const double* J, const AmpTrace& tr, Eigen::VectorXd& pi, Eigen::VectorXd& varpi) {
  Eigen::Map<const Eigen::VectorXd> j(J, tr.N);
  pi = tr.r * j / std::sqrt(double(tr.N));
  varpi = tr.y * j / double(tr.N);
}

OverlapParams overlap_params(const Eigen::VectorXd& J, const AmpTrace& tr, double eps_bar) {
  need_t2(tr);
  if (J.size() != tr.N) throw UsageError("configuration length differs from N");
  OverlapParams op;
  op.eps_bar = eps_bar;
  pi_varpi(J.data(), tr, op.pi, op.varpi);
  Eigen::VectorXd a;
  const Eigen::VectorXd Jpp = split_config(J, tr, &a);
  op.pi_hat = std::sqrt(tr.q) * a;
  op.norm_Jpp = Jpp.norm();
  op.v = Jpp / op.norm_Jpp;
  const Eigen::VectorXd rhs = tr.H_stack() * op.v / std::sqrt(tr.N * tr.psi);
  const Eigen::MatrixXd GG = tr.Gamma_N * tr.Gamma_N.transpose();
  op.delta = GG.llt().solve(rhs);
  op.pi_star = pi_star(tr);
  op.varpi_star = varpi_star(tr);
  return op;
}

PairLambda pair_lambda(const Eigen::VectorXd& J, const Eigen::VectorXd& K, const AmpTrace& tr) {
  const Eigen::VectorXd Jpp = split_config(J, tr, nullptr);
  const Eigen::VectorXd Kpp = split_config(K, tr, nullptr);
  const Eigen::VectorXd v = Jpp / Jpp.norm();
  PairLambda out;
  out.lambda = std::clamp(v.dot(Kpp / Kpp.norm()), -1.0, 1.0);
  const Eigen::VectorXd rest = Kpp - Kpp.dot(v) * v;
  const double nr = rest.norm();
  out.w = nr > 1e-12 * Kpp.norm() ? Eigen::VectorXd(rest / nr) : Eigen::VectorXd::Zero(tr.N);
  return out;
}

Eigen::VectorXd psi_X(const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi, const AmpTrace& tr,
                      double eps_bar) {
  Eigen::VectorXd X = tr.x.transpose() * pi;
  if (eps_bar != 0.0 && tr.t >= 2)
    X += std::sqrt(double(tr.N)) * eps_bar * (tr.c.transpose() * (varpi - varpi_star(tr)));
  return X;
}

namespace {

struct PsiSetup {
  double c2, c;
  Eigen::VectorXd vs, w, X;
};

PsiSetup setup(const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi, const AmpTrace& tr, double eps_bar) {
  need_t2(tr);
  if (pi.size() != tr.t || varpi.size() != tr.t - 1) throw UsageError("parameter dimensions do not match t");
  PsiSetup s;
  s.c2 = 1.0 - pi.squaredNorm();
  if (!(s.c2 > 0)) throw UsageError("Psi needs |pi| < 1");
  s.c = std::sqrt(s.c2);
  s.vs = varpi_star(tr);
  s.w = (1.0 - eps_bar) * varpi + eps_bar * s.vs;
  s.X = psi_X(pi, varpi, tr, eps_bar);
  return s;
}

[[noreturn]] void vanishing(int a) { throw NumericalError("Psi = -inf at coordinate " + std::to_string(a)); }

}  // namespace

double psi_functional(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                      const AmpTrace& tr, double eps_bar) {
  const PsiSetup s = setup(pi, varpi, tr, eps_bar);
  double lsum = 0.0;
  for (int a = 0; a < tr.M; ++a) {
    try {
      lsum += std::log(tilt(spec, s.X[a], s.c, 0).mass);
    } catch (const VanishingMass&) {
      vanishing(a);
    }
  }
  return s.w.squaredNorm() / (2 * s.c2) - s.vs.dot(varpi) / (1.0 - tr.q) + lsum / tr.N;
}

namespace {

std::vector<EllDerivs> all_derivs(const ActivationSpec& spec, const Eigen::VectorXd& X, double c) {
  std::vector<EllDerivs> d(X.size());
  for (int a = 0; a < X.size(); ++a) {
    try {
      d[a] = ell_derivs(spec, X[a], c);
    } catch (const VanishingMass&) {
      vanishing(a);
    }
  }
  return d;
}

}  // namespace

PsiGradient psi_gradient(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                         const AmpTrace& tr, double eps_bar) {
  const PsiSetup s = setup(pi, varpi, tr, eps_bar);
  const auto d = all_derivs(spec, s.X, s.c);
  const int M = tr.M;
  Eigen::VectorXd lx(M);
  double lc_sum = 0.0;
  for (int a = 0; a < M; ++a) {
    lx[a] = d[a].lx;
    lc_sum += d[a].lc;
  }
  const double N = tr.N, w2 = s.w.squaredNorm();
  PsiGradient g;
  g.dpi = w2 * pi / (s.c2 * s.c2) + (tr.x * lx - pi * (lc_sum / s.c)) / N;
  g.dvarpi = (1.0 - eps_bar) * s.w / s.c2 - s.vs / (1.0 - tr.q) + eps_bar / std::sqrt(N) * (tr.c * lx);
  return g;
}

Eigen::MatrixXd psi_hessian(const ActivationSpec& spec, const Eigen::VectorXd& pi, const Eigen::VectorXd& varpi,
                            const AmpTrace& tr, double eps_bar) {
  const PsiSetup s = setup(pi, varpi, tr, eps_bar);
  const auto d = all_derivs(spec, s.X, s.c);
  const int t = tr.t, l = t - 1, M = tr.M;
  const double N = tr.N, c = s.c, c2 = s.c2, w2 = s.w.squaredNorm();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(t, t);

  Eigen::VectorXd A(M), B(M);
  double sa = 0, sb = 0;
  for (int a = 0; a < M; ++a) {
    A[a] = d[a].lxx;
    B[a] = d[a].lxc;
    sa += d[a].lc;
    sb += d[a].lcc;
  }
  const Eigen::VectorXd gc = -pi / c;
  const Eigen::MatrixXd Hc = -I / c - pi * pi.transpose() / (c2 * c);
  const Eigen::VectorXd xB = tr.x * B;

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(t + l, t + l);
  H.topLeftCorner(t, t) = w2 * (I / (c2 * c2) + 4.0 * pi * pi.transpose() / (c2 * c2 * c2)) +
                          (tr.x * A.asDiagonal() * tr.x.transpose() + xB * gc.transpose() + gc * xB.transpose() +
                           sb * gc * gc.transpose() + sa * Hc) /
                              N;
  Eigen::MatrixXd Ppv = 2.0 * (1.0 - eps_bar) * pi * s.w.transpose() / (c2 * c2);
  Eigen::MatrixXd Lpv = Eigen::MatrixXd::Zero(t, l);
  for (int a = 0; a < M; ++a) Lpv += (A[a] * tr.x.col(a) + B[a] * gc) * tr.c.col(a).transpose();
  Lpv *= eps_bar / std::sqrt(N);
  H.topRightCorner(t, l) = Ppv + Lpv;
  H.bottomLeftCorner(l, t) = (Ppv + Lpv).transpose();
  H.bottomRightCorner(l, l) = (1.0 - eps_bar) * (1.0 - eps_bar) / c2 * Eigen::MatrixXd::Identity(l, l) +
                              eps_bar * eps_bar * (tr.c * A.asDiagonal() * tr.c.transpose());
  return H;
}

namespace {

void check_cap(const Eigen::VectorXd& zeta, const AmpTrace& tr, double L_cap) {
  if (zeta.size() != tr.M) throw UsageError("zeta length differs from M");
  const double load = zeta.squaredNorm() / tr.M;
  if (load > L_cap * (1 + 1e-12))
    throw UsageError("zeta violates the cap |zeta|^2/M <= L = " + fmt17(L_cap) + " (got " + fmt17(load) + ")");
}

}  // namespace

double a2_functional(const ActivationSpec& spec, double lambda, const Eigen::VectorXd& zeta, const AmpTrace& tr,
                     double L_cap) {
  if (!(std::abs(lambda) < 1)) throw UsageError("A2 needs |lambda| < 1");
  check_cap(zeta, tr, L_cap);
  const double l2 = lambda * lambda, q = tr.q;
  const double c = std::sqrt((1.0 - q) * (1.0 - l2));
  const double shift = std::sqrt(1.0 - q) * lambda;
  const Eigen::VectorXd& h = tr.h[tr.t + 1];
  double lsum = 0.0;
  for (int a = 0; a < tr.M; ++a) {
    try {
      lsum += std::log(tilt(spec, h[a] + shift * zeta[a], c, 0).mass);
    } catch (const VanishingMass&) {
      throw NumericalError("A2 = -inf at coordinate " + std::to_string(a));
    }
  }
  return tr.psi * (1.0 - q) / (2.0 * (1.0 - l2)) + lsum / tr.N;
}

double a2_derivative0(const Eigen::VectorXd& zeta, const AmpTrace& tr) {
  return std::sqrt(1.0 - tr.q) * tr.n[tr.t + 1].dot(zeta) / tr.N;
}

double psi2(const ActivationSpec& spec, double lambda, const Eigen::VectorXd& zeta, const AmpTrace& tr,
            double L_cap) {
  return psi_functional(spec, pi_star(tr), varpi_star(tr), tr, 0.0) - tr.psi * (1.0 - tr.q) +
         a2_functional(spec, lambda, zeta, tr, L_cap);
}

Eigen::VectorXd admissible_zeta(const AmpTrace& tr, double L_cap, std::uint64_t seed) {
  Engine eng = make_engine(seed, 0x2e7a);
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(tr.M);
  for (int a = 0; a < tr.M; ++a) z[a] = nd(eng);
  if (tr.c.rows() > 0) z -= tr.c.transpose() * (tr.c * z);
  const double load = z.squaredNorm() / tr.M;
  if (load > L_cap) z *= std::sqrt(L_cap / load) * (1 - 1e-14);
  return z;
}

void q_measure_for_each(const AmpTrace& tr, int n_samples, std::uint64_t seed,
                        const std::function<void(int, const std::vector<double>&)>& fn, bool parallel) {
  if (tr.t < 2) throw UsageError("Q-measure needs H^(t), t >= 2");
  const Eigen::VectorXd& H = tr.H[tr.t];
  std::vector<double> p(tr.N);
  for (int i = 0; i < tr.N; ++i) p[i] = 0.5 * (1.0 + std::tanh(H[i]));
  ExceptionSlot slot;
#pragma omp parallel if (parallel)
  {
    std::vector<double> J(tr.N);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
#pragma omp for schedule(static)
    for (int k = 0; k < n_samples; ++k) {
      Engine eng = make_engine(seed, 0x100000000ULL + static_cast<std::uint64_t>(k));
      for (int i = 0; i < tr.N; ++i) J[i] = ud(eng) < p[i] ? 1.0 : -1.0;
      slot.run([&] { fn(k, J); });
    }
  }
  slot.rethrow();
}

std::vector<std::vector<double>> q_measure_sample(const AmpTrace& tr, int n_samples, std::uint64_t seed) {
  std::vector<std::vector<double>> out(n_samples);
  q_measure_for_each(tr, n_samples, seed, [&](int k, const std::vector<double>& J) { out[k] = J; });
  return out;
}

FirstMomentEstimate conditional_first_moment_estimate(const ActivationSpec& spec, const AmpTrace& tr, int n_samples,
                                                      double eps_bar, double radius, std::uint64_t seed,
                                                      bool parallel) {
  if (n_samples < 1) throw UsageError("need at least one Q-sample");
  FirstMomentEstimate est;
  const Eigen::VectorXd& H = tr.H[tr.t];
  double lc = 0.0;
  for (int i = 0; i < tr.N; ++i) lc += log2cosh(H[i]);
  est.log_cosh_term = lc / tr.N;
  const Eigen::VectorXd ps = pi_star(tr), vs = varpi_star(tr);
  est.psi_star = psi_functional(spec, ps, vs, tr, eps_bar);

  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> val(n_samples, ninf);
  std::vector<char> inside(n_samples, 0);
  q_measure_for_each(
      tr, n_samples, seed,
      [&](int k, const std::vector<double>& J) {
        Eigen::VectorXd pi, vp;
        pi_varpi(J.data(), tr, pi, vp);
        if (std::max((pi - ps).norm(), (vp - vs).norm()) > radius) return;
        inside[k] = 1;
        try {
          val[k] = tr.N * psi_functional(spec, pi, vp, tr, eps_bar);
        } catch (const NumericalError&) {
        }
      },
      parallel);

  double mx = ninf;
  int n_in = 0;
  for (int k = 0; k < n_samples; ++k) {
    n_in += inside[k];
    if (inside[k] && val[k] == ninf) ++est.neg_inf;
    mx = std::max(mx, val[k]);
  }
  est.inside_fraction = double(n_in) / n_samples;
  if (mx == ninf) throw NumericalError("first-moment estimate degenerate");
  double s = 0.0;
  for (double v : val)
    if (v != ninf) s += std::exp(v - mx);
  est.estimate = est.log_cosh_term + (mx + std::log(s) - std::log(double(n_samples))) / tr.N;
  return est;
}

}  // namespace isp
