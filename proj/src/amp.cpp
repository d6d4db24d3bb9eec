#include "isp/amp.hpp"

#include <algorithm>
#include <cmath>

#include "isp/kernels.hpp"
#include "isp/moments.hpp"

namespace isp {

Eigen::MatrixXd AmpTrace::m_stack(int s) const {
  Eigen::MatrixXd out(s, N);
  for (int k = 1; k <= s; ++k) out.row(k - 1) = m[k].transpose();
  return out;
}

Eigen::MatrixXd AmpTrace::n_stack(int s) const {
  Eigen::MatrixXd out(s, M);
  for (int k = 1; k <= s; ++k) out.row(k - 1) = n[k].transpose();
  return out;
}

Eigen::MatrixXd AmpTrace::h_stack() const {
  Eigen::MatrixXd out(t, M);
  for (int k = 2; k <= t + 1; ++k) out.row(k - 2) = h[k].transpose();
  return out;
}

Eigen::MatrixXd AmpTrace::H_stack() const {
  Eigen::MatrixXd out(std::max(t - 1, 0), N);
  for (int k = 2; k <= t; ++k) out.row(k - 2) = H[k].transpose();
  return out;
}

void gram_schmidt(const Eigen::MatrixXd& rows, double scale, double pivot_ref, Eigen::MatrixXd& frame,
                  Eigen::MatrixXd& coef) {
  const int k = static_cast<int>(rows.rows());
  frame.resize(k, rows.cols());
  coef = Eigen::MatrixXd::Zero(k, k);
  for (int s = 0; s < k; ++s) {
    Eigen::VectorXd v = rows.row(s).transpose();
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j < s; ++j) {
        const double d = frame.row(j).dot(v);
        v -= d * frame.row(j).transpose();
        coef(s, j) += d;
      }
    }
    const double piv = v.norm();
    if (!(piv >= 1e-10 * std::sqrt(pivot_ref)))
      throw NumericalError("iterate collinearity at step " + std::to_string(s + 1) + " (pivot " + fmt17(piv) + ")");
    frame.row(s) = v.transpose() / piv;
    coef(s, s) = piv;
  }
  coef /= scale;
}

AmpTrace amp_run(const ActivationSpec& spec, const RsSolution& sol, const SeTrace& se, int N, int t,
                 std::uint64_t seed, const AmpOptions& opts) {
  if (N < 16) throw UsageError("AMP needs N >= 16");
  const int M = static_cast<int>(std::lround(sol.alpha * N));
  if (M < 1) throw UsageError("AMP needs M = round(alpha N) >= 1");
  return amp_run_on(spec, sol, se, gaussian_matrix(M, N, seed), t, seed, opts);
}

AmpTrace amp_run_on(const ActivationSpec& spec, const RsSolution& sol, const SeTrace& se, RowMatrix G, int t,
                    std::uint64_t seed, const AmpOptions& opts) {
  if (!sol.converged) throw UsageError("AMP needs a converged fixed point");
  if (sol.q <= 0 || sol.psi <= 0) throw NumericalError("degenerate fixed point (annealed branch)");
  if (t < 1) throw UsageError("AMP needs t >= 1");
  AmpTrace tr;
  tr.M = static_cast<int>(G.rows());
  tr.N = static_cast<int>(G.cols());
  tr.t = t;
  tr.seed = seed;
  tr.sampler = kSamplerId;
  tr.alpha = sol.alpha;
  tr.q = sol.q;
  tr.psi = sol.psi;
  tr.beta = sol.beta;
  tr.beta_acute = sol.beta_acute;
  tr.G = std::move(G);
  const int N = tr.N, M = tr.M;
  const double sqN = std::sqrt(double(N));

  tr.m.assign(t + 2, Eigen::VectorXd());
  tr.n.assign(t + 2, Eigen::VectorXd());
  tr.H.assign(t + 2, Eigen::VectorXd());
  tr.h.assign(t + 2, Eigen::VectorXd());
  tr.m[0] = Eigen::VectorXd::Zero(N);
  tr.n[0] = Eigen::VectorXd::Zero(M);
  tr.m[1] = Eigen::VectorXd::Constant(N, std::sqrt(sol.q));
  tr.n[1] = Eigen::VectorXd::Constant(M, std::sqrt(sol.psi / sol.alpha));

  for (int k = 1; k <= t; ++k) {
    Eigen::VectorXd Hn(N), hn(M);
    kernels::matvec_t(tr.G, tr.n[k].data(), Hn.data(), opts.parallel);
    kernels::matvec(tr.G, tr.m[k].data(), hn.data(), opts.parallel);
    Hn = Hn / sqN - sol.beta * tr.m[k - 1];
    hn = hn / sqN - sol.beta_acute * tr.n[k - 1];
    tr.H[k + 1] = Hn;
    tr.h[k + 1] = hn;
    tr.m[k + 1] = Hn.array().tanh().matrix();
    Eigen::VectorXd nn(M);
    ExceptionSlot slot;
#pragma omp parallel for schedule(static) if (opts.parallel)
    for (int a = 0; a < M; ++a) slot.run([&] { nn[a] = F(spec, sol.q, hn[a]); });
    slot.rethrow();
    tr.n[k + 1] = nn;
  }

  gram_schmidt(tr.m_stack(t), std::sqrt(N * sol.q), N, tr.r, tr.Lambda_N);
  tr.Lambda = lambda_matrix(se, t);
  tr.x = tr.Lambda.triangularView<Eigen::Lower>().solve(tr.h_stack() / std::sqrt(sol.q));
  if (t >= 2) {
    gram_schmidt(tr.n_stack(t - 1), std::sqrt(N * sol.psi), N, tr.c, tr.Gamma_N);
    tr.Gamma = gamma_matrix(se, t);
    tr.y = tr.Gamma.triangularView<Eigen::Lower>().solve(tr.H_stack() / std::sqrt(sol.psi));
  } else {
    tr.c.resize(0, M);
    tr.Gamma_N.resize(0, 0);
    tr.Gamma.resize(0, 0);
    tr.y.resize(0, N);
  }
  return tr;
}

std::vector<DevRow> se_check(const AmpTrace& tr, const SeTrace& se, const RsSolution& sol) {
  std::vector<DevRow> out;
  auto add = [&](std::string name, double pred, double emp) {
    out.push_back({std::move(name), pred, emp, std::abs(pred - emp)});
  };
  const int t = tr.t, N = tr.N, M = tr.M;
  const double Nq = N * sol.q, Npsi = N * sol.psi;
  for (int s = 1; s <= t; ++s) add("m_norm[" + std::to_string(s) + "]", 1.0, tr.m[s].squaredNorm() / Nq);
  for (int s = 1; s <= t; ++s) add("n_norm[" + std::to_string(s) + "]", 1.0, tr.n[s].squaredNorm() / Npsi);
  for (int r = 1; r <= t; ++r)
    for (int s = r + 1; s <= t; ++s)
      add("m_overlap[" + std::to_string(r) + "," + std::to_string(s) + "]", se.rho[r], tr.m[r].dot(tr.m[s]) / Nq);
  for (int r = 1; r <= t - 1; ++r)
    for (int s = r + 1; s <= t - 1; ++s)
      add("n_overlap[" + std::to_string(r) + "," + std::to_string(s) + "]", se.mu[r], tr.n[r].dot(tr.n[s]) / Npsi);
  for (int r = 0; r < t; ++r)
    for (int s = 0; s <= r; ++s)
      add("Lambda_N[" + std::to_string(r + 1) + "," + std::to_string(s + 1) + "]", tr.Lambda(r, s), tr.Lambda_N(r, s));
  for (int r = 0; r < t - 1; ++r)
    for (int s = 0; s <= r; ++s)
      add("Gamma_N[" + std::to_string(r + 1) + "," + std::to_string(s + 1) + "]", tr.Gamma(r, s), tr.Gamma_N(r, s));
  if (t >= 2) {
    const Eigen::MatrixXd my = tr.y * tr.m_stack(t).transpose() / (N * std::sqrt(sol.q));
    const double scale = std::sqrt(sol.psi / sol.q) * (1.0 - sol.q);
    for (int l = 0; l < t - 1; ++l)
      for (int s = 0; s < t; ++s) {
        const double pred = s == 0 ? 0.0 : scale * tr.Gamma(s - 1, l);
        add("m_dot_y[" + std::to_string(l + 1) + "," + std::to_string(s + 1) + "]", pred, my(l, s));
      }
    for (int l = 0; l < t - 1; ++l) add("y_mean[" + std::to_string(l + 1) + "]", 0.0, tr.y.row(l).mean());
  }
  // empirical varsigma_t: t times the squared max entry of Lambda_N, Gamma_N and their inverses
  double ent = std::max(tr.Lambda_N.cwiseAbs().maxCoeff(), tr.Lambda_N.inverse().cwiseAbs().maxCoeff());
  if (t >= 2)
    ent = std::max({ent, tr.Gamma_N.cwiseAbs().maxCoeff(), tr.Gamma_N.inverse().cwiseAbs().maxCoeff()});
  out.push_back({"varsigma_t", std::nan(""), t * ent * ent, std::nan("")});
  const Eigen::MatrixXd xc = tr.x * tr.x.transpose() / M;
  for (int r = 0; r < t; ++r)
    for (int s = 0; s <= r; ++s)
      add("x_cov[" + std::to_string(r + 1) + "," + std::to_string(s + 1) + "]", r == s ? 1.0 : 0.0, xc(r, s));
  return out;
}

RowMatrix condition_project(const RowMatrix& G, const Eigen::VectorXd& r, const Eigen::VectorXd& c) {
  const double nr = r.norm(), nc = c.norm();
  if (std::abs(nr - 1.0) > 1e-10 || std::abs(nc - 1.0) > 1e-10)
    throw UsageError("condition_project needs unit vectors; |r| = " + fmt17(nr) + ", |c| = " + fmt17(nc));
  const Eigen::VectorXd Gr = G * r;
  const Eigen::VectorXd Gtc = G.transpose() * c;
  const double cGr = c.dot(Gr);
  RowMatrix out = Gr * r.transpose() + c * Gtc.transpose() - cGr * (c * r.transpose());
  return out;
}

RowMatrix residual_after_conditioning(const AmpTrace& tr) {
  RowMatrix R = tr.G;
  for (int s = 0; s < tr.t; ++s) {
    const Eigen::VectorXd r = tr.r.row(s).transpose();
    if (s < tr.c.rows()) {
      const Eigen::VectorXd c = tr.c.row(s).transpose();
      R -= condition_project(R, r, c);
    } else {
      const Eigen::VectorXd Rr = R * r;
      R -= Rr * r.transpose();
    }
  }
  return R;
}

ResampleReport resample_check(const AmpTrace& tr, int n_samples, std::uint64_t seed) {
  ResampleReport rep;
  const RowMatrix R = residual_after_conditioning(tr);
  for (int s = 0; s < tr.r.rows(); ++s)
    rep.max_row_residual = std::max(rep.max_row_residual, (R * tr.r.row(s).transpose()).cwiseAbs().maxCoeff());
  for (int s = 0; s < tr.c.rows(); ++s)
    rep.max_col_residual = std::max(rep.max_col_residual, (R.transpose() * tr.c.row(s).transpose()).cwiseAbs().maxCoeff());

  const int batch = 512;
  Engine eng = make_engine(seed, 0x5e5a);
  std::normal_distribution<double> nd;
  double acc = 0.0;
  int done = 0;
  while (done < n_samples) {
    const int b = std::min(batch, n_samples - done);
    Eigen::MatrixXd U(tr.M, b), V(tr.N, b);
    for (int j = 0; j < b; ++j) {
      for (int a = 0; a < tr.M; ++a) U(a, j) = nd(eng);
      for (int i = 0; i < tr.N; ++i) V(i, j) = nd(eng);
    }
    U -= tr.c.transpose() * (tr.c * U);
    V -= tr.r.transpose() * (tr.r * V);
    U.colwise().normalize();
    V.colwise().normalize();
    const Eigen::MatrixXd RV = R * V;
    for (int j = 0; j < b; ++j) {
      const double z = U.col(j).dot(RV.col(j));
      acc += z * z;
    }
    done += b;
  }
  rep.samples = n_samples;
  rep.second_moment = acc / n_samples;
  rep.tolerance = 5.0 / std::sqrt(double(n_samples));
  return rep;
}

namespace {

Eigen::VectorXd clt_X(const AmpTrace& tr, const OverlapParams& op, const Eigen::VectorXd& tau, double c) {
  const int t = tr.t;
  const Eigen::VectorXd pacute = op.pi_hat.tail(t - 1);
  Eigen::VectorXd inner = (1.0 - tr.q) * pacute / std::sqrt(tr.q);
  if (tau.size() == t - 1 && tau.norm() > 0)
    inner += c / std::sqrt(tr.psi) * tr.Gamma_N.transpose().triangularView<Eigen::Upper>().solve(tau);
  return tr.h_stack().transpose() * op.pi_hat / std::sqrt(tr.q) + tr.n_stack(t - 1).transpose() * inner;
}

}  // namespace

Eigen::MatrixXd sigma_cov(const ActivationSpec& spec, const AmpTrace& tr, const Eigen::VectorXd& J,
                          const Eigen::VectorXd& tau) {
  if (tr.t < 2) throw UsageError("sigma_cov needs t >= 2");
  const OverlapParams op = overlap_params(J, tr, 0.0);
  const double p2 = op.pi.squaredNorm();
  if (p2 > 0.64 + 1e-12) throw UsageError("sigma_cov needs |pi(J)| <= 4/5");
  const double c = std::sqrt(1.0 - p2);
  const Eigen::VectorXd X = clt_X(tr, op, tau, c);
  const Eigen::MatrixXd nst = tr.n_stack(tr.t - 1);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(tr.t - 1, tr.t - 1);
  int skipped = 0;
  for (int a = 0; a < tr.M; ++a) {
    try {
      const Tilt tl = tilt(spec, X[a], c, 2);
      const double var = tl.m[2] - tl.m[1] * tl.m[1];
      S += var * nst.col(a) * nst.col(a).transpose();
    } catch (const VanishingMass&) {
      ++skipped;
    }
  }
  if (skipped * 100 > tr.M) throw NumericalError("sigma_cov: more than 1% of coordinates have vanishing mass");
  return S / tr.N;
}

namespace {

// Inverse-CDF table for the density U(X + c z) phi(z) / mass on [-10, 10].
struct CdfTable {
  std::vector<double> cdf;  // normalized, size kPts
  double mean = 0;
};

constexpr int kPts = 4096;
constexpr double kZ = 10.0;

CdfTable build_table(const ActivationSpec& spec, double X, double c) {
  CdfTable tb;
  tb.cdf.assign(kPts, 0.0);
  const double dz = 2 * kZ / (kPts - 1);
  std::vector<double> dens(kPts);
  for (int i = 0; i < kPts; ++i) {
    const double z = -kZ + i * dz;
    dens[i] = eval_U(spec, X + c * z) * norm_pdf(z);
  }
  // trapezoid cell masses
  for (int i = 1; i < kPts; ++i) tb.cdf[i] = tb.cdf[i - 1] + 0.5 * dz * (dens[i - 1] + dens[i]);
  const double tot = tb.cdf.back();
  if (!(tot > 0)) throw VanishingMass("zero mass in sampling table", tot);
  for (double& v : tb.cdf) v /= tot;
  tb.mean = tilt(spec, X, c, 1).m[1];
  return tb;
}

double sample_table(const CdfTable& tb, double u) {
  const auto it = std::upper_bound(tb.cdf.begin(), tb.cdf.end(), u);
  const int j = std::clamp(static_cast<int>(it - tb.cdf.begin()), 1, kPts - 1);
  const double lo = tb.cdf[j - 1], hi = tb.cdf[j];
  const double f = hi > lo ? (u - lo) / (hi - lo) : 0.5;
  const double dz = 2 * kZ / (kPts - 1);
  return -kZ + (j - 1 + f) * dz;
}

}  // namespace

CltReport clt_cov_check(const ActivationSpec& spec, const AmpTrace& tr, const Eigen::VectorXd& J,
                        const Eigen::VectorXd& tau, int n_samples, std::uint64_t seed) {
  CltReport rep;
  rep.sigma = sigma_cov(spec, tr, J, tau);
  const OverlapParams op = overlap_params(J, tr, 0.0);
  const double c = std::sqrt(1.0 - op.pi.squaredNorm());
  const Eigen::VectorXd X = clt_X(tr, op, tau, c);
  const int M = tr.M, d = tr.t - 1;

  // One table per X bucket of width 1e-3.
  std::vector<int> bucket_of(M, -1);
  std::vector<CdfTable> tables;
  std::vector<long long> keys;
  for (int a = 0; a < M; ++a) {
    const long long key = std::llround(X[a] * 1000.0);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      try {
        tables.push_back(build_table(spec, key / 1000.0, c));
      } catch (const VanishingMass&) {
        ++rep.skipped;
        continue;
      }
      keys.push_back(key);
      bucket_of[a] = static_cast<int>(tables.size()) - 1;
    } else {
      bucket_of[a] = static_cast<int>(it - keys.begin());
    }
  }
  if (rep.skipped * 100 > M) throw NumericalError("clt_cov_check: more than 1% of coordinates skipped");

  const Eigen::MatrixXd nst = tr.n_stack(d);
  const double isqN = 1.0 / std::sqrt(double(tr.N));
  // Batches with their own streams; partial sums merged in batch order.
  const int nb = 64;
  std::vector<Eigen::MatrixXd> part(nb, Eigen::MatrixXd::Zero(d, d));
  std::vector<Eigen::VectorXd> psum(nb, Eigen::VectorXd::Zero(d));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < nb; ++b) {
    Engine eng = make_engine(seed, 1000 + b);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const int s0 = static_cast<int>(static_cast<long long>(n_samples) * b / nb);
    const int s1 = static_cast<int>(static_cast<long long>(n_samples) * (b + 1) / nb);
    Eigen::VectorXd W(d);
    for (int s = s0; s < s1; ++s) {
      W.setZero();
      for (int a = 0; a < M; ++a) {
        if (bucket_of[a] < 0) continue;
        const CdfTable& tb = tables[bucket_of[a]];
        const double z = sample_table(tb, ud(eng));
        W += (z - tb.mean) * nst.col(a);
      }
      W *= isqN;
      part[b] += W * W.transpose();
      psum[b] += W;
    }
  }
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  for (int b = 0; b < nb; ++b) {
    S += part[b];
    mu += psum[b];
  }
  mu /= n_samples;
  rep.empirical = S / n_samples - mu * mu.transpose();
  rep.max_abs_dev = (rep.empirical - rep.sigma).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rep.sigma);
  rep.iota_min = es.eigenvalues().minCoeff();
  rep.iota_max = es.eigenvalues().maxCoeff();
  return rep;
}

}  // namespace isp
