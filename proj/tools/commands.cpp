#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "isp/amp.hpp"
#include "isp/error.hpp"
#include "isp/moments.hpp"
#include "isp/rs.hpp"
#include "isp/sevol.hpp"

namespace ispcli {

using isp::fmt17;
using json = nlohmann::json;

namespace {

void emit(const Context& ctx, const std::string& name, const std::string& body) {
  if (ctx.out_dir.empty()) {
    std::cout << body;
    std::cout.flush();
    return;
  }
  std::filesystem::create_directories(ctx.out_dir);
  const auto path = std::filesystem::path(ctx.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw isp::UsageError("cannot write " + path.string());
  out << body;
}

void emit_config(const Context& ctx) {
  const std::string text = "# effective config for '" + ctx.command + "'\n" + ctx.cfg.effective();
  if (ctx.out_dir.empty())
    std::cerr << text;
  else
    emit(ctx, ctx.command + ".config", text);
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

std::string join(std::initializer_list<std::string> xs) {
  std::string s;
  for (const auto& x : xs) s += (s.empty() ? "" : ",") + x;
  return s + "\n";
}

double positive_alpha(const Config& cfg) {
  const double a = cfg.num("alpha");
  if (!(a > 0)) throw isp::UsageError("alpha must be > 0");
  return a;
}

const char* kRsHeader = "alpha,q,psi,rs,annealed,beta,beta_acute,at,converged,residual\n";

std::string rs_row(const isp::RsSolution& s) {
  return join({fmt17(s.alpha), fmt17(s.q), fmt17(s.psi), fmt17(s.rs_value), fmt17(s.annealed_value), fmt17(s.beta),
               fmt17(s.beta_acute), fmt17(s.at_value), s.converged ? "true" : "false", fmt17(s.residual)});
}

struct Pipeline {
  isp::ActivationSpec spec;
  isp::RsSolution sol;
  isp::SeTrace se;
  isp::AmpTrace tr;
};

Pipeline run_pipeline(const Config& cfg) {
  Pipeline p;
  p.spec = cfg.activation();
  isp::validate(p.spec);
  p.sol = isp::solve_fixed_point(p.spec, positive_alpha(cfg), cfg.rs_options());
  const int t = cfg.integer("t");
  p.se = isp::se_run(p.spec, p.sol, t + 1, 0.0, cfg.integer("quad_order"));
  isp::AmpOptions ao;
  ao.parallel = cfg.flag("parallel");
  ao.quad_order = cfg.integer("quad_order");
  p.tr = isp::amp_run(p.spec, p.sol, p.se, cfg.integer("N"), t, cfg.u64("seed"), ao);
  return p;
}

isp::DeskParams desk(const Config& cfg, const isp::ActivationSpec& spec, double alpha) {
  const isp::ConstantsReport rep = isp::estimate_constants(spec, cfg.grid(), isp::ConstMode::empirical);
  isp::DeskParams d = isp::desk_params(rep, alpha);
  if (cfg.str("eps_bar") != "auto") d.eps_bar = cfg.num("eps_bar");
  if (cfg.str("radius") != "auto") d.radius = cfg.num("radius");
  if (cfg.str("L_cap") != "auto") d.L_cap = cfg.num("L_cap");
  return d;
}

std::string matrix_csv(const Eigen::MatrixXd& A) {
  std::string s;
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < A.cols(); ++j) s += (j ? "," : "") + fmt17(A(i, j));
    s += "\n";
  }
  return s;
}

}  // namespace

int cmd_rs(Context& ctx) {
  emit_config(ctx);
  const auto spec = ctx.cfg.activation();
  isp::validate(spec);
  const auto sol = isp::solve_fixed_point(spec, positive_alpha(ctx.cfg), ctx.cfg.rs_options());
  emit(ctx, "rs.csv", kRsHeader + rs_row(sol));
  return 0;
}

int cmd_sweep(Context& ctx) {
  emit_config(ctx);
  const auto spec = ctx.cfg.activation();
  isp::validate(spec);
  const auto alphas = ctx.cfg.list("alphas");
  for (double a : alphas)
    if (!(a > 0)) throw isp::UsageError("alpha must be > 0");
  std::vector<isp::RsSolution> sols(alphas.size());
  isp::ExceptionSlot slot;
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < static_cast<int>(alphas.size()); ++i)
    slot.run([&] { sols[i] = isp::solve_fixed_point(spec, alphas[i], ctx.cfg.rs_options()); });
  slot.rethrow();
  std::string body = kRsHeader;
  for (const auto& s : sols) body += rs_row(s);
  emit(ctx, "sweep.csv", body);

  const auto etas = ctx.cfg.list("etas");
  if (!etas.empty()) {
    const auto rows = isp::rs_eta_sweep(spec, positive_alpha(ctx.cfg), etas, ctx.cfg.rs_options());
    std::string eb = "eta,q,psi,rs,ok,error\n";
    for (const auto& r : rows)
      eb += join({fmt17(r.eta), fmt17(r.q), fmt17(r.psi), fmt17(r.rs), r.ok ? "true" : "false", "\"" + r.error + "\""});
    emit(ctx, "eta_sweep.csv", eb);
  }
  return 0;
}

int cmd_se(Context& ctx) {
  emit_config(ctx);
  const auto spec = ctx.cfg.activation();
  isp::validate(spec);
  const auto sol = isp::solve_fixed_point(spec, positive_alpha(ctx.cfg), ctx.cfg.rs_options());
  const auto se = isp::se_run(spec, sol, ctx.cfg.integer("t_max"), ctx.cfg.num("eps_conv"), ctx.cfg.integer("quad_order"));
  std::string body = "step,rho,mu,lambda,gamma,Gamma_cum,Lambda_cum\n";
  for (int s = 1; s <= se.t; ++s)
    body += join({std::to_string(s), fmt17(se.rho[s]), fmt17(se.mu[s]), fmt17(se.lambda[s]), fmt17(se.gamma[s]),
                  fmt17(se.Gamma_cum[s]), fmt17(se.Lambda_cum[s])});
  emit(ctx, "se.csv", body);
  return 0;
}

int cmd_amp(Context& ctx) {
  emit_config(ctx);
  const Pipeline p = run_pipeline(ctx.cfg);
  const auto rows = isp::se_check(p.tr, p.se, p.sol);
  std::string body = "quantity,predicted,empirical,abs_dev\n";
  for (const auto& r : rows) body += join({r.quantity, fmt17(r.predicted), fmt17(r.empirical), fmt17(r.abs_dev)});

  json rec;
  rec["activation"] = p.spec.describe();
  rec["alpha"] = p.sol.alpha;
  rec["q"] = p.sol.q;
  rec["psi"] = p.sol.psi;
  rec["beta"] = p.sol.beta;
  rec["beta_acute"] = p.sol.beta_acute;
  rec["N"] = p.tr.N;
  rec["M"] = p.tr.M;
  rec["t"] = p.tr.t;
  rec["seed"] = p.tr.seed;
  rec["sampler"] = p.tr.sampler;
  json doc;
  doc["header"] = {{"timestamp", timestamp()}};
  doc["record"] = rec;
  if (ctx.out_dir.empty()) {
    std::cout << doc.dump(2) << "\n" << body;
  } else {
    emit(ctx, "amp_trace.json", doc.dump(2) + "\n");
    emit(ctx, "se_check.csv", body);
    if (ctx.cfg.flag("dump_matrices")) {
      emit(ctx, "m.csv", matrix_csv(p.tr.m_stack(p.tr.t)));
      emit(ctx, "n.csv", matrix_csv(p.tr.n_stack(p.tr.t)));
      emit(ctx, "r.csv", matrix_csv(p.tr.r));
      emit(ctx, "c.csv", matrix_csv(p.tr.c));
      emit(ctx, "x.csv", matrix_csv(p.tr.x));
      emit(ctx, "y.csv", matrix_csv(p.tr.y));
      emit(ctx, "Lambda_N.csv", matrix_csv(p.tr.Lambda_N));
      emit(ctx, "Gamma_N.csv", matrix_csv(p.tr.Gamma_N));
    }
  }
  return 0;
}

int cmd_psi(Context& ctx) {
  emit_config(ctx);
  const Pipeline p = run_pipeline(ctx.cfg);
  const isp::DeskParams d = desk(ctx.cfg, p.spec, p.sol.alpha);
  const auto ps = isp::pi_star(p.tr);
  const auto vs = isp::varpi_star(p.tr);
  const int t = p.tr.t;
  std::string body = "quantity,value\n";
  auto add = [&](const std::string& k, double v) { body += k + "," + fmt17(v) + "\n"; };
  add("eps_bar", d.eps_bar);
  add("radius", d.radius);
  add("psi_star", isp::psi_functional(p.spec, ps, vs, p.tr, d.eps_bar));
  const auto g = isp::psi_gradient(p.spec, ps, vs, p.tr, d.eps_bar);
  for (int s = 0; s < t; ++s) add("dPsi_dpi[" + std::to_string(s + 1) + "]", g.dpi[s]);
  for (int l = 0; l < t - 1; ++l) add("dPsi_dvarpi[" + std::to_string(l + 1) + "]", g.dvarpi[l]);
  if (t >= 3)
    add("dPsi_dvarpi_last_limit",
        d.eps_bar * std::sqrt(p.sol.psi) * (p.se.gamma[t - 1] - std::sqrt(1.0 - p.se.Gamma_cum[t - 2])));
  const Eigen::MatrixXd Hs = isp::psi_hessian(p.spec, ps, vs, p.tr, d.eps_bar);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Hs.bottomRightCorner(t - 1, t - 1));
  add("hess_varpi_max_eig", es.eigenvalues().maxCoeff());
  add("hess_varpi_bound", 1.0 - 1.9 * d.eps_bar);
  const int n = ctx.cfg.integer("samples");
  if (n > 0) {
    const auto est = isp::conditional_first_moment_estimate(p.spec, p.tr, n, d.eps_bar, d.radius, ctx.cfg.u64("seed"),
                                                            ctx.cfg.flag("parallel"));
    add("first_moment_estimate", est.estimate);
    add("log_cosh_term", est.log_cosh_term);
    add("inside_fraction", est.inside_fraction);
    add("neg_inf_samples", est.neg_inf);
  }
  add("rs", p.sol.rs_value);
  emit(ctx, "psi.csv", body);
  return 0;
}

int cmd_pair(Context& ctx) {
  emit_config(ctx);
  const Pipeline p = run_pipeline(ctx.cfg);
  const isp::DeskParams d = desk(ctx.cfg, p.spec, p.sol.alpha);
  const Eigen::VectorXd zeta = isp::admissible_zeta(p.tr, d.L_cap, ctx.cfg.u64("seed"));
  const double lmax = ctx.cfg.num("lambda_max");
  const int steps = ctx.cfg.integer("lambda_steps");
  if (!(lmax < 1) || steps < 2) throw isp::UsageError("need lambda_max < 1 and lambda_steps >= 2");
  std::string body = "lambda,a2,psi2\n";
  for (int i = 0; i < steps; ++i) {
    const double lam = -lmax + 2 * lmax * i / (steps - 1);
    body += join({fmt17(lam), fmt17(isp::a2_functional(p.spec, lam, zeta, p.tr, d.L_cap)),
                  fmt17(isp::psi2(p.spec, lam, zeta, p.tr, d.L_cap))});
  }
  const double h = 1e-5;
  const double fd = (isp::a2_functional(p.spec, h, zeta, p.tr, d.L_cap) -
                     isp::a2_functional(p.spec, -h, zeta, p.tr, d.L_cap)) / (2 * h);
  std::string summary = "quantity,value\n";
  summary += "L_cap," + fmt17(d.L_cap) + "\n";
  summary += "zeta_load," + fmt17(zeta.squaredNorm() / p.tr.M) + "\n";
  summary += "dA2_dlambda0," + fmt17(isp::a2_derivative0(zeta, p.tr)) + "\n";
  summary += "dA2_dlambda0_fd," + fmt17(fd) + "\n";
  summary += "bound," + fmt17(0.05 * p.sol.alpha * std::sqrt(d.L_cap)) + "\n";
  if (ctx.out_dir.empty()) {
    std::cout << body << summary;
  } else {
    emit(ctx, "pair.csv", body);
    emit(ctx, "pair_summary.csv", summary);
  }
  return 0;
}

int cmd_enumerate(Context& ctx) {
  emit_config(ctx);
  const auto spec = ctx.cfg.activation();
  isp::validate(spec);
  const double alpha = positive_alpha(ctx.cfg);
  isp::EnumOptions eo;
  eo.cap = ctx.cfg.integer("enum_cap");
  eo.force_log = ctx.cfg.flag("force_log");
  eo.parallel = ctx.cfg.flag("parallel");
  const auto Ns = ctx.cfg.int_list("Ns");
  const std::uint64_t seed = ctx.cfg.u64("seed");
  if (!Ns.empty()) {
    for (int N : Ns)
      if (N > eo.cap) throw isp::UsageError("N = " + std::to_string(N) + " exceeds the enumeration cap");
    isp::ExperimentOptions xo;
    xo.trunc_per_spin = ctx.cfg.num("trunc_per_spin");
    xo.rs = ctx.cfg.rs_options();
    xo.enumeration = eo;
    const auto rows = isp::free_energy_experiment(spec, alpha, Ns, ctx.cfg.integer("enum_samples"), seed, xo);
    std::string body = "N,M,samples,mean_logZ_per_spin,stderr,rs_reference,deviation,zero_Z_events\n";
    for (const auto& r : rows)
      body += join({std::to_string(r.N), std::to_string(r.M), std::to_string(r.samples), fmt17(r.mean),
                    fmt17(r.stderr_), fmt17(r.rs_reference), fmt17(r.deviation), std::to_string(r.zero_events)});
    emit(ctx, "experiment.csv", body);
    return 0;
  }
  const int N = ctx.cfg.integer("enum_N");
  if (N > eo.cap) throw isp::UsageError("N = " + std::to_string(N) + " exceeds the enumeration cap " + std::to_string(eo.cap));
  const int Mcfg = ctx.cfg.integer("enum_M");
  const int M = Mcfg >= 0 ? Mcfg : static_cast<int>(std::lround(alpha * N));
  const isp::RowMatrix G = isp::gaussian_matrix(M, N, seed);
  const auto r = isp::enumerate_logZ(spec, G, isp::kTauTrunc, eo);
  json rec;
  rec["activation"] = spec.describe();
  rec["N"] = r.N;
  rec["M"] = r.M;
  rec["seed"] = seed;
  rec["sampler"] = isp::kSamplerId;
  rec["logZ"] = jnum(r.logZ);
  rec["zero"] = r.zero;
  rec["logZ_truncated"] = r.logZ_truncated;
  rec["tau"] = isp::kTauTrunc;
  rec["counting"] = r.counting;
  if (r.counting) rec["count_feasible"] = r.count_feasible;
  rec["per_config_max_weight"] = jnum(r.per_config_max_weight);
  json doc;
  doc["header"] = {{"timestamp", timestamp()}, {"wall_time", r.wall_time}};
  doc["record"] = rec;
  emit(ctx, "enumerate.json", doc.dump(2) + "\n");
  return 0;
}

int cmd_constants(Context& ctx) {
  emit_config(ctx);
  const auto spec = ctx.cfg.activation();
  isp::validate(spec);
  const std::string mode = ctx.cfg.str("const_mode");
  if (mode != "empirical" && mode != "proof") throw isp::UsageError("const_mode must be empirical or proof");
  const auto rep = isp::estimate_constants(spec, ctx.cfg.grid(),
                                           mode == "proof" ? isp::ConstMode::proof : isp::ConstMode::empirical);
  std::string body = "quantity,value\n";
  auto add = [&](const std::string& k, double v) { body += k + "," + fmt17(v) + "\n"; };
  add("c1_empirical", rep.c1_empirical);
  add("k2_empirical", rep.k2_empirical);
  add("k2_prime_empirical", rep.k2_prime_empirical);
  add("cbar1", rep.cbar1);
  add("k0", rep.k0);
  add("c0", rep.c0);
  add("c1", rep.c1);
  add("skipped_points", rep.skipped);
  if (rep.mode == isp::ConstMode::proof) {
    body += "note,proof constants: not practically tight\n";
    add("c1_proof_log10", rep.c1_proof_log10);
    add("c1_proof", rep.c1_proof);
    add("c1_proof_overflow", rep.c1_proof_overflow);
    add("alpha_threshold_log10", rep.alpha_threshold_log10);
    add("alpha_prime_threshold_log10", rep.alpha_prime_threshold_log10);
  } else {
    add("alpha_threshold_log10", rep.alpha_threshold_log10);
    add("alpha_prime_threshold_log10", rep.alpha_prime_threshold_log10);
  }
  emit(ctx, "constants.csv", body);
  return 0;
}

}  // namespace ispcli
