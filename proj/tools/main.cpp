#include <iostream>

#include <CLI11.hpp>
#include <omp.h>

#include "commands.hpp"
#include "isp/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ising perceptron RS toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("-o,--out", out_dir, "output directory (default: stdout)");
  app.add_option("-s,--seed", seed, "seed (overrides the config)");
  app.add_option("-j,--threads", threads, "worker cap (overrides the config)");

  using Fn = int (*)(ispcli::Context&);
  struct Cmd {
    const char* name;
    Fn fn;
    const char* help;
  };
  const Cmd cmds[] = {
      {"rs", ispcli::cmd_rs, "fixed point (q, psi), RS and annealed values, Onsager terms, AT"},
      {"se", ispcli::cmd_se, "state-evolution trace"},
      {"amp", ispcli::cmd_amp, "AMP run with the state-evolution comparison"},
      {"psi", ispcli::cmd_psi, "Psi at the star point, its derivatives and the first-moment estimate"},
      {"pair", ispcli::cmd_pair, "pair functional A2 and Psi2 over a lambda grid"},
      {"enumerate", ispcli::cmd_enumerate, "exact partition function, or the finite-N experiment when Ns is set"},
      {"constants", ispcli::cmd_constants, "activation constants C1, K2, K2' and alpha thresholds"},
      {"sweep", ispcli::cmd_sweep, "rs over an alpha list (and an eta list)"},
  };
  for (const auto& [name, fn, help] : cmds) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("overrides", overrides, "key=value overrides");
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  ispcli::Context ctx;
  ctx.out_dir = out_dir;
  try {
    if (!config_path.empty()) ctx.cfg.load_file(config_path);
    for (const auto& kv : overrides) ctx.cfg.set_pair(kv);
    if (app.count("--seed")) ctx.cfg.set("seed", std::to_string(seed));
    if (app.count("--threads")) ctx.cfg.set("threads", std::to_string(threads));
    const int k = ctx.cfg.integer("threads");
    if (k < 0) throw isp::UsageError("threads must be >= 0");
    if (k > 0) omp_set_num_threads(k);
    for (const auto& [name, fn, help] : cmds) {
      if (app.got_subcommand(name)) {
        ctx.command = name;
        return fn(ctx);
      }
    }
  } catch (const isp::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const isp::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
