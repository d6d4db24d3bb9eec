#pragma once

#include <string>

#include "config.hpp"

namespace ispcli {

struct Context {
  Config cfg;
  std::string out_dir;  // empty: stdout
  std::string command;
};

int cmd_rs(Context& ctx);
int cmd_se(Context& ctx);
int cmd_amp(Context& ctx);
int cmd_psi(Context& ctx);
int cmd_pair(Context& ctx);
int cmd_enumerate(Context& ctx);
int cmd_constants(Context& ctx);
int cmd_sweep(Context& ctx);

}  // namespace ispcli
