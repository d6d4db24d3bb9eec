#include "isp/util.hpp"

#include <cstdio>
#include <iostream>
#include <set>

namespace isp {

namespace {
std::mutex g_warn_mu;
std::set<std::string>& warned() {
  static std::set<std::string> s;
  return s;
}
}  // namespace

void warn_once(const std::string& msg) {
  std::lock_guard<std::mutex> lk(g_warn_mu);
  if (warned().insert(msg).second) std::cerr << "warning: " << msg << '\n';
}

int warning_count() {
  std::lock_guard<std::mutex> lk(g_warn_mu);
  return static_cast<int>(warned().size());
}

Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Engine(seq);
}

RowMatrix gaussian_matrix(int M, int N, std::uint64_t seed, std::uint64_t stream) {
  Engine eng = make_engine(seed, stream);
  std::normal_distribution<double> nd;
  RowMatrix G(M, N);
  for (int a = 0; a < M; ++a)
    for (int i = 0; i < N; ++i) G(a, i) = nd(eng);
  return G;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace isp
