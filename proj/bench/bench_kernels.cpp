#include <benchmark/benchmark.h>

#include "isp/kernels.hpp"
#include "isp/moments.hpp"
#include "isp/sevol.hpp"

namespace {

void BM_matvec(benchmark::State& st) {
  const int M = static_cast<int>(st.range(0)), N = 4 * M;
  const bool par = st.range(1) != 0;
  const isp::RowMatrix G = isp::gaussian_matrix(M, N, 7);
  std::vector<double> x(N, 1.0), y(M);
  for (auto _ : st) {
    isp::kernels::matvec(G, x.data(), y.data(), par);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_matvec)->ArgsProduct({{400, 2000}, {0, 1}});

void BM_matvec_t(benchmark::State& st) {
  const int M = static_cast<int>(st.range(0)), N = 4 * M;
  const bool par = st.range(1) != 0;
  const isp::RowMatrix G = isp::gaussian_matrix(M, N, 7);
  std::vector<double> x(M, 1.0), y(N);
  for (auto _ : st) {
    isp::kernels::matvec_t(G, x.data(), y.data(), par);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_matvec_t)->ArgsProduct({{400, 2000}, {0, 1}});

void BM_enumerate(benchmark::State& st) {
  const int N = static_cast<int>(st.range(0));
  isp::EnumOptions eo;
  eo.parallel = st.range(1) != 0;
  const isp::RowMatrix G = isp::gaussian_matrix(3, N, 11);
  const auto spec = isp::halfspace(0.0);
  for (auto _ : st) benchmark::DoNotOptimize(isp::enumerate_logZ(spec, G, isp::kTauTrunc, eo).count_feasible);
}
BENCHMARK(BM_enumerate)->ArgsProduct({{18, 20}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_q_measure(benchmark::State& st) {
  const auto spec = isp::halfspace(0.0);
  static const isp::RsSolution sol = isp::solve_fixed_point(spec, 0.01);
  static const isp::SeTrace se = isp::se_run(spec, sol, 10, 0.0);
  static const isp::AmpTrace tr = isp::amp_run(spec, sol, se, 2000, 4, 3);
  const bool par = st.range(0) != 0;
  for (auto _ : st) {
    double acc = 0;
    isp::q_measure_for_each(tr, 2000, 5, [&](int, const std::vector<double>& J) {
      if (J[0] > 0) {
#pragma omp atomic
        acc += 1;
      }
    }, par);
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(BM_q_measure)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
