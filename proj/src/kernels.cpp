#include "isp/kernels.hpp"

#include <algorithm>

namespace isp::kernels {

void matvec(const RowMatrix& G, const double* x, double* y, bool parallel) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  const double* g = G.data();
#pragma omp parallel for schedule(static) if (parallel)
  for (int a = 0; a < M; ++a) {
    const double* row = g + static_cast<std::ptrdiff_t>(a) * N;
    double s = 0.0;
    for (int i = 0; i < N; ++i) s += row[i] * x[i];
    y[a] = s;
  }
}

void matvec_t(const RowMatrix& G, const double* x, double* y, bool parallel) {
  const int M = static_cast<int>(G.rows()), N = static_cast<int>(G.cols());
  const double* g = G.data();
  constexpr int kBlock = 512;
  const int nblocks = (N + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (parallel)
  for (int b = 0; b < nblocks; ++b) {
    const int i0 = b * kBlock, i1 = std::min(N, i0 + kBlock);
    for (int i = i0; i < i1; ++i) y[i] = 0.0;
    for (int a = 0; a < M; ++a) {
      const double* row = g + static_cast<std::ptrdiff_t>(a) * N;
      const double xa = x[a];
      for (int i = i0; i < i1; ++i) y[i] += row[i] * xa;
    }
  }
}

}  // namespace isp::kernels
