#pragma once

#include "isp/util.hpp"

namespace isp::kernels {

// y = G x (length M). Each output is summed in index order, so both variants agree bitwise.
void matvec(const RowMatrix& G, const double* x, double* y, bool parallel);
// y = G^T x (length N).
void matvec_t(const RowMatrix& G, const double* x, double* y, bool parallel);

}  // namespace isp::kernels
