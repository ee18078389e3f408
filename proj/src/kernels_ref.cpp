// Serial reference kernels. Same per-element arithmetic order as the
// OpenMP versions so outputs must match bit for bit.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "anoflow/kernels.hpp"

namespace anoflow::ref {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::memset(ci, 0, n * sizeof(double));
    const double* ai = a + i * k;
    for (std::size_t r = 0; r < k; ++r) {
      const double air = ai[r];
      const double* br = b + r * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += air * br[j];
    }
  }
}

void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double s = 0.0;
      for (std::size_t r = 0; r < k; ++r) s += ai[r] * bj[r];
      ci[j] = accumulate ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::memset(ci, 0, n * sizeof(double));
    for (std::size_t r = 0; r < k; ++r) {
      const double ari = a[r * m + i];
      const double* br = b + r * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
}

void softmax_rows(const double* x, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* xi = x + i * cols;
    double* oi = out + i * cols;
    double mx = xi[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xi[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      denom += oi[j];
    }
    for (std::size_t j = 0; j < cols; ++j) oi[j] /= denom;
  }
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void vtanh(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
}

double sum(const double* x, std::size_t n) {
  constexpr std::size_t kBlock = 4096;
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  if (nblocks <= 1) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::vector<double> partial(nblocks, 0.0);
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    const std::size_t lo = blk * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += x[i];
    partial[blk] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

}  // namespace anoflow::ref
