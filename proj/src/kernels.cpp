#include "anoflow/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace anoflow::kernels {

namespace {
std::atomic<bool> g_parallel{true};

// below this many output elements the parallel region is not worth opening
constexpr std::size_t kGrain = 2048;

bool par(std::size_t work) { return g_parallel.load(std::memory_order_relaxed) && work >= kGrain; }
}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled, std::memory_order_relaxed); }
bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const bool p = par(m * n * k);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
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
  const bool p = par(m * n * k);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
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
  const bool p = par(m * n * k);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::memset(ci, 0, n * sizeof(double));
    for (std::size_t r = 0; r < k; ++r) {
      const double ari = a[r * m + i];
      const double* br = b + r * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
}

void bmm_nn(const double* a, const double* b, double* c, std::size_t batch,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const bool p = par(batch * m * n * k);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(batch); ++s) {
    const double* as = a + s * m * k;
    const double* bs = b + s * k * n;
    double* cs = c + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      double* ci = cs + i * n;
      if (!accumulate) std::memset(ci, 0, n * sizeof(double));
      const double* ai = as + i * k;
      for (std::size_t r = 0; r < k; ++r) {
        const double air = ai[r];
        const double* br = bs + r * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += air * br[j];
      }
    }
  }
}

void bmm_nt(const double* a, const double* b, double* c, std::size_t batch,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const bool p = par(batch * m * n * k);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t s = 0; s < static_cast<std::ptrdiff_t>(batch); ++s) {
    const double* as = a + s * m * k;
    const double* bs = b + s * n * k;
    double* cs = c + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = as + i * k;
      double* ci = cs + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = bs + j * k;
        double v = 0.0;
        for (std::size_t r = 0; r < k; ++r) v += ai[r] * bj[r];
        ci[j] = accumulate ? ci[j] + v : v;
      }
    }
  }
}

#define ANOFLOW_ELEMENTWISE(expr)                                     \
  const bool p = par(n);                                              \
  _Pragma("omp parallel for schedule(static) if (p)")                 \
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) \
    expr;

void add(const double* a, const double* b, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = a[i] + b[i])
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = a[i] - b[i])
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = a[i] * b[i])
}
void scale(const double* a, double c, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = c * a[i])
}
void vexp(const double* a, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = std::exp(a[i]))
}
void vlog(const double* a, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = std::log(a[i]))
}
void vtanh(const double* a, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = std::tanh(a[i]))
}
void vsigmoid(const double* a, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = 1.0 / (1.0 + std::exp(-a[i])))
}
void vrelu(const double* a, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = a[i] > 0.0 ? a[i] : 0.0)
}
void vclamp(const double* a, double lo, double hi, double* out, std::size_t n) {
  ANOFLOW_ELEMENTWISE(out[i] = std::min(hi, std::max(lo, a[i])))
}

void acc(double* dst, const double* g, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i])
}
void acc_neg(double* dst, const double* g, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] -= g[i])
}
void acc_scaled(double* dst, const double* g, double c, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += c * g[i])
}
void acc_mul(double* dst, const double* g, const double* other, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i] * other[i])
}
void exp_bwd(double* dst, const double* g, const double* y, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i] * y[i])
}
void log_bwd(double* dst, const double* g, const double* x, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i] / x[i])
}
void tanh_bwd(double* dst, const double* g, const double* y, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i] * (1.0 - y[i] * y[i]))
}
void sigmoid_bwd(double* dst, const double* g, const double* y, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += g[i] * y[i] * (1.0 - y[i]))
}
void relu_bwd(double* dst, const double* g, const double* x, std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += x[i] > 0.0 ? g[i] : 0.0)
}
void clamp_bwd(double* dst, const double* g, const double* x, double lo, double hi,
               std::size_t n) {
  ANOFLOW_ELEMENTWISE(dst[i] += (x[i] > lo && x[i] < hi) ? g[i] : 0.0)
}

#undef ANOFLOW_ELEMENTWISE

void softmax_rows(const double* x, double* out, std::size_t rows, std::size_t cols) {
  const bool p = par(rows * cols);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
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

void softmax_rows_bwd(double* dst, const double* g, const double* y,
                      std::size_t rows, std::size_t cols) {
  const bool p = par(rows * cols);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    const double* gi = g + i * cols;
    const double* yi = y + i * cols;
    double* di = dst + i * cols;
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += gi[j] * yi[j];
    for (std::size_t j = 0; j < cols; ++j) di[j] += yi[j] * (gi[j] - dot);
  }
}

void rowsum(const double* x, double* out, std::size_t rows, std::size_t cols) {
  const bool p = par(rows * cols);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    const double* xi = x + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += xi[j];
    out[i] = s;
  }
}

void rowsum_bwd(double* dst, const double* g, std::size_t rows, std::size_t cols) {
  const bool p = par(rows * cols);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows); ++i) {
    double* di = dst + i * cols;
    const double gi = g[i];
    for (std::size_t j = 0; j < cols; ++j) di[j] += gi;
  }
}

void colsum_acc(double* dst, const double* x, std::size_t rows, std::size_t cols) {
  const bool p = par(rows * cols);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cols); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += x[i * cols + j];
    dst[j] += s;
  }
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
  const bool p = par(n);
#pragma omp parallel for schedule(static) if (p)
  for (std::ptrdiff_t blk = 0; blk < static_cast<std::ptrdiff_t>(nblocks); ++blk) {
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

}  // namespace anoflow::kernels
