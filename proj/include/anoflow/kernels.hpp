#pragma once

#include <cstddef>

namespace anoflow {

// Production kernels, OpenMP-parallel over independent output elements.
// Every kernel computes each output element with a fixed serial reduction
// order, so results are bit-identical to anoflow::ref for any thread count.
namespace kernels {

// global switch; when off the pragmas fall back to one thread
void set_parallel(bool enabled);
bool parallel_enabled();
void set_threads(int n);  // forwards to omp_set_num_threads when built with OpenMP
int thread_count();

// c[m,n] = a[m,k] @ b[k,n]   (+= when accumulate)
void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// c[m,n] = a[m,k] @ b[n,k]^T
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// c[m,n] = a[k,m]^T @ b[k,n]
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// batched variants over leading axis
void bmm_nn(const double* a, const double* b, double* c, std::size_t batch,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void bmm_nt(const double* a, const double* b, double* c, std::size_t batch,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// elementwise forward
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double c, double* out, std::size_t n);
void vexp(const double* a, double* out, std::size_t n);
void vlog(const double* a, double* out, std::size_t n);
void vtanh(const double* a, double* out, std::size_t n);
void vsigmoid(const double* a, double* out, std::size_t n);
void vrelu(const double* a, double* out, std::size_t n);
void vclamp(const double* a, double lo, double hi, double* out, std::size_t n);

// elementwise backward accumulators: dst += ...
void acc(double* dst, const double* g, std::size_t n);
void acc_neg(double* dst, const double* g, std::size_t n);
void acc_scaled(double* dst, const double* g, double c, std::size_t n);
void acc_mul(double* dst, const double* g, const double* other, std::size_t n);
void exp_bwd(double* dst, const double* g, const double* y, std::size_t n);
void log_bwd(double* dst, const double* g, const double* x, std::size_t n);
void tanh_bwd(double* dst, const double* g, const double* y, std::size_t n);
void sigmoid_bwd(double* dst, const double* g, const double* y, std::size_t n);
void relu_bwd(double* dst, const double* g, const double* x, std::size_t n);
void clamp_bwd(double* dst, const double* g, const double* x, double lo, double hi,
               std::size_t n);

// row-wise softmax with max subtraction; x and out are rows*cols
void softmax_rows(const double* x, double* out, std::size_t rows, std::size_t cols);
// dst += dsoftmax given upstream g and forward output y
void softmax_rows_bwd(double* dst, const double* g, const double* y,
                      std::size_t rows, std::size_t cols);

void rowsum(const double* x, double* out, std::size_t rows, std::size_t cols);
void rowsum_bwd(double* dst, const double* g, std::size_t rows, std::size_t cols);
void colsum_acc(double* dst, const double* x, std::size_t rows, std::size_t cols);

// deterministic blocked sum: fixed 4096-element partials combined in order,
// independent of thread count
double sum(const double* x, std::size_t n);

}  // namespace kernels

// Serial reference implementations with identical arithmetic, kept as the
// oracle for the kernel tests and the baseline for the benchmark.
namespace ref {

void matmul_nn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_nt(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_tn(const double* a, const double* b, double* c,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void softmax_rows(const double* x, double* out, std::size_t rows, std::size_t cols);
void mul(const double* a, const double* b, double* out, std::size_t n);
void vtanh(const double* a, double* out, std::size_t n);
double sum(const double* x, std::size_t n);

}  // namespace ref

}  // namespace anoflow
