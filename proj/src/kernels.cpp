#include "nnlab/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nnlab::kernels {

namespace {
std::atomic<Backend> g_backend{parallel_available() ? Backend::Parallel : Backend::Serial};
}

bool parallel_available() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    if (b == Backend::Parallel && !parallel_available()) b = Backend::Serial;
    g_backend.store(b, std::memory_order_relaxed);
}

#define NNLAB_DISPATCH(call)                        \
    if (backend() == Backend::Parallel) par::call;  \
    else serial::call

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c) {
    NNLAB_DISPATCH(gemm(ta, tb, m, n, k, a, b, c));
}
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y) {
    NNLAB_DISPATCH(conv2d_fwd(d, x, w, y));
}
void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx) {
    NNLAB_DISPATCH(conv2d_dx(d, dy, w, dx));
}
void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw) {
    NNLAB_DISPATCH(conv2d_dw(d, x, dy, dw));
}
void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y) {
    NNLAB_DISPATCH(tconv2d_fwd(d, x, w, y));
}
void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx) {
    NNLAB_DISPATCH(tconv2d_dx(d, dy, w, dx));
}
void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw) {
    NNLAB_DISPATCH(tconv2d_dw(d, x, dy, dw));
}
double reduce_sum(const double* x, std::size_t n) {
    if (backend() == Backend::Parallel) return par::reduce_sum(x, n);
    return serial::reduce_sum(x, n);
}
void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out) {
    NNLAB_DISPATCH(rowwise_abs_sum(x, rows, cols, out));
}

#undef NNLAB_DISPATCH

} // namespace nnlab::kernels
