#pragma once

#include <cstddef>

namespace nnlab::kernels {

// The parallel backend must produce bitwise-identical results to the serial
// reference: every output element is owned by exactly one loop iteration and
// reductions use fixed chunk boundaries independent of the thread count.
enum class Backend { Serial, Parallel };

Backend backend();
void set_backend(Backend b);
bool parallel_available();
int thread_count();

struct Conv2dDims {
    int n, cin, h, w;   // input  [n, cin, h, w]
    int cout, k;        // kernel [cout, cin, k, k]
    int stride, pad;
    int hout, wout;     // output [n, cout, hout, wout]
};

struct TConv2dDims {
    int n, cin, h, w;   // input  [n, cin, h, w]
    int cout, k;        // kernel [cin, cout, k, k]
    int stride, pad;
    int hout, wout;     // output [n, cout, hout, wout], hout = (h-1)*stride - 2*pad + k
};

// C [m,n] = op(A) [m,k] * op(B) [k,n], row-major, overwriting C.
// trans_a / trans_b select the transposed reading of the stored matrix.
namespace serial {
void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double* c);
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y);
void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx);
void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw);
void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y);
void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx);
void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw);
double reduce_sum(const double* x, std::size_t n);
void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out);
} // namespace serial

namespace par {
void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double* c);
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y);
void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx);
void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw);
void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y);
void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx);
void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw);
double reduce_sum(const double* x, std::size_t n);
void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out);
} // namespace par

// Dispatch on the active backend.
void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double* c);
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y);
void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx);
void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw);
void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y);
void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx);
void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw);
double reduce_sum(const double* x, std::size_t n);
void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out);

} // namespace nnlab::kernels
