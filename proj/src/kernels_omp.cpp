#include "nnlab/kernels.hpp"

#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

// OpenMP backend. Loop bodies mirror kernels_serial.cpp; each output element
// is written by exactly one iteration, so results are bitwise-identical to
// the serial reference for any thread count. Small problems skip the
// parallel region entirely.

namespace nnlab::kernels::par {

namespace {
constexpr std::size_t kSumChunk = 4096;
constexpr long long kParThreshold = 1 << 15; // flop-ish count below which omp overhead dominates
}

#ifndef _OPENMP

void gemm(bool ta, bool tb, int m, int n, int k, const double* a, const double* b, double* c) {
    serial::gemm(ta, tb, m, n, k, a, b, c);
}
void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y) {
    serial::conv2d_fwd(d, x, w, y);
}
void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx) {
    serial::conv2d_dx(d, dy, w, dx);
}
void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw) {
    serial::conv2d_dw(d, x, dy, dw);
}
void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y) {
    serial::tconv2d_fwd(d, x, w, y);
}
void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx) {
    serial::tconv2d_dx(d, dy, w, dx);
}
void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw) {
    serial::tconv2d_dw(d, x, dy, dw);
}
double reduce_sum(const double* x, std::size_t n) { return serial::reduce_sum(x, n); }
void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out) {
    serial::rowwise_abs_sum(x, rows, cols, out);
}

#else

void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double* c) {
    if (static_cast<long long>(m) * n * k < kParThreshold || m == 1) {
        serial::gemm(trans_a, trans_b, m, n, k, a, b, c);
        return;
    }
    if (!trans_a && !trans_b) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] = 0.0;
            for (int l = 0; l < k; ++l) {
                const double av = a[static_cast<std::size_t>(i) * k + l];
                const double* brow = b + static_cast<std::size_t>(l) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            const double* arow = a + static_cast<std::size_t>(i) * k;
            for (int j = 0; j < n; ++j) {
                const double* brow = b + static_cast<std::size_t>(j) * k;
                double acc = 0.0;
                for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
                c[static_cast<std::size_t>(i) * n + j] = acc;
            }
        }
    } else if (trans_a && !trans_b) {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            double* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] = 0.0;
            for (int l = 0; l < k; ++l) {
                const double av = a[static_cast<std::size_t>(l) * m + i];
                const double* brow = b + static_cast<std::size_t>(l) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int l = 0; l < k; ++l)
                    acc += a[static_cast<std::size_t>(l) * m + i] *
                           b[static_cast<std::size_t>(j) * k + l];
                c[static_cast<std::size_t>(i) * n + j] = acc;
            }
        }
    }
}

void conv2d_fwd(const Conv2dDims& d, const double* x, const double* w, double* y) {
    const long long work = static_cast<long long>(d.n) * d.cout * d.hout * d.wout * d.cin * d.k * d.k;
    if (work < kParThreshold) {
        serial::conv2d_fwd(d, x, w, y);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int co = 0; co < d.cout; ++co) {
            for (int oh = 0; oh < d.hout; ++oh) {
                for (int ow = 0; ow < d.wout; ++ow) {
                    double acc = 0.0;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        for (int i = 0; i < d.k; ++i) {
                            const int h = oh * d.stride - d.pad + i;
                            if (h < 0 || h >= d.h) continue;
                            for (int j = 0; j < d.k; ++j) {
                                const int wx = ow * d.stride - d.pad + j;
                                if (wx < 0 || wx >= d.w) continue;
                                acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] *
                                       w[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + i) * d.k + j];
                            }
                        }
                    }
                    y[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow] = acc;
                }
            }
        }
    }
}

void conv2d_dx(const Conv2dDims& d, const double* dy, const double* w, double* dx) {
    const long long work = static_cast<long long>(d.n) * d.cin * d.h * d.w * d.cout * d.k * d.k;
    if (work < kParThreshold) {
        serial::conv2d_dx(d, dy, w, dx);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int ci = 0; ci < d.cin; ++ci) {
            for (int h = 0; h < d.h; ++h) {
                for (int wx = 0; wx < d.w; ++wx) {
                    double acc = 0.0;
                    for (int co = 0; co < d.cout; ++co) {
                        for (int i = 0; i < d.k; ++i) {
                            const int ohs = h + d.pad - i;
                            if (ohs < 0 || ohs % d.stride != 0) continue;
                            const int oh = ohs / d.stride;
                            if (oh >= d.hout) continue;
                            for (int j = 0; j < d.k; ++j) {
                                const int ows = wx + d.pad - j;
                                if (ows < 0 || ows % d.stride != 0) continue;
                                const int ow = ows / d.stride;
                                if (ow >= d.wout) continue;
                                acc += dy[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow] *
                                       w[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + i) * d.k + j];
                            }
                        }
                    }
                    dx[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] = acc;
                }
            }
        }
    }
}

void conv2d_dw(const Conv2dDims& d, const double* x, const double* dy, double* dw) {
    const long long work = static_cast<long long>(d.cout) * d.cin * d.k * d.k * d.n * d.hout * d.wout;
    if (work < kParThreshold) {
        serial::conv2d_dw(d, x, dy, dw);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int co = 0; co < d.cout; ++co) {
        for (int ci = 0; ci < d.cin; ++ci) {
            for (int i = 0; i < d.k; ++i) {
                for (int j = 0; j < d.k; ++j) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n) {
                        for (int oh = 0; oh < d.hout; ++oh) {
                            const int h = oh * d.stride - d.pad + i;
                            if (h < 0 || h >= d.h) continue;
                            for (int ow = 0; ow < d.wout; ++ow) {
                                const int wx = ow * d.stride - d.pad + j;
                                if (wx < 0 || wx >= d.w) continue;
                                acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] *
                                       dy[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow];
                            }
                        }
                    }
                    dw[((static_cast<std::size_t>(co) * d.cin + ci) * d.k + i) * d.k + j] = acc;
                }
            }
        }
    }
}

void tconv2d_fwd(const TConv2dDims& d, const double* x, const double* w, double* y) {
    const long long work = static_cast<long long>(d.n) * d.cout * d.hout * d.wout * d.cin * d.k * d.k;
    if (work < kParThreshold) {
        serial::tconv2d_fwd(d, x, w, y);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int co = 0; co < d.cout; ++co) {
            for (int oh = 0; oh < d.hout; ++oh) {
                for (int ow = 0; ow < d.wout; ++ow) {
                    double acc = 0.0;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        for (int i = 0; i < d.k; ++i) {
                            const int hs = oh + d.pad - i;
                            if (hs < 0 || hs % d.stride != 0) continue;
                            const int h = hs / d.stride;
                            if (h >= d.h) continue;
                            for (int j = 0; j < d.k; ++j) {
                                const int ws = ow + d.pad - j;
                                if (ws < 0 || ws % d.stride != 0) continue;
                                const int wx = ws / d.stride;
                                if (wx >= d.w) continue;
                                acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] *
                                       w[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + i) * d.k + j];
                            }
                        }
                    }
                    y[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow] = acc;
                }
            }
        }
    }
}

void tconv2d_dx(const TConv2dDims& d, const double* dy, const double* w, double* dx) {
    const long long work = static_cast<long long>(d.n) * d.cin * d.h * d.w * d.cout * d.k * d.k;
    if (work < kParThreshold) {
        serial::tconv2d_dx(d, dy, w, dx);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.n; ++n) {
        for (int ci = 0; ci < d.cin; ++ci) {
            for (int h = 0; h < d.h; ++h) {
                for (int wx = 0; wx < d.w; ++wx) {
                    double acc = 0.0;
                    for (int co = 0; co < d.cout; ++co) {
                        for (int i = 0; i < d.k; ++i) {
                            const int oh = h * d.stride - d.pad + i;
                            if (oh < 0 || oh >= d.hout) continue;
                            for (int j = 0; j < d.k; ++j) {
                                const int ow = wx * d.stride - d.pad + j;
                                if (ow < 0 || ow >= d.wout) continue;
                                acc += dy[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow] *
                                       w[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + i) * d.k + j];
                            }
                        }
                    }
                    dx[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] = acc;
                }
            }
        }
    }
}

void tconv2d_dw(const TConv2dDims& d, const double* x, const double* dy, double* dw) {
    const long long work = static_cast<long long>(d.cin) * d.cout * d.k * d.k * d.n * d.h * d.w;
    if (work < kParThreshold) {
        serial::tconv2d_dw(d, x, dy, dw);
        return;
    }
#pragma omp parallel for collapse(2) schedule(static)
    for (int ci = 0; ci < d.cin; ++ci) {
        for (int co = 0; co < d.cout; ++co) {
            for (int i = 0; i < d.k; ++i) {
                for (int j = 0; j < d.k; ++j) {
                    double acc = 0.0;
                    for (int n = 0; n < d.n; ++n) {
                        for (int h = 0; h < d.h; ++h) {
                            const int oh = h * d.stride - d.pad + i;
                            if (oh < 0 || oh >= d.hout) continue;
                            for (int wx = 0; wx < d.w; ++wx) {
                                const int ow = wx * d.stride - d.pad + j;
                                if (ow < 0 || ow >= d.wout) continue;
                                acc += x[((static_cast<std::size_t>(n) * d.cin + ci) * d.h + h) * d.w + wx] *
                                       dy[((static_cast<std::size_t>(n) * d.cout + co) * d.hout + oh) * d.wout + ow];
                            }
                        }
                    }
                    dw[((static_cast<std::size_t>(ci) * d.cout + co) * d.k + i) * d.k + j] = acc;
                }
            }
        }
    }
}

double reduce_sum(const double* x, std::size_t n) {
    const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
    if (nchunks < 2) return serial::reduce_sum(x, n);
    std::vector<double> partials(nchunks);
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kSumChunk;
        const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
        double part = 0.0;
        for (std::size_t i = lo; i < hi; ++i) part += x[i];
        partials[static_cast<std::size_t>(c)] = part;
    }
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out) {
    if (rows * cols < static_cast<std::size_t>(kParThreshold)) {
        serial::rowwise_abs_sum(x, rows, cols, out);
        return;
    }
#pragma omp parallel for schedule(static)
    for (long long r = 0; r < static_cast<long long>(rows); ++r) {
        double acc = 0.0;
        const double* row = x + static_cast<std::size_t>(r) * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += std::fabs(row[c]);
        out[static_cast<std::size_t>(r)] = acc;
    }
}

#endif // _OPENMP

} // namespace nnlab::kernels::par
