#include "nnlab/kernels.hpp"

#include <cmath>

// Reference implementations. The OpenMP backend in kernels_omp.cpp mirrors
// these loop bodies exactly; tests assert bitwise-equal outputs.

namespace nnlab::kernels::serial {

namespace {
constexpr std::size_t kSumChunk = 4096;
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k,
          const double* a, const double* b, double* c) {
    if (!trans_a && !trans_b) {
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
        // b stored [n, k]
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
        // a stored [k, m]
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
        // a stored [k, m], b stored [n, k]
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
    // Fixed-size chunks; partials combined in chunk order. The parallel
    // backend shares this chunking, so both sum in the same association.
    const std::size_t nchunks = (n + kSumChunk - 1) / kSumChunk;
    double total = 0.0;
    for (std::size_t c = 0; c < nchunks; ++c) {
        const std::size_t lo = c * kSumChunk;
        const std::size_t hi = lo + kSumChunk < n ? lo + kSumChunk : n;
        double part = 0.0;
        for (std::size_t i = lo; i < hi; ++i) part += x[i];
        total += part;
    }
    return total;
}

void rowwise_abs_sum(const double* x, std::size_t rows, std::size_t cols, double* out) {
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = x + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += std::fabs(row[c]);
        out[r] = acc;
    }
}

} // namespace nnlab::kernels::serial
