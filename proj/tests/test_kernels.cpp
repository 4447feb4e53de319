#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "nnlab/kernels.hpp"
#include "nnlab/rng.hpp"

using namespace nnlab;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

} // namespace

TEST_CASE("gemm: serial and parallel backends agree bitwise") {
    for (std::uint64_t trial = 0; trial < 8; ++trial) {
        Rng rng(mix64(100, trial));
        const int m = 1 + rng.below(40), n = 1 + rng.below(40), k = 1 + rng.below(40);
        const auto a = random_vec(static_cast<std::size_t>(m) * k, mix64(1, trial));
        const auto b = random_vec(static_cast<std::size_t>(k) * n, mix64(2, trial));
        for (bool ta : {false, true}) {
            for (bool tb : {false, true}) {
                std::vector<double> cs(static_cast<std::size_t>(m) * n), cp(cs.size());
                kernels::serial::gemm(ta, tb, m, n, k, a.data(), b.data(), cs.data());
                kernels::par::gemm(ta, tb, m, n, k, a.data(), b.data(), cp.data());
                CHECK(bitwise_equal(cs, cp));
            }
        }
    }
}

TEST_CASE("gemm: matches a naive triple loop") {
    const int m = 7, n = 5, k = 9;
    const auto a = random_vec(static_cast<std::size_t>(m) * k, 11);
    const auto b = random_vec(static_cast<std::size_t>(k) * n, 12);
    std::vector<double> c(static_cast<std::size_t>(m) * n);
    kernels::serial::gemm(false, false, m, n, k, a.data(), b.data(), c.data());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int l = 0; l < k; ++l)
                acc += a[static_cast<std::size_t>(i) * k + l] * b[static_cast<std::size_t>(l) * n + j];
            CHECK(c[static_cast<std::size_t>(i) * n + j] == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("conv2d forward: 2x2 all-ones kernel produces window sums") {
    // input 1x1x3x3 = 1..9; expected sums computed by hand before the build
    kernels::Conv2dDims d{1, 1, 3, 3, 1, 2, 1, 0, 2, 2};
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    const std::vector<double> w = {1, 1, 1, 1};
    std::vector<double> y(4);
    kernels::serial::conv2d_fwd(d, x.data(), w.data(), y.data());
    CHECK(y[0] == 12.0); // 1+2+4+5
    CHECK(y[1] == 16.0); // 2+3+5+6
    CHECK(y[2] == 24.0); // 4+5+7+8
    CHECK(y[3] == 28.0); // 5+6+8+9
}

TEST_CASE("conv/tconv kernels: serial and parallel agree bitwise") {
    for (std::uint64_t trial = 0; trial < 4; ++trial) {
        Rng rng(mix64(7, trial));
        kernels::Conv2dDims d{};
        d.n = 1 + rng.below(3);
        d.cin = 1 + rng.below(3);
        d.h = 5 + rng.below(6);
        d.w = 5 + rng.below(6);
        d.cout = 1 + rng.below(4);
        d.k = 2 + rng.below(3);
        d.stride = 1 + rng.below(2);
        d.pad = rng.below(2);
        d.hout = (d.h + 2 * d.pad - d.k) / d.stride + 1;
        d.wout = (d.w + 2 * d.pad - d.k) / d.stride + 1;

        const auto x = random_vec(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, mix64(21, trial));
        const auto w = random_vec(static_cast<std::size_t>(d.cout) * d.cin * d.k * d.k, mix64(22, trial));
        const auto dy = random_vec(static_cast<std::size_t>(d.n) * d.cout * d.hout * d.wout,
                                   mix64(23, trial));

        std::vector<double> ys(dy.size()), yp(dy.size());
        kernels::serial::conv2d_fwd(d, x.data(), w.data(), ys.data());
        kernels::par::conv2d_fwd(d, x.data(), w.data(), yp.data());
        CHECK(bitwise_equal(ys, yp));

        std::vector<double> dxs(x.size()), dxp(x.size());
        kernels::serial::conv2d_dx(d, dy.data(), w.data(), dxs.data());
        kernels::par::conv2d_dx(d, dy.data(), w.data(), dxp.data());
        CHECK(bitwise_equal(dxs, dxp));

        std::vector<double> dws(w.size()), dwp(w.size());
        kernels::serial::conv2d_dw(d, x.data(), dy.data(), dws.data());
        kernels::par::conv2d_dw(d, x.data(), dy.data(), dwp.data());
        CHECK(bitwise_equal(dws, dwp));

        kernels::TConv2dDims t{};
        t.n = d.n;
        t.cin = d.cin;
        t.h = d.h;
        t.w = d.w;
        t.cout = d.cout;
        t.k = d.k;
        t.stride = d.stride;
        t.pad = 0;
        t.hout = (t.h - 1) * t.stride + t.k;
        t.wout = (t.w - 1) * t.stride + t.k;
        const auto tw = random_vec(static_cast<std::size_t>(t.cin) * t.cout * t.k * t.k,
                                   mix64(24, trial));
        const auto tdy = random_vec(static_cast<std::size_t>(t.n) * t.cout * t.hout * t.wout,
                                    mix64(25, trial));
        std::vector<double> tys(tdy.size()), typ(tdy.size());
        kernels::serial::tconv2d_fwd(t, x.data(), tw.data(), tys.data());
        kernels::par::tconv2d_fwd(t, x.data(), tw.data(), typ.data());
        CHECK(bitwise_equal(tys, typ));

        std::vector<double> tdxs(x.size()), tdxp(x.size());
        kernels::serial::tconv2d_dx(t, tdy.data(), tw.data(), tdxs.data());
        kernels::par::tconv2d_dx(t, tdy.data(), tw.data(), tdxp.data());
        CHECK(bitwise_equal(tdxs, tdxp));

        std::vector<double> tdws(tw.size()), tdwp(tw.size());
        kernels::serial::tconv2d_dw(t, x.data(), tdy.data(), tdws.data());
        kernels::par::tconv2d_dw(t, x.data(), tdy.data(), tdwp.data());
        CHECK(bitwise_equal(tdws, tdwp));
    }
}

TEST_CASE("reduce_sum: backends agree bitwise and match a compensated reference") {
    for (std::size_t n : {1UL, 100UL, 4096UL, 5000UL, 20000UL}) {
        const auto x = random_vec(n, n);
        const double s = kernels::serial::reduce_sum(x.data(), n);
        const double p = kernels::par::reduce_sum(x.data(), n);
        CHECK(s == p);
        long double ref = 0.0L;
        for (double v : x) ref += static_cast<long double>(v);
        CHECK(s == doctest::Approx(static_cast<double>(ref)).epsilon(1e-12));
    }
}

TEST_CASE("rowwise_abs_sum: backends agree bitwise") {
    const std::size_t rows = 300, cols = 200;
    const auto x = random_vec(rows * cols, 99);
    std::vector<double> a(rows), b(rows);
    kernels::serial::rowwise_abs_sum(x.data(), rows, cols, a.data());
    kernels::par::rowwise_abs_sum(x.data(), rows, cols, b.data());
    CHECK(bitwise_equal(a, b));
    double manual = 0.0;
    for (std::size_t c = 0; c < cols; ++c) manual += std::fabs(x[c]);
    CHECK(a[0] == doctest::Approx(manual).epsilon(1e-12));
}

TEST_CASE("backend dispatch is switchable and restores") {
    const auto prev = kernels::backend();
    kernels::set_backend(kernels::Backend::Serial);
    CHECK(kernels::backend() == kernels::Backend::Serial);
    kernels::set_backend(prev);
}
