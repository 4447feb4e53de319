// Times the serial reference against the OpenMP backend for every kernel
// the training path leans on.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "nnlab/kernels.hpp"
#include "nnlab/rng.hpp"

using namespace nnlab;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double time_of(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
}

void report(const char* name, double serial_s, double par_s) {
    std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_s * 1e3, par_s * 1e3,
                serial_s / par_s);
}

} // namespace

int main() {
    std::printf("threads: %d (parallel backend %savailable)\n\n", kernels::thread_count(),
                kernels::parallel_available() ? "" : "NOT ");
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

    {
        const int m = 512, n = 512, k = 512;
        const auto a = random_vec(static_cast<std::size_t>(m) * k, 1);
        const auto b = random_vec(static_cast<std::size_t>(k) * n, 2);
        std::vector<double> c(static_cast<std::size_t>(m) * n);
        report("gemm 512x512x512",
               time_of([&] { kernels::serial::gemm(false, false, m, n, k, a.data(), b.data(), c.data()); }, 3),
               time_of([&] { kernels::par::gemm(false, false, m, n, k, a.data(), b.data(), c.data()); }, 3));
    }
    {
        kernels::Conv2dDims d{16, 8, 32, 32, 16, 3, 1, 1, 32, 32};
        const auto x = random_vec(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, 3);
        const auto w = random_vec(static_cast<std::size_t>(d.cout) * d.cin * d.k * d.k, 4);
        std::vector<double> y(static_cast<std::size_t>(d.n) * d.cout * d.hout * d.wout);
        report("conv2d fwd 16x8x32x32",
               time_of([&] { kernels::serial::conv2d_fwd(d, x.data(), w.data(), y.data()); }, 3),
               time_of([&] { kernels::par::conv2d_fwd(d, x.data(), w.data(), y.data()); }, 3));
        std::vector<double> dx(x.size());
        report("conv2d dx",
               time_of([&] { kernels::serial::conv2d_dx(d, y.data(), w.data(), dx.data()); }, 3),
               time_of([&] { kernels::par::conv2d_dx(d, y.data(), w.data(), dx.data()); }, 3));
        std::vector<double> dw(w.size());
        report("conv2d dw",
               time_of([&] { kernels::serial::conv2d_dw(d, x.data(), y.data(), dw.data()); }, 3),
               time_of([&] { kernels::par::conv2d_dw(d, x.data(), y.data(), dw.data()); }, 3));
    }
    {
        kernels::TConv2dDims d{16, 16, 8, 8, 8, 4, 2, 1, 16, 16};
        const auto x = random_vec(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, 5);
        const auto w = random_vec(static_cast<std::size_t>(d.cin) * d.cout * d.k * d.k, 6);
        std::vector<double> y(static_cast<std::size_t>(d.n) * d.cout * d.hout * d.wout);
        report("tconv2d fwd 16x16x8x8",
               time_of([&] { kernels::serial::tconv2d_fwd(d, x.data(), w.data(), y.data()); }, 5),
               time_of([&] { kernels::par::tconv2d_fwd(d, x.data(), w.data(), y.data()); }, 5));
    }
    {
        const std::size_t n = 1 << 22;
        const auto x = random_vec(n, 7);
        report("reduce_sum 4M",
               time_of([&] { (void)kernels::serial::reduce_sum(x.data(), n); }, 10),
               time_of([&] { (void)kernels::par::reduce_sum(x.data(), n); }, 10));
        std::vector<double> rows(1024);
        report("rowwise_abs_sum 1024x4096",
               time_of([&] { kernels::serial::rowwise_abs_sum(x.data(), 1024, 4096, rows.data()); }, 10),
               time_of([&] { kernels::par::rowwise_abs_sum(x.data(), 1024, 4096, rows.data()); }, 10));
    }
    return 0;
}
