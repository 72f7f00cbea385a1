// Times the parallel kernels against their serial references and reports
// throughput plus speedup. The two paths must agree bitwise; this harness
// re-checks that on every size it times.
//
// Usage:
//   ./kernel_bench             full sweep
//   ./kernel_bench --smoke     tiny sizes, used as a ctest smoke run

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "memotion/kernels.hpp"
#include "memotion/rng.hpp"

namespace k = memotion::kernels;
using memotion::Rng;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

int g_mismatches = 0;

void report(const char* name, double serial_s, double parallel_s, double gflop,
            bool equal) {
    std::printf("%-28s serial %8.2f ms  parallel %8.2f ms  speedup %5.2fx  %6.2f GFLOP/s  %s\n",
                name, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                gflop / parallel_s, equal ? "bitwise-equal" : "MISMATCH");
    if (!equal) ++g_mismatches;
}

void bench_gemm(int m, int n, int kk, int reps) {
    Rng rng(7);
    std::vector<double> a(static_cast<size_t>(m) * kk), b(static_cast<size_t>(kk) * n);
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    std::vector<double> c_serial(static_cast<size_t>(m) * n), c_par(c_serial.size());

    const double serial = time_best_of(reps, [&] {
        k::gemm_serial(false, false, m, n, kk, 1.0, a.data(), b.data(), 0.0, c_serial.data());
    });
    const double parallel = time_best_of(reps, [&] {
        k::gemm(false, false, m, n, kk, 1.0, a.data(), b.data(), 0.0, c_par.data());
    });
    char name[64];
    std::snprintf(name, sizeof(name), "gemm %dx%dx%d", m, n, kk);
    report(name, serial, parallel, 2.0 * m * n * kk * 1e-9, bitwise_equal(c_serial, c_par));
}

void bench_conv(int c_in, int hw, int c_out, int kernel, int reps) {
    Rng rng(11);
    std::vector<double> in(static_cast<size_t>(c_in) * hw * hw);
    std::vector<double> w(static_cast<size_t>(c_out) * c_in * kernel * kernel);
    for (auto& v : in) v = rng.uniform(-1, 1);
    for (auto& v : w) v = rng.uniform(-1, 1);

    const int pad = kernel / 2;
    const int out_hw = k::conv_out_extent(hw, kernel, 1, pad);
    const int spatial = out_hw * out_hw;
    const int ckk = c_in * kernel * kernel;
    std::vector<double> out_serial(static_cast<size_t>(c_out) * spatial);
    std::vector<double> out_par(out_serial.size());
    std::vector<double> col(static_cast<size_t>(ckk) * spatial);

    const double serial = time_best_of(reps, [&] {
        k::conv2d_serial(in.data(), c_in, hw, hw, w.data(), nullptr, c_out, kernel,
                         kernel, 1, pad, out_serial.data());
    });
    const double parallel = time_best_of(reps, [&] {
        k::im2col(in.data(), c_in, hw, hw, kernel, kernel, 1, pad, col.data());
        k::gemm(false, false, c_out, spatial, ckk, 1.0, w.data(), col.data(), 0.0,
                out_par.data());
    });
    char name[64];
    std::snprintf(name, sizeof(name), "conv %dc %dx%d k%d -> %dc", c_in, hw, hw, kernel, c_out);
    report(name, serial, parallel, 2.0 * c_out * spatial * ckk * 1e-9,
           bitwise_equal(out_serial, out_par));
}

void bench_rowwise(int rows, int cols, int reps) {
    Rng rng(13);
    std::vector<double> x(static_cast<size_t>(rows) * cols), gamma(cols, 1.0), beta(cols, 0.0);
    for (auto& v : x) v = rng.uniform(-2, 2);
    std::vector<double> y_serial(x.size()), y_par(x.size()), mean(rows), inv_std(rows);

    const double serial = time_best_of(reps, [&] {
        k::set_parallel(false);
        k::layernorm(x.data(), rows, cols, gamma.data(), beta.data(), 1e-12,
                     y_serial.data(), mean.data(), inv_std.data());
        k::set_parallel(true);
    });
    const double parallel = time_best_of(reps, [&] {
        k::layernorm(x.data(), rows, cols, gamma.data(), beta.data(), 1e-12,
                     y_par.data(), mean.data(), inv_std.data());
    });
    char name[64];
    std::snprintf(name, sizeof(name), "layernorm %dx%d", rows, cols);
    report(name, serial, parallel, 8.0 * rows * cols * 1e-9, bitwise_equal(y_serial, y_par));
}

}  // namespace

int main(int argc, char** argv) {
    const bool smoke = argc > 1 && std::string(argv[1]) == "--smoke";
    std::printf("threads: %d\n", omp_get_max_threads());

    if (smoke) {
        bench_gemm(64, 64, 64, 3);
        bench_conv(8, 32, 16, 3, 3);
        bench_rowwise(128, 256, 3);
    } else {
        bench_gemm(256, 256, 256, 5);
        bench_gemm(512, 512, 512, 3);
        bench_gemm(768, 768, 768, 3);
        bench_conv(64, 56, 128, 3, 3);
        bench_conv(128, 28, 128, 3, 3);
        bench_conv(3, 224, 64, 7, 3);
        bench_rowwise(4096, 768, 5);
    }
    if (g_mismatches > 0) {
        std::printf("%d kernel mismatches\n", g_mismatches);
        return 1;
    }
    return 0;
}
