// Timing comparison of the serial reference kernels against the
// dispatching OpenMP versions on the model's hot shapes.

#include <chrono>
#include <cstdio>
#include <vector>

#include "esg/kernels.hpp"
#include "esg/rng.hpp"

namespace ker = esg::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, esg::counter_rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.next_real(-1.0, 1.0);
    }
    return v;
}

template <class F>
double time_ms(F&& f, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) {
        f();
    }
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double flops, double serial_ms,
            double parallel_ms) {
    std::printf("%-28s %10.3f ms %10.3f ms   speedup %5.2fx   %7.2f GFLOP/s\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                flops / (parallel_ms * 1e6));
}

}  // namespace

int main() {
    esg::counter_rng rng(7, 0);
    std::printf("threads: %d\n", ker::hardware_threads());
    std::printf("%-28s %13s %13s\n", "kernel", "serial", "openmp");

    {
        const int m = 512, n = 512;
        auto w = random_vec(static_cast<std::size_t>(m) * n, rng);
        auto b = random_vec(m, rng);
        auto x = random_vec(n, rng);
        std::vector<double> y(m);
        int reps = 2000;
        double s = time_ms(
            [&] { ker::serial::matvec(w.data(), b.data(), x.data(), y.data(), m, n); },
            reps);
        ker::set_parallel_threshold(1);
        double p = time_ms(
            [&] { ker::matvec(w.data(), b.data(), x.data(), y.data(), m, n); },
            reps);
        report("matvec 512x512", 2.0 * m * n, s, p);
    }
    {
        const int t = 40, n = 1536, m = 512;
        auto x = random_vec(static_cast<std::size_t>(t) * n, rng);
        auto w = random_vec(static_cast<std::size_t>(m) * n, rng);
        auto b = random_vec(m, rng);
        std::vector<double> y(static_cast<std::size_t>(t) * m);
        int reps = 50;
        ker::set_parallel_threshold(1L << 62);
        double s = time_ms(
            [&] {
                ker::linear_rows(x.data(), w.data(), b.data(), y.data(), t, n, m);
            },
            reps);
        ker::set_parallel_threshold(1);
        double p = time_ms(
            [&] {
                ker::linear_rows(x.data(), w.data(), b.data(), y.data(), t, n, m);
            },
            reps);
        report("linear_rows 40x1536->512", 2.0 * t * n * m, s, p);
    }
    {
        const int t = 40, n = 1536, m = 512;
        auto dy = random_vec(static_cast<std::size_t>(t) * m, rng);
        auto x = random_vec(static_cast<std::size_t>(t) * n, rng);
        std::vector<double> dw(static_cast<std::size_t>(m) * n, 0.0);
        std::vector<double> db(m, 0.0);
        int reps = 50;
        ker::set_parallel_threshold(1L << 62);
        double s = time_ms(
            [&] {
                ker::linear_rows_dw(dy.data(), x.data(), dw.data(), db.data(),
                                    t, n, m);
            },
            reps);
        ker::set_parallel_threshold(1);
        double p = time_ms(
            [&] {
                ker::linear_rows_dw(dy.data(), x.data(), dw.data(), db.data(),
                                    t, n, m);
            },
            reps);
        report("linear_rows_dw", 2.0 * t * n * m, s, p);
    }
    {
        const int n = 1 << 20;
        auto x = random_vec(n, rng);
        std::vector<double> y(n);
        int reps = 100;
        ker::set_parallel_threshold(1L << 62);
        double s = time_ms(
            [&] { ker::unary(ker::unary_op::tanh_fn, x.data(), y.data(), n); },
            reps);
        ker::set_parallel_threshold(1);
        double p = time_ms(
            [&] { ker::unary(ker::unary_op::tanh_fn, x.data(), y.data(), n); },
            reps);
        report("tanh 1M", static_cast<double>(n), s, p);
    }
    return 0;
}
