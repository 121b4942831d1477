#include "esg/kernels.hpp"
#include <algorithm>

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace esg::kernels {

namespace {

long g_parallel_threshold = 1 << 21;

// Eight fixed accumulator lanes so the reduction vectorizes without
// reassociation; the summation tree is identical on every path, which
// keeps serial and parallel results bit-equal.
inline double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
    int i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
        s4 += a[i + 4] * b[i + 4];
        s5 += a[i + 5] * b[i + 5];
        s6 += a[i + 6] * b[i + 6];
        s7 += a[i + 7] * b[i + 7];
    }
    for (; i < n; ++i) {
        s0 += a[i] * b[i];
    }
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7));
}

constexpr int kColBlock = 256;

// dx[j0..j1) += sum_i w[i][j] dy[i], one pass over the w rows with a
// register/L1 accumulator block
inline void wt_dy_block(const double* w, const double* dy, double* dx,
                        int m, int n, int j0, int j1) {
    double acc[kColBlock];
    int bw = j1 - j0;
    for (int j = 0; j < bw; ++j) {
        acc[j] = 0.0;
    }
    for (int i = 0; i < m; ++i) {
        const double* row = w + static_cast<long>(i) * n + j0;
        double g = dy[i];
        for (int j = 0; j < bw; ++j) {
            acc[j] += g * row[j];
        }
    }
    for (int j = 0; j < bw; ++j) {
        dx[j0 + j] += acc[j];
    }
}

inline double apply_unary(unary_op op, double x) {
    switch (op) {
        case unary_op::sigmoid:
            return 1.0 / (1.0 + std::exp(-x));
        case unary_op::tanh_fn:
            return std::tanh(x);
        case unary_op::relu:
            return x > 0.0 ? x : 0.0;
    }
    return 0.0;
}

inline double apply_unary_grad(unary_op op, double y) {
    switch (op) {
        case unary_op::sigmoid:
            return y * (1.0 - y);
        case unary_op::tanh_fn:
            return 1.0 - y * y;
        case unary_op::relu:
            return y > 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

}  // namespace

long parallel_threshold() { return g_parallel_threshold; }

void set_parallel_threshold(long flops) { g_parallel_threshold = flops; }

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace serial {

void matvec(const double* w, const double* b, const double* x, double* y,
            int m, int n) {
    for (int i = 0; i < m; ++i) {
        y[i] = (b ? b[i] : 0.0) + dot(w + static_cast<long>(i) * n, x, n);
    }
}

void matvec_t_acc(const double* w, const double* dy, double* dx, int m,
                  int n) {
    for (int j0 = 0; j0 < n; j0 += kColBlock) {
        wt_dy_block(w, dy, dx, m, n, j0, std::min(n, j0 + kColBlock));
    }
}

void outer_acc(double* dw, double* db, const double* dy, const double* x,
               int m, int n) {
    for (int i = 0; i < m; ++i) {
        double g = dy[i];
        double* row = dw + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) {
            row[j] += g * x[j];
        }
        if (db) {
            db[i] += g;
        }
    }
}

void linear_rows(const double* x, const double* w, const double* b,
                 double* y, int t, int n, int m) {
    for (int r = 0; r < t; ++r) {
        matvec(w, b, x + static_cast<long>(r) * n, y + static_cast<long>(r) * m,
               m, n);
    }
}

void linear_rows_dx(const double* dy, const double* w, double* dx, int t,
                    int n, int m) {
    for (int r = 0; r < t; ++r) {
        matvec_t_acc(w, dy + static_cast<long>(r) * m,
                     dx + static_cast<long>(r) * n, m, n);
    }
}

void linear_rows_dw(const double* dy, const double* x, double* dw,
                    double* db, int t, int n, int m) {
    for (int i = 0; i < m; ++i) {
        double* row = dw + static_cast<long>(i) * n;
        double bs = 0.0;
        for (int r = 0; r < t; ++r) {
            double g = dy[static_cast<long>(r) * m + i];
            const double* xr = x + static_cast<long>(r) * n;
            for (int j = 0; j < n; ++j) {
                row[j] += g * xr[j];
            }
            bs += g;
        }
        if (db) {
            db[i] += bs;
        }
    }
}

void unary(unary_op op, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] = apply_unary(op, x[i]);
    }
}

void unary_grad_acc(unary_op op, const double* y, const double* dy,
                    double* dx, int n) {
    for (int i = 0; i < n; ++i) {
        dx[i] += apply_unary_grad(op, y[i]) * dy[i];
    }
}

}  // namespace serial

void matvec(const double* w, const double* b, const double* x, double* y,
            int m, int n) {
    long flops = static_cast<long>(m) * n;
    if (flops < g_parallel_threshold) {
        serial::matvec(w, b, x, y, m, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        y[i] = (b ? b[i] : 0.0) + dot(w + static_cast<long>(i) * n, x, n);
    }
}

void matvec_t_acc(const double* w, const double* dy, double* dx, int m,
                  int n) {
    long flops = static_cast<long>(m) * n;
    if (flops < g_parallel_threshold) {
        serial::matvec_t_acc(w, dy, dx, m, n);
        return;
    }
    int blocks = (n + kColBlock - 1) / kColBlock;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < blocks; ++bi) {
        int j0 = bi * kColBlock;
        wt_dy_block(w, dy, dx, m, n, j0, std::min(n, j0 + kColBlock));
    }
}

void outer_acc(double* dw, double* db, const double* dy, const double* x,
               int m, int n) {
    long flops = static_cast<long>(m) * n;
    if (flops < g_parallel_threshold) {
        serial::outer_acc(dw, db, dy, x, m, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double g = dy[i];
        double* row = dw + static_cast<long>(i) * n;
        for (int j = 0; j < n; ++j) {
            row[j] += g * x[j];
        }
        if (db) {
            db[i] += g;
        }
    }
}

void linear_rows(const double* x, const double* w, const double* b,
                 double* y, int t, int n, int m) {
    long flops = static_cast<long>(t) * n * m;
    if (flops < g_parallel_threshold) {
        serial::linear_rows(x, w, b, y, t, n, m);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < t; ++r) {
        serial::matvec(w, b, x + static_cast<long>(r) * n,
                       y + static_cast<long>(r) * m, m, n);
    }
}

void linear_rows_dx(const double* dy, const double* w, double* dx, int t,
                    int n, int m) {
    long flops = static_cast<long>(t) * n * m;
    if (flops < g_parallel_threshold) {
        serial::linear_rows_dx(dy, w, dx, t, n, m);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int r = 0; r < t; ++r) {
        serial::matvec_t_acc(w, dy + static_cast<long>(r) * m,
                             dx + static_cast<long>(r) * n, m, n);
    }
}

void linear_rows_dw(const double* dy, const double* x, double* dw,
                    double* db, int t, int n, int m) {
    long flops = static_cast<long>(t) * n * m;
    if (flops < g_parallel_threshold) {
        serial::linear_rows_dw(dy, x, dw, db, t, n, m);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        double* row = dw + static_cast<long>(i) * n;
        double bs = 0.0;
        for (int r = 0; r < t; ++r) {
            double g = dy[static_cast<long>(r) * m + i];
            const double* xr = x + static_cast<long>(r) * n;
            for (int j = 0; j < n; ++j) {
                row[j] += g * xr[j];
            }
            bs += g;
        }
        if (db) {
            db[i] += bs;
        }
    }
}

void unary(unary_op op, const double* x, double* y, int n) {
    if (n < g_parallel_threshold) {
        serial::unary(op, x, y, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        y[i] = apply_unary(op, x[i]);
    }
}

void unary_grad_acc(unary_op op, const double* y, const double* dy,
                    double* dx, int n) {
    if (n < g_parallel_threshold) {
        serial::unary_grad_acc(op, y, dy, dx, n);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        dx[i] += apply_unary_grad(op, y[i]) * dy[i];
    }
}

}  // namespace esg::kernels
