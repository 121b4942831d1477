#pragma once

namespace esg::kernels {

enum class unary_op { sigmoid, tanh_fn, relu };

// Serial reference kernels. These are the ground truth the OpenMP
// versions are tested against; both compute every output element with
// the same accumulation order, so results are bit-identical and the
// parallel path does not perturb reproducibility.
namespace serial {

// y = W x + b, W is m x n row-major (b may be null)
void matvec(const double* w, const double* b, const double* x, double* y,
            int m, int n);

// dx += W^T dy
void matvec_t_acc(const double* w, const double* dy, double* dx, int m,
                  int n);

// dW += dy x^T (outer product), db += dy when db non-null
void outer_acc(double* dw, double* db, const double* dy, const double* x,
               int m, int n);

// Y = X W^T + b: X is t x n, W is m x n, Y is t x m (b may be null)
void linear_rows(const double* x, const double* w, const double* b,
                 double* y, int t, int n, int m);

// dX += dY W
void linear_rows_dx(const double* dy, const double* w, double* dx, int t,
                    int n, int m);

// dW += dY^T X, db += column sums of dY when db non-null
void linear_rows_dw(const double* dy, const double* x, double* dw,
                    double* db, int t, int n, int m);

void unary(unary_op op, const double* x, double* y, int n);

// chain rule from saved output y: dx += f'(x) dy where f' is expressed
// in terms of y (sigmoid: y(1-y), tanh: 1-y^2, relu: [y > 0])
void unary_grad_acc(unary_op op, const double* y, const double* dy,
                    double* dx, int n);

}  // namespace serial

// Dispatching kernels: same signatures and same results as serial::*,
// with OpenMP row/element parallelism once the flop count clears
// parallel_threshold().
void matvec(const double* w, const double* b, const double* x, double* y,
            int m, int n);
void matvec_t_acc(const double* w, const double* dy, double* dx, int m,
                  int n);
void outer_acc(double* dw, double* db, const double* dy, const double* x,
               int m, int n);
void linear_rows(const double* x, const double* w, const double* b,
                 double* y, int t, int n, int m);
void linear_rows_dx(const double* dy, const double* w, double* dx, int t,
                    int n, int m);
void linear_rows_dw(const double* dy, const double* x, double* dw,
                    double* db, int t, int n, int m);
void unary(unary_op op, const double* x, double* y, int n);
void unary_grad_acc(unary_op op, const double* y, const double* dy,
                    double* dx, int n);

// minimum per-call flop count before a kernel goes parallel; tests lower
// it to force the OpenMP path on small inputs
long parallel_threshold();
void set_parallel_threshold(long flops);

int hardware_threads();

}  // namespace esg::kernels
