#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "esg/kernels.hpp"
#include "esg/rng.hpp"
#include "esg/tensor.hpp"

namespace esg {

// handle into a tape
struct value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over a linear tape. Creation order is the
// topological order, so backward() replays nodes from the root down and
// visits each node after all of its consumers. One tape per forward
// pass; tapes are single-threaded, independent tapes may run in
// parallel.
class tape {
public:
    // leaf with gradient (model parameter)
    value leaf(tensor t);
    // input data; no gradient is propagated into it
    value constant(tensor t);

    const tensor& val(value v) const;
    // gradient of the last backward() root w.r.t. v; zeros for untouched
    // leaves
    const tensor& grad(value v) const;

    // y = W x + b
    value affine(value w, value b, value x);
    // y = W x
    value matvec(value w, value x);
    // Y = X W^T + b with X of shape t x n, W of shape m x n
    value linear_rows(value x, value w, value b);

    value elementwise(kernels::unary_op op, value x);
    value sigmoid(value x) { return elementwise(kernels::unary_op::sigmoid, x); }
    value tanh_fn(value x) { return elementwise(kernels::unary_op::tanh_fn, x); }
    value relu(value x) { return elementwise(kernels::unary_op::relu, x); }

    value add(value a, value b);
    value sub(value a, value b);
    value mul(value a, value b);  // elementwise

    value concat(value a, value b);       // vectors
    value concat_cols(value a, value b);  // t x n ++ t x m -> t x (n+m)
    value stack_rows(const std::vector<value>& rows);  // t vectors -> t x n
    value broadcast_rows(value x, int t_rows);
    value mean_rows(value x);
    // mean of rows where mask is nonzero; all-zero mask yields the zero
    // vector (the <sos>/<eos> convention)
    value masked_mean_rows(value x, const std::vector<std::uint8_t>& mask);
    value flatten(value x);
    value sum(value x);

    // inverted dropout; identity when rate == 0
    value dropout(value x, double rate, counter_rng& rng);

    // mean over elements of -[y log p + (1-y) log(1-p)] with p clamped
    // to [1e-7, 1-1e-7]
    value bce(value p, const tensor& target);

    // accumulates gradients for every node reachable from root; root
    // must be scalar
    void backward(value root);

    int node_count() const { return static_cast<int>(nodes_.size()); }

    static constexpr double kProbEps = 1e-7;

private:
    // invoked with the node's own output value and output gradient
    using backprop_fn = std::function<void(tape&, const tensor&, const tensor&)>;

    struct node {
        tensor val;
        tensor grad;
        bool requires_grad = false;
        backprop_fn back;
    };

    std::vector<node> nodes_;

    value push(tensor val, bool requires_grad, backprop_fn back);
    node& at(value v);
    const node& at(value v) const;
    bool needs(value v) const { return at(v).requires_grad; }
    tensor& grad_buf(value v) { return at(v).grad; }
};

}  // namespace esg
