#include "esg/tape.hpp"

#include <cmath>
#include <utility>

#include "esg/error.hpp"

namespace esg {

namespace ker = kernels;

value tape::push(tensor val, bool requires_grad, backprop_fn back) {
    node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return value{static_cast<int>(nodes_.size()) - 1};
}

tape::node& tape::at(value v) {
    if (v.id < 0 || v.id >= node_count()) {
        throw usage_error("value handle does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

const tape::node& tape::at(value v) const {
    if (v.id < 0 || v.id >= node_count()) {
        throw usage_error("value handle does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id)];
}

value tape::leaf(tensor t) { return push(std::move(t), true, nullptr); }

value tape::constant(tensor t) { return push(std::move(t), false, nullptr); }

const tensor& tape::val(value v) const { return at(v).val; }

const tensor& tape::grad(value v) const {
    const node& n = at(v);
    if (n.grad.size() == 0) {
        throw usage_error("grad() before backward()");
    }
    return n.grad;
}

value tape::affine(value w, value b, value x) {
    const tensor& wt = val(w);
    const tensor& bt = val(b);
    const tensor& xt = val(x);
    if (wt.rank() != 2 || bt.rank() != 1 || xt.rank() != 1 ||
        wt.cols() != xt.size() || wt.rows() != bt.size()) {
        throw shape_error("affine: W " + wt.dims_str() + ", b " +
                          bt.dims_str() + ", x " + xt.dims_str());
    }
    int m = wt.rows();
    int n = wt.cols();
    tensor y = tensor::zeros({m});
    ker::matvec(wt.v.data(), bt.v.data(), xt.v.data(), y.v.data(), m, n);
    bool rg = needs(w) || needs(b) || needs(x);
    return push(std::move(y), rg,
                [w, b, x, m, n](tape& tp, const tensor&, const tensor& dy) {
                    if (tp.needs(w)) {
                        ker::outer_acc(tp.grad_buf(w).v.data(), nullptr,
                                       dy.v.data(), tp.val(x).v.data(), m, n);
                    }
                    if (tp.needs(b)) {
                        double* db = tp.grad_buf(b).v.data();
                        for (int i = 0; i < m; ++i) {
                            db[i] += dy.v[i];
                        }
                    }
                    if (tp.needs(x)) {
                        ker::matvec_t_acc(tp.val(w).v.data(), dy.v.data(),
                                          tp.grad_buf(x).v.data(), m, n);
                    }
                });
}

value tape::matvec(value w, value x) {
    const tensor& wt = val(w);
    const tensor& xt = val(x);
    if (wt.rank() != 2 || xt.rank() != 1 || wt.cols() != xt.size()) {
        throw shape_error("matvec: W " + wt.dims_str() + ", x " +
                          xt.dims_str());
    }
    int m = wt.rows();
    int n = wt.cols();
    tensor y = tensor::zeros({m});
    ker::matvec(wt.v.data(), nullptr, xt.v.data(), y.v.data(), m, n);
    bool rg = needs(w) || needs(x);
    return push(std::move(y), rg,
                [w, x, m, n](tape& tp, const tensor&, const tensor& dy) {
                    if (tp.needs(w)) {
                        ker::outer_acc(tp.grad_buf(w).v.data(), nullptr,
                                       dy.v.data(), tp.val(x).v.data(), m, n);
                    }
                    if (tp.needs(x)) {
                        ker::matvec_t_acc(tp.val(w).v.data(), dy.v.data(),
                                          tp.grad_buf(x).v.data(), m, n);
                    }
                });
}

value tape::linear_rows(value x, value w, value b) {
    const tensor& xt = val(x);
    const tensor& wt = val(w);
    const tensor& bt = val(b);
    if (xt.rank() != 2 || wt.rank() != 2 || bt.rank() != 1 ||
        xt.cols() != wt.cols() || wt.rows() != bt.size()) {
        throw shape_error("linear_rows: X " + xt.dims_str() + ", W " +
                          wt.dims_str() + ", b " + bt.dims_str());
    }
    int t = xt.rows();
    int n = xt.cols();
    int m = wt.rows();
    tensor y = tensor::zeros({t, m});
    ker::linear_rows(xt.v.data(), wt.v.data(), bt.v.data(), y.v.data(), t, n,
                     m);
    bool rg = needs(x) || needs(w) || needs(b);
    return push(
        std::move(y), rg,
        [x, w, b, t, n, m](tape& tp, const tensor&, const tensor& dy) {
            if (tp.needs(w) || tp.needs(b)) {
                ker::linear_rows_dw(
                    dy.v.data(), tp.val(x).v.data(), tp.grad_buf(w).v.data(),
                    tp.needs(b) ? tp.grad_buf(b).v.data() : nullptr, t, n, m);
            }
            if (tp.needs(x)) {
                ker::linear_rows_dx(dy.v.data(), tp.val(w).v.data(),
                                    tp.grad_buf(x).v.data(), t, n, m);
            }
        });
}

value tape::elementwise(kernels::unary_op op, value x) {
    const tensor& xt = val(x);
    tensor y = tensor::zeros(xt.dims);
    ker::unary(op, xt.v.data(), y.v.data(), xt.size());
    int n = xt.size();
    return push(std::move(y), needs(x),
                [op, x, n](tape& tp, const tensor& y_out, const tensor& dy) {
                    if (tp.needs(x)) {
                        ker::unary_grad_acc(op, y_out.v.data(), dy.v.data(),
                                            tp.grad_buf(x).v.data(), n);
                    }
                });
}

value tape::add(value a, value b) {
    const tensor& at_ = val(a);
    const tensor& bt = val(b);
    check_same_dims(at_, bt, "add");
    tensor y = at_;
    for (int i = 0; i < y.size(); ++i) {
        y.v[i] += bt.v[i];
    }
    return push(std::move(y), needs(a) || needs(b),
                [a, b](tape& tp, const tensor&, const tensor& dy) {
                    for (value src : {a, b}) {
                        if (!tp.needs(src)) {
                            continue;
                        }
                        double* g = tp.grad_buf(src).v.data();
                        for (int i = 0; i < dy.size(); ++i) {
                            g[i] += dy.v[i];
                        }
                    }
                });
}

value tape::sub(value a, value b) {
    const tensor& at_ = val(a);
    const tensor& bt = val(b);
    check_same_dims(at_, bt, "sub");
    tensor y = at_;
    for (int i = 0; i < y.size(); ++i) {
        y.v[i] -= bt.v[i];
    }
    return push(std::move(y), needs(a) || needs(b),
                [a, b](tape& tp, const tensor&, const tensor& dy) {
                    if (tp.needs(a)) {
                        double* g = tp.grad_buf(a).v.data();
                        for (int i = 0; i < dy.size(); ++i) {
                            g[i] += dy.v[i];
                        }
                    }
                    if (tp.needs(b)) {
                        double* g = tp.grad_buf(b).v.data();
                        for (int i = 0; i < dy.size(); ++i) {
                            g[i] -= dy.v[i];
                        }
                    }
                });
}

value tape::mul(value a, value b) {
    const tensor& at_ = val(a);
    const tensor& bt = val(b);
    check_same_dims(at_, bt, "mul");
    tensor y = at_;
    for (int i = 0; i < y.size(); ++i) {
        y.v[i] *= bt.v[i];
    }
    return push(std::move(y), needs(a) || needs(b),
                [a, b](tape& tp, const tensor&, const tensor& dy) {
                    if (tp.needs(a)) {
                        double* g = tp.grad_buf(a).v.data();
                        const double* bv = tp.val(b).v.data();
                        for (int i = 0; i < dy.size(); ++i) {
                            g[i] += dy.v[i] * bv[i];
                        }
                    }
                    if (tp.needs(b)) {
                        double* g = tp.grad_buf(b).v.data();
                        const double* av = tp.val(a).v.data();
                        for (int i = 0; i < dy.size(); ++i) {
                            g[i] += dy.v[i] * av[i];
                        }
                    }
                });
}

value tape::concat(value a, value b) {
    const tensor& at_ = val(a);
    const tensor& bt = val(b);
    if (at_.rank() != 1 || bt.rank() != 1) {
        throw shape_error("concat expects vectors");
    }
    int na = at_.size();
    int nb = bt.size();
    tensor y = tensor::zeros({na + nb});
    std::copy(at_.v.begin(), at_.v.end(), y.v.begin());
    std::copy(bt.v.begin(), bt.v.end(), y.v.begin() + na);
    return push(std::move(y), needs(a) || needs(b),
                [a, b, na, nb](tape& tp, const tensor&, const tensor& dy) {
                    if (tp.needs(a)) {
                        double* g = tp.grad_buf(a).v.data();
                        for (int i = 0; i < na; ++i) {
                            g[i] += dy.v[i];
                        }
                    }
                    if (tp.needs(b)) {
                        double* g = tp.grad_buf(b).v.data();
                        for (int i = 0; i < nb; ++i) {
                            g[i] += dy.v[na + i];
                        }
                    }
                });
}

value tape::concat_cols(value a, value b) {
    const tensor& at_ = val(a);
    const tensor& bt = val(b);
    if (at_.rank() != 2 || bt.rank() != 2 || at_.rows() != bt.rows()) {
        throw shape_error("concat_cols: " + at_.dims_str() + " vs " +
                          bt.dims_str());
    }
    int t = at_.rows();
    int na = at_.cols();
    int nb = bt.cols();
    tensor y = tensor::zeros({t, na + nb});
    for (int r = 0; r < t; ++r) {
        for (int j = 0; j < na; ++j) {
            y(r, j) = at_(r, j);
        }
        for (int j = 0; j < nb; ++j) {
            y(r, na + j) = bt(r, j);
        }
    }
    return push(
        std::move(y), needs(a) || needs(b),
        [a, b, t, na, nb](tape& tp, const tensor&, const tensor& dy) {
            if (tp.needs(a)) {
                tensor& g = tp.grad_buf(a);
                for (int r = 0; r < t; ++r) {
                    for (int j = 0; j < na; ++j) {
                        g(r, j) += dy(r, j);
                    }
                }
            }
            if (tp.needs(b)) {
                tensor& g = tp.grad_buf(b);
                for (int r = 0; r < t; ++r) {
                    for (int j = 0; j < nb; ++j) {
                        g(r, j) += dy(r, na + j);
                    }
                }
            }
        });
}

value tape::stack_rows(const std::vector<value>& rows) {
    if (rows.empty()) {
        throw shape_error("stack_rows on empty row list");
    }
    int n = val(rows[0]).size();
    int t = static_cast<int>(rows.size());
    tensor y = tensor::zeros({t, n});
    bool rg = false;
    for (int r = 0; r < t; ++r) {
        const tensor& row = val(rows[static_cast<std::size_t>(r)]);
        if (row.rank() != 1 || row.size() != n) {
            throw shape_error("stack_rows: inconsistent row dims");
        }
        std::copy(row.v.begin(), row.v.end(),
                  y.v.begin() + static_cast<long>(r) * n);
        rg = rg || needs(rows[static_cast<std::size_t>(r)]);
    }
    return push(std::move(y), rg,
                [rows, t, n](tape& tp, const tensor&, const tensor& dy) {
                    for (int r = 0; r < t; ++r) {
                        value src = rows[static_cast<std::size_t>(r)];
                        if (!tp.needs(src)) {
                            continue;
                        }
                        double* g = tp.grad_buf(src).v.data();
                        const double* d = dy.v.data() + static_cast<long>(r) * n;
                        for (int j = 0; j < n; ++j) {
                            g[j] += d[j];
                        }
                    }
                });
}

value tape::broadcast_rows(value x, int t_rows) {
    const tensor& xt = val(x);
    if (xt.rank() != 1 || t_rows < 1) {
        throw shape_error("broadcast_rows expects a vector and t >= 1");
    }
    int n = xt.size();
    tensor y = tensor::zeros({t_rows, n});
    for (int r = 0; r < t_rows; ++r) {
        std::copy(xt.v.begin(), xt.v.end(),
                  y.v.begin() + static_cast<long>(r) * n);
    }
    return push(std::move(y), needs(x),
                [x, t_rows, n](tape& tp, const tensor&, const tensor& dy) {
                    if (!tp.needs(x)) {
                        return;
                    }
                    double* g = tp.grad_buf(x).v.data();
                    for (int j = 0; j < n; ++j) {
                        double s = 0.0;
                        for (int r = 0; r < t_rows; ++r) {
                            s += dy.v[static_cast<long>(r) * n + j];
                        }
                        g[j] += s;
                    }
                });
}

value tape::mean_rows(value x) {
    const tensor& xt = val(x);
    if (xt.rank() != 2) {
        throw shape_error("mean_rows expects a matrix");
    }
    int t = xt.rows();
    int n = xt.cols();
    tensor y = tensor::zeros({n});
    for (int r = 0; r < t; ++r) {
        for (int j = 0; j < n; ++j) {
            y.v[j] += xt(r, j);
        }
    }
    for (int j = 0; j < n; ++j) {
        y.v[j] /= t;
    }
    return push(std::move(y), needs(x),
                [x, t, n](tape& tp, const tensor&, const tensor& dy) {
                    if (!tp.needs(x)) {
                        return;
                    }
                    tensor& g = tp.grad_buf(x);
                    for (int r = 0; r < t; ++r) {
                        for (int j = 0; j < n; ++j) {
                            g(r, j) += dy.v[j] / t;
                        }
                    }
                });
}

value tape::masked_mean_rows(value x, const std::vector<std::uint8_t>& mask) {
    const tensor& xt = val(x);
    if (xt.rank() != 2 || static_cast<int>(mask.size()) != xt.rows()) {
        throw shape_error("masked_mean_rows: mask length " +
                          std::to_string(mask.size()) + " vs X " +
                          xt.dims_str());
    }
    int t = xt.rows();
    int n = xt.cols();
    int count = 0;
    for (std::uint8_t m : mask) {
        count += m ? 1 : 0;
    }
    tensor y = tensor::zeros({n});
    if (count > 0) {
        for (int r = 0; r < t; ++r) {
            if (!mask[static_cast<std::size_t>(r)]) {
                continue;
            }
            for (int j = 0; j < n; ++j) {
                y.v[j] += xt(r, j);
            }
        }
        for (int j = 0; j < n; ++j) {
            y.v[j] /= count;
        }
    }
    return push(std::move(y), needs(x),
                [x, mask, count, t, n](tape& tp, const tensor&,
                                       const tensor& dy) {
                    if (!tp.needs(x) || count == 0) {
                        return;
                    }
                    tensor& g = tp.grad_buf(x);
                    for (int r = 0; r < t; ++r) {
                        if (!mask[static_cast<std::size_t>(r)]) {
                            continue;
                        }
                        for (int j = 0; j < n; ++j) {
                            g(r, j) += dy.v[j] / count;
                        }
                    }
                });
}

value tape::flatten(value x) {
    const tensor& xt = val(x);
    tensor y(std::vector<int>{xt.size()}, xt.v);
    return push(std::move(y), needs(x),
                [x](tape& tp, const tensor&, const tensor& dy) {
                    if (!tp.needs(x)) {
                        return;
                    }
                    double* g = tp.grad_buf(x).v.data();
                    for (int i = 0; i < dy.size(); ++i) {
                        g[i] += dy.v[i];
                    }
                });
}

value tape::sum(value x) {
    const tensor& xt = val(x);
    double s = 0.0;
    for (double e : xt.v) {
        s += e;
    }
    return push(tensor::vec({s}), needs(x),
                [x](tape& tp, const tensor&, const tensor& dy) {
                    if (!tp.needs(x)) {
                        return;
                    }
                    double* g = tp.grad_buf(x).v.data();
                    int n = tp.val(x).size();
                    for (int i = 0; i < n; ++i) {
                        g[i] += dy.v[0];
                    }
                });
}

value tape::dropout(value x, double rate, counter_rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw validation_error("dropout rate must be in [0, 1)");
    }
    if (rate == 0.0) {
        return x;
    }
    const tensor& xt = val(x);
    double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(static_cast<std::size_t>(xt.size()));
    for (double& m : mask) {
        m = rng.next_unit() >= rate ? keep_scale : 0.0;
    }
    tensor y = xt;
    for (int i = 0; i < y.size(); ++i) {
        y.v[i] *= mask[static_cast<std::size_t>(i)];
    }
    return push(std::move(y), needs(x),
                [x, mask = std::move(mask)](tape& tp, const tensor&,
                                            const tensor& dy) {
                    if (!tp.needs(x)) {
                        return;
                    }
                    double* g = tp.grad_buf(x).v.data();
                    for (int i = 0; i < dy.size(); ++i) {
                        g[i] += dy.v[i] * mask[static_cast<std::size_t>(i)];
                    }
                });
}

value tape::bce(value p, const tensor& target) {
    const tensor& pt = val(p);
    if (pt.size() != target.size()) {
        throw shape_error("bce: p has " + std::to_string(pt.size()) +
                          " elements, target has " +
                          std::to_string(target.size()));
    }
    int n = pt.size();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        double pc = std::min(std::max(pt.v[i], kProbEps), 1.0 - kProbEps);
        double y = target.v[i];
        loss += -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));
    }
    loss /= n;
    return push(tensor::vec({loss}), needs(p),
                [p, target, n](tape& tp, const tensor&, const tensor& dy) {
                    if (!tp.needs(p)) {
                        return;
                    }
                    const tensor& pv = tp.val(p);
                    double* g = tp.grad_buf(p).v.data();
                    for (int i = 0; i < n; ++i) {
                        // gradient is zero where the clamp saturates
                        if (pv.v[i] < kProbEps || pv.v[i] > 1.0 - kProbEps) {
                            continue;
                        }
                        double y = target.v[i];
                        g[i] += dy.v[0] *
                                (-y / pv.v[i] + (1.0 - y) / (1.0 - pv.v[i])) /
                                n;
                    }
                });
}

void tape::backward(value root) {
    node& r = at(root);
    if (r.val.size() != 1) {
        throw usage_error("backward root must be scalar, got " +
                          r.val.dims_str());
    }
    for (node& n : nodes_) {
        if (n.grad.size() == 0) {
            n.grad = tensor::zeros(n.val.dims);
        } else {
            n.grad.fill(0.0);
        }
    }
    r.grad.v[0] = 1.0;
    for (int id = root.id; id >= 0; --id) {
        node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.back && n.requires_grad) {
            n.back(*this, n.val, n.grad);
        }
    }
}

}  // namespace esg
