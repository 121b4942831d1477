#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "esg/error.hpp"
#include "esg/grad_check.hpp"
#include "esg/tape.hpp"

using namespace esg;

namespace {

double scalar(const tape& tp, value v) { return tp.val(v)(0); }

tensor randn(std::vector<int> dims, std::uint64_t seed, std::uint64_t stream) {
    counter_rng rng(seed, stream);
    return tensor::normal(std::move(dims), 0.1, rng);
}

}  // namespace

TEST_CASE("affine examples") {
    tape tp;
    value w0 = tp.leaf(tensor::zeros({2, 2}));
    value b0 = tp.leaf(tensor::zeros({2}));
    value x = tp.leaf(tensor::vec({3.0, -1.0}));
    value y = tp.affine(w0, b0, x);
    CHECK(tp.val(y)(0) == 0.0);
    CHECK(tp.val(y)(1) == 0.0);

    value wi = tp.leaf(tensor::identity(2));
    value y2 = tp.affine(wi, b0, x);
    CHECK(tp.val(y2)(0) == 3.0);
    CHECK(tp.val(y2)(1) == -1.0);

    value w = tp.leaf(tensor::mat(2, 2, {1, 2, 0, 1}));
    value b = tp.leaf(tensor::vec({1, 1}));
    value x1 = tp.leaf(tensor::vec({1, 1}));
    value y3 = tp.affine(w, b, x1);
    CHECK(tp.val(y3)(0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(tp.val(y3)(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("affine shape errors") {
    tape tp;
    value w = tp.leaf(tensor::zeros({2, 3}));
    value b = tp.leaf(tensor::zeros({2}));
    value x = tp.leaf(tensor::zeros({2}));  // needs 3
    CHECK_THROWS_AS(tp.affine(w, b, x), shape_error);
    value b_bad = tp.leaf(tensor::zeros({3}));
    value x_ok = tp.leaf(tensor::zeros({3}));
    CHECK_THROWS_AS(tp.affine(w, b_bad, x_ok), shape_error);
}

TEST_CASE("affine is linear") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        tensor wt = randn({4, 3}, s, 1);
        tensor bt = randn({4}, s, 2);
        tensor xt = randn({3}, s, 3);
        tensor zt = randn({3}, s, 4);
        double alpha = 0.7, beta = -1.3;

        tape tp;
        value w = tp.leaf(wt);
        value b = tp.leaf(bt);
        value zero_b = tp.leaf(tensor::zeros({4}));
        tensor mix = tensor::zeros({3});
        for (int i = 0; i < 3; ++i) {
            mix.v[i] = alpha * xt.v[i] + beta * zt.v[i];
        }
        value lhs = tp.affine(w, b, tp.leaf(mix));
        value fx = tp.affine(w, zero_b, tp.leaf(xt));
        value fz = tp.affine(w, zero_b, tp.leaf(zt));
        for (int i = 0; i < 4; ++i) {
            double rhs = alpha * tp.val(fx)(i) + beta * tp.val(fz)(i) + bt.v[i];
            CHECK(tp.val(lhs)(i) == doctest::Approx(rhs).epsilon(1e-9));
        }
    }
}

TEST_CASE("elementwise examples") {
    tape tp;
    value x = tp.leaf(tensor::vec({0.0}));
    CHECK(scalar(tp, tp.sigmoid(x)) == 0.5);

    value r = tp.leaf(tensor::vec({-2.0, 0.0, 3.0}));
    value ry = tp.relu(r);
    CHECK(tp.val(ry)(0) == 0.0);
    CHECK(tp.val(ry)(1) == 0.0);
    CHECK(tp.val(ry)(2) == 3.0);

    value t = tp.leaf(tensor::vec({1.0}));
    CHECK(scalar(tp, tp.tanh_fn(t)) ==
          doctest::Approx(0.7615941559557649).epsilon(1e-12));
}

TEST_CASE("bce examples") {
    tape tp;
    value p = tp.leaf(tensor::vec({0.5, 0.5}));
    CHECK(scalar(tp, tp.bce(p, tensor::vec({1.0, 0.0}))) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // perfect prediction after clamping
    value exact = tp.leaf(tensor::vec({1.0, 0.0}));
    CHECK(scalar(tp, tp.bce(exact, tensor::vec({1.0, 0.0}))) ==
          doctest::Approx(0.0).epsilon(1e-6));

    value p2 = tp.leaf(tensor::vec({0.9, 0.2}));
    double expected = -0.5 * (std::log(0.9) + std::log(0.8));
    CHECK(expected == doctest::Approx(0.164252).epsilon(1e-5));
    CHECK(scalar(tp, tp.bce(p2, tensor::vec({1.0, 0.0}))) ==
          doctest::Approx(0.16425203348601798).epsilon(1e-12));

    CHECK_THROWS_AS(tp.bce(p2, tensor::vec({1.0})), shape_error);
}

TEST_CASE("bce is nonnegative, zero only at clamped target") {
    counter_rng rng(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        int n = static_cast<int>(rng.next_int(1, 6));
        tensor pt = tensor::zeros({n});
        tensor yt = tensor::zeros({n});
        for (int i = 0; i < n; ++i) {
            pt.v[i] = rng.next_unit();
            yt.v[i] = rng.next_int(0, 1);
        }
        tape tp;
        double loss = scalar(tp, tp.bce(tp.leaf(pt), yt));
        CHECK(loss >= 0.0);
    }
    // equality case: p equals the clamped target exactly
    tape tp;
    double eps = tape::kProbEps;
    value p = tp.leaf(tensor::vec({1.0 - eps, eps}));
    double at_min = scalar(tp, tp.bce(p, tensor::vec({1.0, 0.0})));
    value q = tp.leaf(tensor::vec({1.0 - eps, 0.3}));
    double off_min = scalar(tp, tp.bce(q, tensor::vec({1.0, 0.0})));
    CHECK(at_min < 1e-6);
    CHECK(off_min > at_min);
}

TEST_CASE("backward basics") {
    {
        tape tp;
        value x = tp.leaf(tensor::vec({3.0}));
        value y = tp.sum(tp.mul(x, x));
        tp.backward(y);
        CHECK(tp.grad(x)(0) == doctest::Approx(6.0).epsilon(1e-12));
    }
    {
        tape tp;
        value x = tp.leaf(tensor::vec({1.0, 2.0}));
        value c = tp.constant(tensor::vec({5.0}));
        value y = tp.sum(c);
        tp.backward(y);
        // constant objective: untouched leaf gets zero gradient
        CHECK(tp.grad(x)(0) == 0.0);
        CHECK(tp.grad(x)(1) == 0.0);
    }
    {
        tape tp;
        value x = tp.leaf(tensor::vec({1.0, 2.0}));
        value y = tp.mul(x, x);  // non-scalar root
        CHECK_THROWS_AS(tp.backward(y), usage_error);
    }
}

TEST_CASE("grad_check on quadratic is nearly exact") {
    tensor theta = randn({6}, 3, 9);
    tape tp;
    value x = tp.leaf(theta);
    value y = tp.sum(tp.mul(x, x));
    tp.backward(y);
    tensor analytic = tp.grad(x);
    double err = grad_check(
        [](const tensor& t) {
            double s = 0.0;
            for (double v : t.v) {
                s += v * v;
            }
            return s;
        },
        theta, analytic);
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check of bce after sigmoid") {
    tensor theta = randn({5}, 4, 2);
    tensor target = tensor::vec({1, 0, 0, 1, 0});
    auto f = [&target](const tensor& t) {
        tape tp;
        value p = tp.sigmoid(tp.leaf(t));
        return tp.val(tp.bce(p, target))(0);
    };
    tape tp;
    value x = tp.leaf(theta);
    value loss = tp.bce(tp.sigmoid(x), target);
    tp.backward(loss);
    CHECK(grad_check(f, theta, tp.grad(x)) < 1e-4);
}

TEST_CASE("grad_check across every op, 10 seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        tensor w = randn({3, 4}, seed, 10);
        tensor b = randn({3}, seed, 11);
        tensor x = randn({4}, seed, 12);
        tensor m = randn({5, 4}, seed, 13);
        tensor m2 = randn({5, 3}, seed, 14);
        tensor target = tensor::vec({1, 0, 1});

        // a composite touching affine, matvec, linear_rows, activations,
        // add/sub/mul, concat, broadcast, stacking, means, flatten, bce
        auto build = [&](tape& tp, const std::vector<tensor>& ps,
                         bool with_dropout) {
            value vw = tp.leaf(ps[0]);
            value vb = tp.leaf(ps[1]);
            value vx = tp.leaf(ps[2]);
            value vm = tp.leaf(ps[3]);
            value vm2 = tp.leaf(ps[4]);
            value a = tp.tanh_fn(tp.affine(vw, vb, vx));        // 3
            value c = tp.sigmoid(tp.matvec(vw, vx));            // 3
            value d = tp.mul(tp.sub(a, c), tp.add(a, c));       // 3
            value rows = tp.linear_rows(vm, vw, vb);            // 5x3
            value cat = tp.concat_cols(rows, tp.broadcast_rows(d, 5));
            value mm = tp.mean_rows(cat);                       // 6
            std::vector<std::uint8_t> mask{1, 0, 1, 0, 1};
            value mmr = tp.masked_mean_rows(vm2, mask);         // 3
            value st = tp.stack_rows({mmr, d});                 // 2x3
            value flat = tp.relu(tp.flatten(st));               // 6
            value both = tp.add(flat, mm);
            value probs = tp.sigmoid(tp.concat(both, d));       // 9
            if (with_dropout) {
                counter_rng drng(77, seed);
                probs = tp.dropout(probs, 0.4, drng);
            }
            tensor tgt = tensor::zeros({9});
            for (int i = 0; i < 9; ++i) {
                tgt.v[i] = (i % 2 == 0) ? 1.0 : 0.0;
            }
            return tp.bce(probs, tgt);
        };
        for (bool with_dropout : {false, true}) {
            std::vector<tensor> params{w, b, x, m, m2};
            auto f = [&](const std::vector<tensor>& ps) {
                tape tp;
                return tp.val(build(tp, ps, with_dropout))(0);
            };
            tape tp2;
            value l2 = build(tp2, params, with_dropout);
            tp2.backward(l2);
            std::vector<tensor> analytic;
            for (int i = 0; i < 5; ++i) {
                analytic.push_back(tp2.grad(value{i}));
            }
            CHECK(grad_check(f, params, analytic) < 1e-4);
        }
    }
}

TEST_CASE("grad_check of a full GRU step loss") {
    std::uint64_t seed = 21;
    tensor wz = randn({4, 3}, seed, 1), uz = randn({4, 4}, seed, 2),
           bz = randn({4}, seed, 3);
    tensor wr = randn({4, 3}, seed, 4), ur = randn({4, 4}, seed, 5),
           br = randn({4}, seed, 6);
    tensor wh = randn({4, 3}, seed, 7), uh = randn({4, 4}, seed, 8),
           bh = randn({4}, seed, 9);
    tensor x = randn({3}, seed, 10), h0 = randn({4}, seed, 11);
    tensor target = tensor::vec({1, 0, 0, 1});

    auto build = [&target](tape& tp, const std::vector<tensor>& p) {
        value wz_ = tp.leaf(p[0]), uz_ = tp.leaf(p[1]), bz_ = tp.leaf(p[2]);
        value wr_ = tp.leaf(p[3]), ur_ = tp.leaf(p[4]), br_ = tp.leaf(p[5]);
        value wh_ = tp.leaf(p[6]), uh_ = tp.leaf(p[7]), bh_ = tp.leaf(p[8]);
        value x_ = tp.leaf(p[9]), h_ = tp.leaf(p[10]);
        value z = tp.sigmoid(tp.add(tp.affine(wz_, bz_, x_), tp.matvec(uz_, h_)));
        value r = tp.sigmoid(tp.add(tp.affine(wr_, br_, x_), tp.matvec(ur_, h_)));
        value hc = tp.tanh_fn(
            tp.add(tp.affine(wh_, bh_, x_), tp.matvec(uh_, tp.mul(r, h_))));
        value h1 = tp.add(h_, tp.mul(z, tp.sub(hc, h_)));
        return tp.bce(tp.sigmoid(h1), target);
    };
    std::vector<tensor> params{wz, uz, bz, wr, ur, br, wh, uh, bh, x, h0};
    auto f = [&](const std::vector<tensor>& p) {
        tape tp;
        return tp.val(build(tp, p))(0);
    };
    tape tp;
    value loss = build(tp, params);
    tp.backward(loss);
    std::vector<tensor> analytic;
    for (std::size_t i = 0; i < params.size(); ++i) {
        analytic.push_back(tp.grad(value{static_cast<int>(i)}));
    }
    CHECK(grad_check(f, params, analytic) < 1e-4);
}

TEST_CASE("grad_check rejects non-finite objectives") {
    tensor theta = tensor::vec({1.0});
    tensor analytic = tensor::vec({0.0});
    CHECK_THROWS_AS(
        grad_check([](const tensor&) { return std::nan(""); }, theta,
                   analytic),
        numeric_error);
}
