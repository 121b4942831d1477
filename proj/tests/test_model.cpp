#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "esg/error.hpp"
#include "esg/grad_check.hpp"
#include "esg/model.hpp"

using namespace esg;
namespace fs = std::filesystem;

namespace {

// scalar-by-scalar GRU step, written independently of the tape ops
std::vector<double> gru_reference(const gru_weights& g,
                                  const std::vector<double>& x,
                                  const std::vector<double>& h) {
    int hidden = g.u_z.rows();
    int in = g.w_z.cols();
    auto gate = [&](const tensor& w, const tensor& u, const tensor& b,
                    const std::vector<double>& hin) {
        std::vector<double> out(static_cast<std::size_t>(hidden));
        for (int i = 0; i < hidden; ++i) {
            double s = b(i);
            for (int j = 0; j < in; ++j) {
                s += w(i, j) * x[static_cast<std::size_t>(j)];
            }
            for (int j = 0; j < hidden; ++j) {
                s += u(i, j) * hin[static_cast<std::size_t>(j)];
            }
            out[static_cast<std::size_t>(i)] = s;
        }
        return out;
    };
    std::vector<double> z = gate(g.w_z, g.u_z, g.b_z, h);
    std::vector<double> r = gate(g.w_r, g.u_r, g.b_r, h);
    for (int i = 0; i < hidden; ++i) {
        z[static_cast<std::size_t>(i)] =
            1.0 / (1.0 + std::exp(-z[static_cast<std::size_t>(i)]));
        r[static_cast<std::size_t>(i)] =
            1.0 / (1.0 + std::exp(-r[static_cast<std::size_t>(i)]));
    }
    std::vector<double> rh(static_cast<std::size_t>(hidden));
    for (int i = 0; i < hidden; ++i) {
        rh[static_cast<std::size_t>(i)] =
            r[static_cast<std::size_t>(i)] * h[static_cast<std::size_t>(i)];
    }
    std::vector<double> hc = gate(g.w_h, g.u_h, g.b_h, rh);
    std::vector<double> out(static_cast<std::size_t>(hidden));
    for (int i = 0; i < hidden; ++i) {
        double c = std::tanh(hc[static_cast<std::size_t>(i)]);
        double zi = z[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(i)] =
            (1.0 - zi) * h[static_cast<std::size_t>(i)] + zi * c;
    }
    return out;
}

model_dims toy_dims(int d = 3, int h = 4) {
    model_dims dims;
    dims.feat_dim = d;
    dims.enc_hidden = h;
    dims.dec_hidden = h;
    dims.mlp_hidden1 = 5;
    dims.mlp_hidden2 = 3;
    return dims;
}

segment_features make_feats(const std::vector<std::vector<float>>& rows) {
    segment_features f;
    f.video_id = "toy";
    f.t_count = static_cast<int>(rows.size());
    f.dim = static_cast<int>(rows[0].size());
    for (const auto& r : rows) {
        f.values.insert(f.values.end(), r.begin(), r.end());
    }
    return f;
}

segment_features random_feats(int t, int d, std::uint64_t seed) {
    counter_rng rng(seed, 77);
    segment_features f;
    f.video_id = "rand";
    f.t_count = t;
    f.dim = d;
    f.values.resize(static_cast<std::size_t>(t) * d);
    for (float& x : f.values) {
        x = static_cast<float>(rng.next_real(-1.0, 1.0));
    }
    return f;
}

std::vector<tensor> params_to_vec(const model_params& p) {
    std::vector<tensor> out;
    for (const auto& [name, t] : named_tensors(p)) {
        out.push_back(*t);
    }
    return out;
}

void vec_to_params(const std::vector<tensor>& v, model_params& p) {
    auto named = named_tensors(p);
    for (std::size_t i = 0; i < named.size(); ++i) {
        *named[i].second = v[i];
    }
}

struct temp_dir {
    fs::path path;
    temp_dir() {
        path = fs::temp_directory_path() /
               ("esg_model_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~temp_dir() { fs::remove_all(path); }
    static inline int counter = 0;
};

}  // namespace

TEST_CASE("gru_cell examples") {
    model_dims dims = toy_dims(2, 2);
    model_params p = model_params::init(dims, 1);
    for (auto& [name, t] : named_tensors(p)) {
        t->fill(0.0);
    }
    tape tp;
    param_leaves l = register_params(tp, p);
    value x = tp.constant(tensor::vec({0.3, -0.4}));
    value h = tp.constant(tensor::vec({1.0, -1.0}));
    value out = gru_cell(tp, l.enc_fwd, x, h);
    // all-zero weights: z = 0.5, candidate = 0 -> h/2
    CHECK(tp.val(out)(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tp.val(out)(1) == doctest::Approx(-0.5).epsilon(1e-15));

    value h0 = tp.constant(tensor::zeros({2}));
    value out0 = gru_cell(tp, l.enc_fwd, x, h0);
    CHECK(tp.val(out0)(0) == 0.0);
    CHECK(tp.val(out0)(1) == 0.0);
}

TEST_CASE("gru_cell matches the scalar reference") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        model_dims dims = toy_dims(3, 4);
        model_params p = model_params::init(dims, seed);
        counter_rng rng(seed, 5);
        tensor x = tensor::normal({3}, 0.5, rng);
        tensor h = tensor::normal({4}, 0.5, rng);
        tape tp;
        param_leaves l = register_params(tp, p);
        value out =
            gru_cell(tp, l.enc_fwd, tp.constant(x), tp.constant(h));
        std::vector<double> ref = gru_reference(p.enc_fwd, x.v, h.v);
        for (int i = 0; i < 4; ++i) {
            CHECK(tp.val(out)(i) ==
                  doctest::Approx(ref[static_cast<std::size_t>(i)])
                      .epsilon(1e-10));
        }
    }
}

TEST_CASE("encode_video with zero recurrences and identity projection") {
    // D = 2H so the projection can be the identity
    model_dims dims = toy_dims(2, 1);
    model_params p = model_params::init(dims, 3);
    for (auto& [name, t] : named_tensors(p)) {
        t->fill(0.0);
    }
    p.in_proj_w = tensor::identity(2);
    segment_features f = make_feats({{0.5f, 1.0f}, {2.0f, 0.25f}, {0.0f, 3.0f}});
    tape tp;
    param_leaves l = register_params(tp, p);
    value ctx = encode_video(tp, l, f);
    const tensor& c = tp.val(ctx);
    REQUIRE(c.rows() == 3);
    REQUIRE(c.cols() == 2);
    for (int t = 0; t < 3; ++t) {
        for (int d = 0; d < 2; ++d) {
            CHECK(c(t, d) == doctest::Approx(f.at(t, d)).epsilon(1e-12));
        }
    }
}

TEST_CASE("reversing the video swaps the encoder directions") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 7);
    model_params swapped = p;
    std::swap(swapped.enc_fwd, swapped.enc_bwd);
    // the residual projection feeds [fwd block; bwd block]: swap its
    // row blocks along with the direction weights
    int h = dims.enc_hidden;
    for (int j = 0; j < h; ++j) {
        for (int d = 0; d < dims.feat_dim; ++d) {
            swapped.in_proj_w(j, d) = p.in_proj_w(h + j, d);
            swapped.in_proj_w(h + j, d) = p.in_proj_w(j, d);
        }
        swapped.in_proj_b(j) = p.in_proj_b(h + j);
        swapped.in_proj_b(h + j) = p.in_proj_b(j);
    }

    segment_features f = random_feats(6, 3, 11);
    segment_features rev = reverse_segments(f);

    tape tp1;
    value ctx1 = encode_video(tp1, register_params(tp1, p), f);
    tape tp2;
    value ctx2 = encode_video(tp2, register_params(tp2, swapped), rev);
    const tensor& a = tp1.val(ctx1);
    const tensor& b = tp2.val(ctx2);
    for (int t = 0; t < 6; ++t) {
        for (int j = 0; j < h; ++j) {
            // forward block of one matches backward block of the other,
            // read in reverse row order
            CHECK(a(t, j) ==
                  doctest::Approx(b(5 - t, h + j)).epsilon(1e-12));
            CHECK(a(t, h + j) ==
                  doctest::Approx(b(5 - t, j)).epsilon(1e-12));
        }
    }
}

TEST_CASE("encode_video handles T = 1") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 5);
    segment_features f = random_feats(1, 3, 1);
    tape tp;
    value ctx = encode_video(tp, register_params(tp, p), f);
    CHECK(tp.val(ctx).rows() == 1);
    CHECK(tp.val(ctx).cols() == 8);
    CHECK(tp.val(ctx).all_finite());
}

TEST_CASE("indicator_embed conventions") {
    tape tp;
    tensor ctx_t = tensor::mat(3, 2, {1, 2, 3, 4, 5, 6});
    value ctx = tp.constant(ctx_t);
    value zero = indicator_embed(tp, ctx, {0, 0, 0});
    CHECK(tp.val(zero)(0) == 0.0);
    CHECK(tp.val(zero)(1) == 0.0);
    value all = indicator_embed(tp, ctx, {1, 1, 1});
    CHECK(tp.val(all)(0) == doctest::Approx(3.0));
    CHECK(tp.val(all)(1) == doctest::Approx(4.0));
    value one = indicator_embed(tp, ctx, {0, 1, 0});
    CHECK(tp.val(one)(0) == 3.0);
    CHECK(tp.val(one)(1) == 4.0);
}

TEST_CASE("decoder_step basics") {
    model_dims dims = toy_dims(3, 4);
    for (int t_count : {1, 7, 33}) {
        model_params p = model_params::init(dims, 9);
        p.mlp_w3.fill(0.0);
        p.mlp_b3.fill(0.0);
        segment_features f = random_feats(t_count, 3, 2);
        tape tp;
        param_leaves l = register_params(tp, p);
        value ctx = encode_video(tp, l, f);
        value h0 = init_decoder_state(tp, l, ctx);
        event_indicator sos(static_cast<std::size_t>(t_count), 0);
        decoder_out out = decoder_step(tp, l, sos, h0, ctx);
        REQUIRE(tp.val(out.p).size() == t_count);
        for (int t = 0; t < t_count; ++t) {
            CHECK(tp.val(out.p)(t) == 0.5);  // sigma(0) with zero final layer
        }
    }
}

TEST_CASE("per-segment head commutes with segment permutation") {
    // zero recurrences and identity projection make ctx = features, and
    // an all-zero previous indicator keeps h fixed
    model_dims dims = toy_dims(2, 1);
    model_params p = model_params::init(dims, 13);
    gru_weights zero_gru = p.enc_fwd;
    for (tensor* t : {&zero_gru.w_z, &zero_gru.u_z, &zero_gru.b_z,
                      &zero_gru.w_r, &zero_gru.u_r, &zero_gru.b_r,
                      &zero_gru.w_h, &zero_gru.u_h, &zero_gru.b_h}) {
        t->fill(0.0);
    }
    p.enc_fwd = zero_gru;
    p.enc_bwd = zero_gru;
    p.in_proj_w = tensor::identity(2);
    p.in_proj_b.fill(0.0);

    segment_features f = make_feats({{0.1f, 0.9f}, {1.2f, 0.3f}, {0.6f, 0.6f},
                                     {2.0f, 0.0f}});
    segment_features perm = make_feats({{2.0f, 0.0f}, {0.1f, 0.9f},
                                        {0.6f, 0.6f}, {1.2f, 0.3f}});
    int map[4] = {3, 0, 2, 1};  // perm row i came from f row map[i]

    auto head = [&p](const segment_features& feats) {
        tape tp;
        param_leaves l = register_params(tp, p);
        value ctx = encode_video(tp, l, feats);
        // fixed decoder state: meanpool is permutation invariant
        value h0 = init_decoder_state(tp, l, ctx);
        event_indicator sos(static_cast<std::size_t>(feats.t_count), 0);
        decoder_out out = decoder_step(tp, l, sos, h0, ctx);
        return tp.val(out.p).v;
    };
    std::vector<double> pa = head(f);
    std::vector<double> pb = head(perm);
    for (int i = 0; i < 4; ++i) {
        CHECK(pb[static_cast<std::size_t>(i)] ==
              doctest::Approx(pa[static_cast<std::size_t>(map[i])])
                  .epsilon(1e-12));
    }
}

TEST_CASE("init_decoder_state") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 17);
    p.init_w.fill(0.0);
    p.init_b.fill(0.0);
    segment_features f = random_feats(5, 3, 3);
    {
        tape tp;
        param_leaves l = register_params(tp, p);
        value h0 = init_decoder_state(tp, l, encode_video(tp, l, f));
        for (int i = 0; i < 4; ++i) {
            CHECK(tp.val(h0)(i) == 0.0);
        }
    }
    {
        model_params q = model_params::init(dims, 18);
        tape tp;
        param_leaves l = register_params(tp, q);
        value h0 = init_decoder_state(tp, l, encode_video(tp, l, f));
        for (int i = 0; i < 4; ++i) {
            CHECK(tp.val(h0)(i) > -1.0);
            CHECK(tp.val(h0)(i) < 1.0);
        }
    }
    {
        // constant context rows: meanpool equals that row
        tape tp;
        tensor row = tensor::mat(3, 2, {1.5, -2.0, 1.5, -2.0, 1.5, -2.0});
        value mp = tp.mean_rows(tp.constant(row));
        CHECK(tp.val(mp)(0) == doctest::Approx(1.5));
        CHECK(tp.val(mp)(1) == doctest::Approx(-2.0));
    }
}

TEST_CASE("extract_interval rules") {
    auto r1 = extract_interval({0.1, 0.6, 0.7, 0.2});
    REQUIRE(r1.has_value());
    CHECK(*r1 == event_interval{1, 2});
    auto r2 = extract_interval({0.6, 0.1, 0.7});
    REQUIRE(r2.has_value());
    CHECK(*r2 == event_interval{0, 2});  // interior gap bridged
    CHECK(!extract_interval({0.4, 0.2, 0.49}).has_value());
    // threshold is inclusive
    auto r3 = extract_interval({0.5, 0.1});
    REQUIRE(r3.has_value());
    CHECK(*r3 == event_interval{0, 0});
}

TEST_CASE("extract_interval inverts indicator casting") {
    double eps = 1e-3;
    for (int t_count = 1; t_count <= 6; ++t_count) {
        for (int t0 = 0; t0 < t_count; ++t0) {
            for (int t1 = t0; t1 < t_count; ++t1) {
                event_indicator ind =
                    interval_to_indicator({t0, t1}, t_count);
                std::vector<double> p(ind.size());
                for (std::size_t i = 0; i < ind.size(); ++i) {
                    p[i] = ind[i] ? 1.0 - eps : eps;
                }
                auto back = extract_interval(p);
                REQUIRE(back.has_value());
                CHECK(*back == event_interval{t0, t1});
            }
        }
    }
}

TEST_CASE("sequence_nll with a dead head equals (K+1) ln 2") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 23);
    p.mlp_w3.fill(0.0);
    p.mlp_b3.fill(0.0);
    segment_features f = random_feats(6, 3, 8);
    std::vector<event_interval> events{{0, 1}, {3, 5}};
    tape tp;
    param_leaves l = register_params(tp, p);
    value loss = sequence_nll(tp, l, f, events, 8);
    CHECK(tp.val(loss)(0) ==
          doctest::Approx(3.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sequence_nll validates the event count") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 29);
    segment_features f = random_feats(6, 3, 9);
    tape tp;
    param_leaves l = register_params(tp, p);
    CHECK_THROWS_AS(sequence_nll(tp, l, f, {}, 8), validation_error);
    std::vector<event_interval> nine(9, event_interval{0, 1});
    CHECK_THROWS_AS(sequence_nll(tp, l, f, nine, 8), validation_error);
    CHECK_THROWS_AS(sequence_nll(tp, l, f, {{4, 9}}, 8), validation_error);
}

TEST_CASE("sequence_nll is nonnegative and respects the shape contract") {
    counter_rng rng(31, 0);
    for (int trial = 0; trial < 8; ++trial) {
        int t_count = static_cast<int>(rng.next_int(1, 24));
        int d = static_cast<int>(rng.next_int(2, 6));
        model_dims dims = toy_dims(d, 3);
        model_params p = model_params::init(dims, rng.next_u64());
        segment_features f = random_feats(t_count, d, rng.next_u64());
        int t0 = static_cast<int>(rng.next_int(0, t_count - 1));
        int t1 = static_cast<int>(rng.next_int(t0, t_count - 1));
        tape tp;
        param_leaves l = register_params(tp, p);
        value ctx = encode_video(tp, l, f);
        CHECK(tp.val(ctx).rows() == t_count);
        CHECK(tp.val(ctx).cols() == dims.ctx_dim());
        decoder_out out = decoder_step(
            tp, l, event_indicator(static_cast<std::size_t>(t_count), 0),
            init_decoder_state(tp, l, ctx), ctx);
        CHECK(tp.val(out.p).size() == t_count);
        for (int i = 0; i < t_count; ++i) {
            CHECK(tp.val(out.p)(i) >= 0.0);
            CHECK(tp.val(out.p)(i) <= 1.0);
        }
        value loss = sequence_nll(tp, l, f, {{t0, t1}}, 8);
        CHECK(tp.val(loss)(0) >= 0.0);
    }
}

TEST_CASE("sequence_nll gradient matches finite differences") {
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 34);
    segment_features f = random_feats(5, 3, 34);
    std::vector<event_interval> events{{0, 1}, {3, 4}};

    tape tp;
    param_leaves l = register_params(tp, p);
    value loss = sequence_nll(tp, l, f, events, 8);
    tp.backward(loss);
    model_params grads = model_params::zeros_like(p);
    accumulate_grads(tp, l, grads);

    auto f_eval = [&](const std::vector<tensor>& vec) {
        model_params q = p;
        vec_to_params(vec, q);
        tape t2;
        param_leaves l2 = register_params(t2, q);
        return t2.val(sequence_nll(t2, l2, f, events, 8))(0);
    };
    double err = grad_check(f_eval, params_to_vec(p), params_to_vec(grads));
    CHECK(err < 1e-4);
}

TEST_CASE("checkpoint round trip") {
    temp_dir dir;
    model_dims dims = toy_dims(3, 4);
    model_params p = model_params::init(dims, 41);
    fs::path a = dir.path / "a.esgm";
    fs::path b = dir.path / "b.esgm";
    save_checkpoint(p, a.string());
    model_params q = load_checkpoint(a.string());
    CHECK(q.dims == p.dims);
    save_checkpoint(q, b.string());
    // float32 on disk: the second generation is a fixed point
    std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(fa)),
                   std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(fb)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    // loaded values equal the float32 cast of the originals
    auto pa = named_tensors(p);
    auto qa = named_tensors(q);
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (int j = 0; j < pa[i].second->size(); ++j) {
            CHECK(static_cast<double>(static_cast<float>(
                      pa[i].second->v[static_cast<std::size_t>(j)])) ==
                  qa[i].second->v[static_cast<std::size_t>(j)]);
        }
    }
}

TEST_CASE("checkpoint error paths") {
    temp_dir dir;
    CHECK_THROWS_AS(load_checkpoint((dir.path / "missing.esgm").string()),
                    io_error);
    fs::path bad = dir.path / "bad.esgm";
    std::ofstream(bad, std::ios::binary) << "NOPE" << std::string(20, '\0');
    CHECK_THROWS_AS(load_checkpoint(bad.string()), format_error);

    model_params p = model_params::init(toy_dims(3, 4), 2);
    fs::path good = dir.path / "good.esgm";
    save_checkpoint(p, good.string());
    std::ifstream in(good, std::ios::binary);
    std::string raw((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    raw.resize(raw.size() / 2);
    fs::path trunc = dir.path / "trunc.esgm";
    std::ofstream(trunc, std::ios::binary) << raw;
    CHECK_THROWS_AS(load_checkpoint(trunc.string()), io_error);
}
