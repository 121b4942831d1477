#include "esg/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "esg/error.hpp"

namespace esg {

namespace {

tensor uniform_fan_in(std::vector<int> dims, int fan_in, counter_rng& rng) {
    double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return tensor::uniform(std::move(dims), -k, k, rng);
}

gru_weights init_gru(int in_dim, int hidden, counter_rng& rng) {
    gru_weights g;
    for (tensor* w : {&g.w_z, &g.w_r, &g.w_h}) {
        *w = uniform_fan_in({hidden, in_dim}, in_dim, rng);
    }
    for (tensor* u : {&g.u_z, &g.u_r, &g.u_h}) {
        *u = uniform_fan_in({hidden, hidden}, hidden, rng);
    }
    for (tensor* b : {&g.b_z, &g.b_r, &g.b_h}) {
        *b = uniform_fan_in({hidden}, in_dim, rng);
    }
    return g;
}

void collect_gru(const std::string& prefix, gru_weights& g,
                 std::vector<std::pair<std::string, tensor*>>& out) {
    out.emplace_back(prefix + ".w_z", &g.w_z);
    out.emplace_back(prefix + ".u_z", &g.u_z);
    out.emplace_back(prefix + ".b_z", &g.b_z);
    out.emplace_back(prefix + ".w_r", &g.w_r);
    out.emplace_back(prefix + ".u_r", &g.u_r);
    out.emplace_back(prefix + ".b_r", &g.b_r);
    out.emplace_back(prefix + ".w_h", &g.w_h);
    out.emplace_back(prefix + ".u_h", &g.u_h);
    out.emplace_back(prefix + ".b_h", &g.b_h);
}

}  // namespace

model_params model_params::init(const model_dims& dims, std::uint64_t seed) {
    if (dims.feat_dim < 1 || dims.enc_hidden < 1 || dims.dec_hidden < 1 ||
        dims.mlp_hidden1 < 1 || dims.mlp_hidden2 < 1) {
        throw validation_error("model dims must be positive");
    }
    counter_rng rng(seed, 0x1917);
    model_params p;
    p.dims = dims;
    int d = dims.feat_dim;
    int h = dims.enc_hidden;
    int ctx = dims.ctx_dim();
    int hd = dims.dec_hidden;
    p.enc_fwd = init_gru(d, h, rng);
    p.enc_bwd = init_gru(d, h, rng);
    p.in_proj_w = uniform_fan_in({ctx, d}, d, rng);
    p.in_proj_b = uniform_fan_in({ctx}, d, rng);
    p.dec = init_gru(ctx, hd, rng);
    p.init_w = uniform_fan_in({hd, ctx}, ctx, rng);
    p.init_b = uniform_fan_in({hd}, ctx, rng);
    p.mlp_w1 = uniform_fan_in({dims.mlp_hidden1, hd + ctx}, hd + ctx, rng);
    p.mlp_b1 = uniform_fan_in({dims.mlp_hidden1}, hd + ctx, rng);
    p.mlp_w2 =
        uniform_fan_in({dims.mlp_hidden2, dims.mlp_hidden1}, dims.mlp_hidden1,
                       rng);
    p.mlp_b2 = uniform_fan_in({dims.mlp_hidden2}, dims.mlp_hidden1, rng);
    p.mlp_w3 = uniform_fan_in({1, dims.mlp_hidden2}, dims.mlp_hidden2, rng);
    p.mlp_b3 = uniform_fan_in({1}, dims.mlp_hidden2, rng);
    return p;
}

model_params model_params::zeros_like(const model_params& other) {
    model_params p = other;
    for (auto& [name, t] : named_tensors(p)) {
        t->fill(0.0);
    }
    return p;
}

std::vector<std::pair<std::string, tensor*>> named_tensors(model_params& p) {
    std::vector<std::pair<std::string, tensor*>> out;
    collect_gru("enc_fwd", p.enc_fwd, out);
    collect_gru("enc_bwd", p.enc_bwd, out);
    out.emplace_back("in_proj.w", &p.in_proj_w);
    out.emplace_back("in_proj.b", &p.in_proj_b);
    collect_gru("dec", p.dec, out);
    out.emplace_back("init_proj.w", &p.init_w);
    out.emplace_back("init_proj.b", &p.init_b);
    out.emplace_back("mlp.w1", &p.mlp_w1);
    out.emplace_back("mlp.b1", &p.mlp_b1);
    out.emplace_back("mlp.w2", &p.mlp_w2);
    out.emplace_back("mlp.b2", &p.mlp_b2);
    out.emplace_back("mlp.w3", &p.mlp_w3);
    out.emplace_back("mlp.b3", &p.mlp_b3);
    return out;
}

std::vector<std::pair<std::string, const tensor*>> named_tensors(
    const model_params& p) {
    auto mut = named_tensors(const_cast<model_params&>(p));
    std::vector<std::pair<std::string, const tensor*>> out;
    out.reserve(mut.size());
    for (auto& [name, t] : mut) {
        out.emplace_back(name, t);
    }
    return out;
}

bool params_equal(const model_params& a, const model_params& b) {
    if (!(a.dims == b.dims)) {
        return false;
    }
    auto ta = named_tensors(a);
    auto tb = named_tensors(b);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].second->dims != tb[i].second->dims ||
            ta[i].second->v != tb[i].second->v) {
            return false;
        }
    }
    return true;
}

// ---- checkpoint io ----

namespace {

constexpr char kMagic[4] = {'E', 'S', 'G', 'M'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t x) {
    out.push_back(static_cast<char>(x & 0xff));
    out.push_back(static_cast<char>((x >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t x) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
    }
}

struct reader {
    const unsigned char* p;
    std::size_t n;
    std::size_t pos = 0;
    std::string path;

    void need(std::size_t k) const {
        if (pos + k > n) {
            throw io_error("checkpoint truncated: " + path);
        }
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t x = static_cast<std::uint16_t>(
            p[pos] | (static_cast<std::uint16_t>(p[pos + 1]) << 8));
        pos += 2;
        return x;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t x = 0;
        for (int i = 0; i < 4; ++i) {
            x |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        }
        pos += 4;
        return x;
    }
    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }
    std::string str(std::size_t k) {
        need(k);
        std::string s(reinterpret_cast<const char*>(p + pos), k);
        pos += k;
        return s;
    }
};

}  // namespace

void save_checkpoint(const model_params& p, const std::string& path) {
    auto tensors = named_tensors(p);
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u16(out, static_cast<std::uint16_t>(name.size()));
        out.append(name);
        out.push_back(static_cast<char>(t->rank()));
        for (int d : t->dims) {
            put_u32(out, static_cast<std::uint32_t>(d));
        }
        for (double x : t->v) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
        }
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) {
        throw io_error("cannot open " + path + " for writing");
    }
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) {
        throw io_error("write failure on " + path);
    }
}

model_params load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw io_error("cannot open checkpoint " + path);
    }
    std::string raw((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    if (in.bad()) {
        throw io_error("read failure on " + path);
    }
    if (raw.size() < 12 ||
        std::memcmp(raw.data(), kMagic, 4) != 0) {
        throw format_error("bad magic in checkpoint " + path);
    }
    reader r{reinterpret_cast<const unsigned char*>(raw.data()), raw.size(),
             4, path};
    std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw format_error("unsupported checkpoint version " +
                           std::to_string(version) + " in " + path);
    }
    std::uint32_t count = r.u32();
    std::map<std::string, tensor> loaded;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u16());
        int rank = r.u8();
        std::vector<int> dims;
        long total = 1;
        for (int d = 0; d < rank; ++d) {
            std::uint32_t x = r.u32();
            if (x < 1) {
                throw format_error("zero dim for tensor " + name + " in " +
                                   path);
            }
            dims.push_back(static_cast<int>(x));
            total *= x;
        }
        tensor t = tensor::zeros(dims);
        for (long j = 0; j < total; ++j) {
            float f = std::bit_cast<float>(r.u32());
            if (!std::isfinite(f)) {
                throw validation_error("non-finite value in tensor " + name +
                                       " of " + path);
            }
            t.v[static_cast<std::size_t>(j)] = f;
        }
        loaded.emplace(std::move(name), std::move(t));
    }
    if (r.pos != r.n) {
        throw format_error("trailing bytes in checkpoint " + path);
    }

    // recover dims from the tensors themselves
    auto find = [&loaded, &path](const std::string& name) -> tensor& {
        auto it = loaded.find(name);
        if (it == loaded.end()) {
            throw format_error("checkpoint " + path + " missing tensor " +
                               name);
        }
        return it->second;
    };
    model_dims dims;
    dims.feat_dim = find("enc_fwd.w_z").cols();
    dims.enc_hidden = find("enc_fwd.w_z").rows();
    dims.dec_hidden = find("dec.w_z").rows();
    dims.mlp_hidden1 = find("mlp.w1").rows();
    dims.mlp_hidden2 = find("mlp.w2").rows();

    model_params p = model_params::init(dims, 0);
    auto tensors = named_tensors(p);
    if (tensors.size() != loaded.size()) {
        throw format_error("checkpoint " + path + " has " +
                           std::to_string(loaded.size()) +
                           " tensors, expected " +
                           std::to_string(tensors.size()));
    }
    for (auto& [name, t] : tensors) {
        tensor& src = find(name);
        if (src.dims != t->dims) {
            throw format_error("checkpoint " + path + ": tensor " + name +
                               " has dims " + src.dims_str() + ", expected " +
                               t->dims_str());
        }
        *t = std::move(src);
    }
    return p;
}

// ---- forward graph ----

namespace {

gru_leaves register_gru(tape& tp, const gru_weights& g) {
    gru_leaves l;
    l.w_z = tp.leaf(g.w_z);
    l.u_z = tp.leaf(g.u_z);
    l.b_z = tp.leaf(g.b_z);
    l.w_r = tp.leaf(g.w_r);
    l.u_r = tp.leaf(g.u_r);
    l.b_r = tp.leaf(g.b_r);
    l.w_h = tp.leaf(g.w_h);
    l.u_h = tp.leaf(g.u_h);
    l.b_h = tp.leaf(g.b_h);
    return l;
}

void collect_gru_leaves(const gru_leaves& g, std::vector<value>& out) {
    out.insert(out.end(), {g.w_z, g.u_z, g.b_z, g.w_r, g.u_r, g.b_r, g.w_h,
                           g.u_h, g.b_h});
}

}  // namespace

param_leaves register_params(tape& tp, const model_params& p) {
    param_leaves l;
    l.enc_fwd = register_gru(tp, p.enc_fwd);
    l.enc_bwd = register_gru(tp, p.enc_bwd);
    l.in_proj_w = tp.leaf(p.in_proj_w);
    l.in_proj_b = tp.leaf(p.in_proj_b);
    l.dec = register_gru(tp, p.dec);
    l.init_w = tp.leaf(p.init_w);
    l.init_b = tp.leaf(p.init_b);
    l.mlp_w1 = tp.leaf(p.mlp_w1);
    l.mlp_b1 = tp.leaf(p.mlp_b1);
    l.mlp_w2 = tp.leaf(p.mlp_w2);
    l.mlp_b2 = tp.leaf(p.mlp_b2);
    l.mlp_w3 = tp.leaf(p.mlp_w3);
    l.mlp_b3 = tp.leaf(p.mlp_b3);
    return l;
}

std::vector<value> leaf_list(const param_leaves& l) {
    std::vector<value> out;
    collect_gru_leaves(l.enc_fwd, out);
    collect_gru_leaves(l.enc_bwd, out);
    out.insert(out.end(), {l.in_proj_w, l.in_proj_b});
    collect_gru_leaves(l.dec, out);
    out.insert(out.end(), {l.init_w, l.init_b, l.mlp_w1, l.mlp_b1, l.mlp_w2,
                           l.mlp_b2, l.mlp_w3, l.mlp_b3});
    return out;
}

void accumulate_grads(const tape& tp, const param_leaves& l,
                      model_params& acc) {
    auto tensors = named_tensors(acc);
    auto handles = leaf_list(l);
    if (tensors.size() != handles.size()) {
        throw usage_error("gradient accumulator layout mismatch");
    }
    for (std::size_t i = 0; i < handles.size(); ++i) {
        const tensor& g = tp.grad(handles[i]);
        tensor& dst = *tensors[i].second;
        check_same_dims(g, dst, "accumulate_grads");
        for (int j = 0; j < g.size(); ++j) {
            dst.v[static_cast<std::size_t>(j)] += g.v[static_cast<std::size_t>(j)];
        }
    }
}

value gru_cell(tape& tp, const gru_leaves& g, value x, value h_prev) {
    value z = tp.sigmoid(tp.add(tp.affine(g.w_z, g.b_z, x),
                                tp.matvec(g.u_z, h_prev)));
    value r = tp.sigmoid(tp.add(tp.affine(g.w_r, g.b_r, x),
                                tp.matvec(g.u_r, h_prev)));
    value hc = tp.tanh_fn(tp.add(tp.affine(g.w_h, g.b_h, x),
                                 tp.matvec(g.u_h, tp.mul(r, h_prev))));
    // (1-z)*h + z*hc
    return tp.add(h_prev, tp.mul(z, tp.sub(hc, h_prev)));
}

value encode_video(tape& tp, const param_leaves& l,
                   const segment_features& feats) {
    int t_count = feats.t_count;
    int d = feats.dim;
    if (t_count < 1 || d != tp.val(l.in_proj_w).cols()) {
        throw shape_error("encode_video: features " + std::to_string(t_count) +
                          "x" + std::to_string(d) + " do not match model");
    }
    int h = tp.val(l.enc_fwd.w_z).rows();

    std::vector<value> rows(static_cast<std::size_t>(t_count));
    tensor feat_mat = tensor::zeros({t_count, d});
    for (int t = 0; t < t_count; ++t) {
        tensor row = tensor::zeros({d});
        for (int j = 0; j < d; ++j) {
            row.v[static_cast<std::size_t>(j)] = feats.at(t, j);
            feat_mat(t, j) = feats.at(t, j);
        }
        rows[static_cast<std::size_t>(t)] = tp.constant(std::move(row));
    }
    value feat_const = tp.constant(std::move(feat_mat));

    std::vector<value> h_fwd(static_cast<std::size_t>(t_count));
    value state = tp.constant(tensor::zeros({h}));
    for (int t = 0; t < t_count; ++t) {
        state = gru_cell(tp, l.enc_fwd, rows[static_cast<std::size_t>(t)],
                         state);
        h_fwd[static_cast<std::size_t>(t)] = state;
    }
    std::vector<value> h_bwd(static_cast<std::size_t>(t_count));
    state = tp.constant(tensor::zeros({h}));
    for (int t = t_count - 1; t >= 0; --t) {
        state = gru_cell(tp, l.enc_bwd, rows[static_cast<std::size_t>(t)],
                         state);
        h_bwd[static_cast<std::size_t>(t)] = state;
    }

    value both = tp.concat_cols(tp.stack_rows(h_fwd), tp.stack_rows(h_bwd));
    value proj = tp.linear_rows(feat_const, l.in_proj_w, l.in_proj_b);
    return tp.relu(tp.add(both, proj));
}

value init_decoder_state(tape& tp, const param_leaves& l, value ctx) {
    return tp.tanh_fn(tp.affine(l.init_w, l.init_b, tp.mean_rows(ctx)));
}

value indicator_embed(tape& tp, value ctx, const event_indicator& e_prev) {
    return tp.masked_mean_rows(ctx, e_prev);
}

decoder_out decoder_step(tape& tp, const param_leaves& l,
                         const event_indicator& e_prev, value h_prev,
                         value ctx, const forward_options& opt) {
    int t_count = tp.val(ctx).rows();
    if (static_cast<int>(e_prev.size()) != t_count) {
        throw shape_error("decoder_step: indicator length " +
                          std::to_string(e_prev.size()) + " vs T " +
                          std::to_string(t_count));
    }
    value embed = indicator_embed(tp, ctx, e_prev);
    if (opt.dropout_rng && opt.dropout > 0.0) {
        embed = tp.dropout(embed, opt.dropout, *opt.dropout_rng);
    }
    value h = gru_cell(tp, l.dec, embed, h_prev);

    value rows = tp.concat_cols(tp.broadcast_rows(h, t_count), ctx);
    if (opt.dropout_rng && opt.dropout > 0.0) {
        rows = tp.dropout(rows, opt.dropout, *opt.dropout_rng);
    }
    value a1 = tp.relu(tp.linear_rows(rows, l.mlp_w1, l.mlp_b1));
    value a2 = tp.relu(tp.linear_rows(a1, l.mlp_w2, l.mlp_b2));
    value logits = tp.flatten(tp.linear_rows(a2, l.mlp_w3, l.mlp_b3));
    return decoder_out{h, tp.sigmoid(logits)};
}

value sequence_nll(tape& tp, const param_leaves& l,
                   const segment_features& feats,
                   const std::vector<event_interval>& gt_events,
                   int max_event_len, const forward_options& opt) {
    int k = static_cast<int>(gt_events.size());
    if (k < 1 || k > max_event_len) {
        throw validation_error("event count " + std::to_string(k) +
                               " outside [1, " +
                               std::to_string(max_event_len) + "]");
    }
    for (const event_interval& e : gt_events) {
        check_interval(e, feats.t_count);
    }
    value ctx = encode_video(tp, l, feats);
    value h = init_decoder_state(tp, l, ctx);
    event_indicator e_prev(static_cast<std::size_t>(feats.t_count), 0);
    value total{};
    for (int i = 0; i <= k; ++i) {
        decoder_out step = decoder_step(tp, l, e_prev, h, ctx, opt);
        h = step.h;
        event_indicator target =
            i < k ? interval_to_indicator(gt_events[static_cast<std::size_t>(i)],
                                          feats.t_count)
                  : event_indicator(static_cast<std::size_t>(feats.t_count), 0);
        tensor target_t = tensor::zeros({feats.t_count});
        for (int t = 0; t < feats.t_count; ++t) {
            target_t.v[static_cast<std::size_t>(t)] =
                target[static_cast<std::size_t>(t)] ? 1.0 : 0.0;
        }
        value loss = tp.bce(step.p, target_t);
        total = total.valid() ? tp.add(total, loss) : loss;
        e_prev = std::move(target);
    }
    return total;
}

std::optional<event_interval> extract_interval(const std::vector<double>& p,
                                               double threshold) {
    int first = -1;
    int last = -1;
    for (int t = 0; t < static_cast<int>(p.size()); ++t) {
        if (p[static_cast<std::size_t>(t)] >= threshold) {
            if (first < 0) {
                first = t;
            }
            last = t;
        }
    }
    if (first < 0) {
        return std::nullopt;
    }
    return event_interval{first, last};
}

}  // namespace esg
