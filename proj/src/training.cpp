#include "esg/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include <json.hpp>

#include "esg/error.hpp"
#include "esg/evaluation.hpp"
#include "esg/inference.hpp"

namespace esg {

using nlohmann::json;

void validate(const train_config& cfg) {
    if (cfg.learning_rate <= 0.0 || cfg.epochs < 1 || cfg.batch_size < 1 ||
        cfg.max_event_len < 1 || cfg.grad_clip_norm <= 0.0 ||
        cfg.dropout < 0.0 || cfg.dropout >= 1.0 || cfg.beta1 <= 0.0 ||
        cfg.beta1 >= 1.0 || cfg.beta2 <= 0.0 || cfg.beta2 >= 1.0 ||
        cfg.epsilon <= 0.0 || cfg.val_fraction < 0.0 ||
        cfg.val_fraction >= 1.0) {
        throw validation_error("invalid training configuration");
    }
}

void save_report(const train_report& r, const std::string& path) {
    json j;
    j["epoch_loss"] = r.epoch_loss;
    if (!r.val_score.empty()) {
        j["val_score"] = r.val_score;
    }
    j["wall_seconds"] = r.wall_seconds;
    j["best_epoch"] = r.best_epoch;
    j["truncated_sequences"] = r.truncated_sequences;
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw io_error("cannot open " + path + " for writing");
    }
    os << j.dump(2) << "\n";
}

std::vector<train_sample> build_samples(
    const std::vector<segment_features>& features, const annotation_set& ann,
    int max_event_len, int* truncated) {
    std::vector<train_sample> out;
    int clipped = 0;
    for (const segment_features& f : features) {
        auto it = ann.videos.find(f.video_id);
        if (it == ann.videos.end()) {
            throw validation_error("no annotation for video " + f.video_id);
        }
        const video_annotation& va = it->second;
        train_sample s;
        s.features = f;
        for (const auto& ts : va.timestamps) {
            s.events.push_back(
                timestamps_to_segments(ts[0], ts[1], va.duration, f.t_count));
        }
        std::sort(s.events.begin(), s.events.end(),
                  [](const event_interval& a, const event_interval& b) {
                      return a.t0 != b.t0 ? a.t0 < b.t0 : a.t1 < b.t1;
                  });
        if (static_cast<int>(s.events.size()) > max_event_len) {
            s.events.resize(static_cast<std::size_t>(max_event_len));
            ++clipped;
        }
        out.push_back(std::move(s));
    }
    if (truncated) {
        *truncated = clipped;
    }
    return out;
}

train_sample reverse_sample(const train_sample& s) {
    train_sample out;
    out.features = reverse_segments(s.features);
    int t = s.features.t_count;
    for (auto it = s.events.rbegin(); it != s.events.rend(); ++it) {
        out.events.push_back(event_interval{t - 1 - it->t1, t - 1 - it->t0});
    }
    return out;
}

adam_state adam_state::init(const model_params& shape) {
    adam_state st;
    st.m = model_params::zeros_like(shape);
    st.v = model_params::zeros_like(shape);
    st.step = 0;
    return st;
}

void adam_step(model_params& params, const model_params& grads,
               adam_state& state, const train_config& cfg) {
    auto pt = named_tensors(params);
    auto gt = named_tensors(grads);
    auto mt = named_tensors(state.m);
    auto vt = named_tensors(state.v);

    double norm2 = 0.0;
    for (const auto& [name, g] : gt) {
        for (double x : g->v) {
            norm2 += x * x;
        }
    }
    if (!std::isfinite(norm2)) {
        throw numeric_error("non-finite gradient");
    }
    double norm = std::sqrt(norm2);
    double scale =
        norm > cfg.grad_clip_norm ? cfg.grad_clip_norm / norm : 1.0;

    ++state.step;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < pt.size(); ++i) {
        tensor& p = *pt[i].second;
        const tensor& g = *gt[i].second;
        tensor& m = *mt[i].second;
        tensor& v = *vt[i].second;
        check_same_dims(p, g, "adam_step");
        for (int j = 0; j < p.size(); ++j) {
            double gj = g.v[static_cast<std::size_t>(j)] * scale;
            double& mj = m.v[static_cast<std::size_t>(j)];
            double& vj = v.v[static_cast<std::size_t>(j)];
            mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
            vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
            double mhat = mj / bc1;
            double vhat = vj / bc2;
            p.v[static_cast<std::size_t>(j)] -=
                cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

namespace {

// scores one direction's model on held-out samples in its own
// coordinate frame (segment index space, 1 second per segment)
double validation_score(const model_params& params,
                        const std::vector<train_sample>& val,
                        int max_event_len) {
    annotation_set gt;
    proposal_set props;
    for (std::size_t i = 0; i < val.size(); ++i) {
        const train_sample& s = val[i];
        std::string id = "val_" + std::to_string(i);
        double dur = static_cast<double>(s.features.t_count);
        video_annotation va;
        va.duration = dur;
        for (const event_interval& e : s.events) {
            va.timestamps.push_back(
                segments_to_seconds(e, dur, s.features.t_count));
        }
        gt.videos.emplace(id, std::move(va));
        event_sequence seq =
            generate_sequence(params, s.features, max_event_len);
        std::vector<proposal> plist;
        for (const generated_event& ge : seq.events) {
            proposal p;
            p.segment =
                segments_to_seconds(ge.interval, dur, s.features.t_count);
            p.source = "forward";
            plist.push_back(std::move(p));
        }
        props.videos.emplace(id, std::move(plist));
    }
    metric_table m = recall_precision(props, gt);
    return 0.5 * (m.recall_avg + m.precision_avg);
}

}  // namespace

train_result train_esg(const std::vector<train_sample>& dataset,
                       direction dir, const train_config& cfg,
                       const model_dims& dims, const epoch_sink& sink) {
    validate(cfg);
    if (dataset.empty()) {
        throw validation_error("training dataset is empty");
    }
    for (const train_sample& s : dataset) {
        if (s.features.dim != dims.feat_dim) {
            throw validation_error("feature dim of video " +
                                   s.features.video_id +
                                   " does not match model dims");
        }
        if (s.events.empty() ||
            static_cast<int>(s.events.size()) > cfg.max_event_len) {
            throw validation_error("video " + s.features.video_id +
                                   " has invalid event count");
        }
    }

    std::vector<train_sample> samples;
    samples.reserve(dataset.size());
    for (const train_sample& s : dataset) {
        samples.push_back(dir == direction::backward ? reverse_sample(s) : s);
    }

    int n = static_cast<int>(samples.size());
    std::vector<int> indices(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        indices[static_cast<std::size_t>(i)] = i;
    }
    int n_val = static_cast<int>(cfg.val_fraction * n);
    if (n_val > 0) {
        counter_rng split_rng(cfg.seed, 0x5b117);
        split_rng.shuffle(indices);
    }
    std::vector<int> train_idx(indices.begin(), indices.end() - n_val);
    std::vector<train_sample> val;
    for (auto it = indices.end() - n_val; it != indices.end(); ++it) {
        val.push_back(samples[static_cast<std::size_t>(*it)]);
    }
    if (train_idx.empty()) {
        throw validation_error("validation split leaves no training videos");
    }

    auto t_start = std::chrono::steady_clock::now();
    model_params params = model_params::init(dims, cfg.seed);
    adam_state opt = adam_state::init(params);
    train_result res;
    model_params best = params;
    double best_score = -1.0;
    double best_loss = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        counter_rng shuffle_rng(
            cfg.seed, derive_stream(0xe49c, static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(train_idx);
        double loss_sum = 0.0;
        for (std::size_t pos = 0; pos < train_idx.size();
             pos += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(
                pos + static_cast<std::size_t>(cfg.batch_size),
                train_idx.size());
            model_params grads = model_params::zeros_like(params);
            for (std::size_t b = pos; b < end; ++b) {
                int idx = train_idx[b];
                const train_sample& s =
                    samples[static_cast<std::size_t>(idx)];
                counter_rng drop_rng(
                    cfg.seed,
                    derive_stream(
                        derive_stream(0xd409, static_cast<std::uint64_t>(epoch)),
                        static_cast<std::uint64_t>(idx)));
                forward_options opt_fwd;
                opt_fwd.dropout = cfg.dropout;
                opt_fwd.dropout_rng = cfg.dropout > 0.0 ? &drop_rng : nullptr;
                tape tp;
                param_leaves leaves = register_params(tp, params);
                value loss = sequence_nll(tp, leaves, s.features, s.events,
                                          cfg.max_event_len, opt_fwd);
                double lv = tp.val(loss)(0);
                if (!std::isfinite(lv)) {
                    throw numeric_error("loss diverged on video " +
                                        s.features.video_id);
                }
                loss_sum += lv;
                tp.backward(loss);
                accumulate_grads(tp, leaves, grads);
            }
            adam_step(params, grads, opt, cfg);
        }
        double mean_loss = loss_sum / static_cast<double>(train_idx.size());
        res.report.epoch_loss.push_back(mean_loss);
        if (!val.empty()) {
            double score = validation_score(params, val, cfg.max_event_len);
            res.report.val_score.push_back(score);
            if (score > best_score) {
                best_score = score;
                res.report.best_epoch = epoch;
                best = params;
            }
        } else if (mean_loss < best_loss) {
            best_loss = mean_loss;
            res.report.best_epoch = epoch;
        }
        if (sink) {
            sink(epoch, params, res.report);
        }
    }
    res.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      t_start)
            .count();
    res.params = val.empty() ? std::move(params) : std::move(best);
    return res;
}

}  // namespace esg
