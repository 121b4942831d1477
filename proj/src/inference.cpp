#include "esg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "esg/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace esg {

namespace {

double mean_in_interval(const std::vector<double>& p,
                        const event_interval& e) {
    double s = 0.0;
    for (int t = e.t0; t <= e.t1; ++t) {
        s += p[static_cast<std::size_t>(t)];
    }
    return s / e.length();
}

}  // namespace

const char* seq_direction_name(seq_direction d) {
    switch (d) {
        case seq_direction::forward:
            return "forward";
        case seq_direction::backward:
            return "backward";
        case seq_direction::fused:
            return "fused";
    }
    return "forward";
}

event_sequence generate_sequence(const model_params& params,
                                 const segment_features& feats,
                                 int max_len) {
    if (max_len < 1) {
        throw validation_error("max_len must be >= 1");
    }
    event_sequence seq;
    seq.tag = seq_direction::forward;
    tape tp;
    param_leaves leaves = register_params(tp, params);
    value ctx = encode_video(tp, leaves, feats);
    value h = init_decoder_state(tp, leaves, ctx);
    event_indicator e_prev(static_cast<std::size_t>(feats.t_count), 0);
    for (int i = 0; i < max_len; ++i) {
        decoder_out step = decoder_step(tp, leaves, e_prev, h, ctx);
        h = step.h;
        const std::vector<double>& p = tp.val(step.p).v;
        std::optional<event_interval> iv = extract_interval(p);
        if (!iv) {
            break;
        }
        generated_event ge;
        ge.interval = *iv;
        ge.distribution = p;
        ge.score = mean_in_interval(p, *iv);
        ge.origin = seq_direction::forward;
        seq.events.push_back(std::move(ge));
        // feed back the bridged contiguous indicator, not the raw
        // thresholded vector, so the contiguity invariant holds
        e_prev = interval_to_indicator(*iv, feats.t_count);
    }
    return seq;
}

event_sequence map_backward_to_forward(const event_sequence& bwd,
                                       int t_count) {
    event_sequence out;
    out.tag = seq_direction::backward;
    for (const generated_event& ge : bwd.events) {
        generated_event m;
        m.interval = event_interval{t_count - 1 - ge.interval.t1,
                                    t_count - 1 - ge.interval.t0};
        m.distribution.assign(ge.distribution.rbegin(),
                              ge.distribution.rend());
        m.score = ge.score;
        m.origin = seq_direction::backward;
        out.events.push_back(std::move(m));
    }
    return out;
}

match_result match_events(const event_sequence& fwd,
                          const event_sequence& bwd_mapped, double tau) {
    struct cand {
        double iou;
        int i;
        int j;
    };
    std::vector<cand> cands;
    for (int i = 0; i < static_cast<int>(fwd.events.size()); ++i) {
        for (int j = 0; j < static_cast<int>(bwd_mapped.events.size()); ++j) {
            double iou = tiou_segments(
                fwd.events[static_cast<std::size_t>(i)].interval.t0,
                fwd.events[static_cast<std::size_t>(i)].interval.t1,
                bwd_mapped.events[static_cast<std::size_t>(j)].interval.t0,
                bwd_mapped.events[static_cast<std::size_t>(j)].interval.t1);
            if (iou >= tau) {
                cands.push_back({iou, i, j});
            }
        }
    }
    std::sort(cands.begin(), cands.end(), [](const cand& a, const cand& b) {
        if (a.iou != b.iou) {
            return a.iou > b.iou;
        }
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    match_result res;
    std::vector<bool> used_f(fwd.events.size(), false);
    std::vector<bool> used_b(bwd_mapped.events.size(), false);
    for (const cand& c : cands) {
        if (used_f[static_cast<std::size_t>(c.i)] ||
            used_b[static_cast<std::size_t>(c.j)]) {
            continue;
        }
        used_f[static_cast<std::size_t>(c.i)] = true;
        used_b[static_cast<std::size_t>(c.j)] = true;
        res.pairs.emplace_back(c.i, c.j);
    }
    for (int i = 0; i < static_cast<int>(fwd.events.size()); ++i) {
        if (!used_f[static_cast<std::size_t>(i)]) {
            res.fwd_unmatched.push_back(i);
        }
    }
    for (int j = 0; j < static_cast<int>(bwd_mapped.events.size()); ++j) {
        if (!used_b[static_cast<std::size_t>(j)]) {
            res.bwd_unmatched.push_back(j);
        }
    }
    return res;
}

fuse_policy fuse_policy_from_name(const std::string& name) {
    if (name == "keep-both") {
        return fuse_policy::keep_both;
    }
    if (name == "keep-forward") {
        return fuse_policy::keep_forward;
    }
    if (name == "drop") {
        return fuse_policy::drop;
    }
    throw validation_error("unknown fusion policy: " + name);
}

const char* fuse_policy_name(fuse_policy p) {
    switch (p) {
        case fuse_policy::keep_both:
            return "keep-both";
        case fuse_policy::keep_forward:
            return "keep-forward";
        case fuse_policy::drop:
            return "drop";
    }
    return "keep-both";
}

event_sequence fuse_bidirectional(const event_sequence& fwd,
                                  const event_sequence& bwd,
                                  fuse_policy policy, double tau) {
    int t_count = 0;
    if (!fwd.events.empty()) {
        t_count = static_cast<int>(fwd.events[0].distribution.size());
    } else if (!bwd.events.empty()) {
        t_count = static_cast<int>(bwd.events[0].distribution.size());
    }
    event_sequence mapped = map_backward_to_forward(bwd, t_count);
    match_result matches = match_events(fwd, mapped, tau);

    std::vector<generated_event> out;
    for (const auto& [fi, bi] : matches.pairs) {
        const generated_event& a = fwd.events[static_cast<std::size_t>(fi)];
        const generated_event& b =
            mapped.events[static_cast<std::size_t>(bi)];
        generated_event fused;
        fused.distribution.resize(a.distribution.size());
        for (std::size_t t = 0; t < a.distribution.size(); ++t) {
            fused.distribution[t] =
                0.5 * (a.distribution[t] + b.distribution[t]);
        }
        std::optional<event_interval> iv =
            extract_interval(fused.distribution);
        if (!iv) {
            continue;  // averaged distribution fell below threshold
        }
        fused.interval = *iv;
        fused.score = mean_in_interval(fused.distribution, *iv);
        fused.origin = seq_direction::fused;
        out.push_back(std::move(fused));
    }
    if (policy == fuse_policy::keep_both || policy == fuse_policy::keep_forward) {
        for (int i : matches.fwd_unmatched) {
            out.push_back(fwd.events[static_cast<std::size_t>(i)]);
        }
    }
    if (policy == fuse_policy::keep_both) {
        for (int j : matches.bwd_unmatched) {
            out.push_back(mapped.events[static_cast<std::size_t>(j)]);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const generated_event& a, const generated_event& b) {
                         if (a.interval.t0 != b.interval.t0) {
                             return a.interval.t0 < b.interval.t0;
                         }
                         return a.interval.t1 < b.interval.t1;
                     });
    event_sequence seq;
    seq.tag = seq_direction::fused;
    seq.events = std::move(out);
    return seq;
}

infer_result infer_corpus(const std::string& features_dir,
                          const model_params& params_fwd,
                          const model_params& params_bwd,
                          const annotation_set& ann,
                          const infer_options& opt) {
    std::vector<std::string> ids;
    for (const auto& [id, va] : ann.videos) {
        ids.push_back(id);
    }
    int n = static_cast<int>(ids.size());
    std::vector<std::vector<proposal>> results(static_cast<std::size_t>(n));
    std::vector<char> present(static_cast<std::size_t>(n), 0);
    std::exception_ptr failure;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, opt.jobs))
#endif
    for (int i = 0; i < n; ++i) {
        try {
            const std::string& id = ids[static_cast<std::size_t>(i)];
            std::filesystem::path fpath =
                std::filesystem::path(features_dir) / (id + ".esgf");
            if (!std::filesystem::exists(fpath)) {
                continue;
            }
            segment_features feats = load_features(fpath.string());
            const video_annotation& va = ann.videos.at(id);
            event_sequence fwd =
                generate_sequence(params_fwd, feats, opt.max_len);
            event_sequence bwd = generate_sequence(
                params_bwd, reverse_segments(feats), opt.max_len);
            bwd.tag = seq_direction::backward;

            event_sequence fused =
                fuse_bidirectional(fwd, bwd, opt.policy);

            std::vector<proposal> plist;
            for (const generated_event& ge : fused.events) {
                proposal p;
                p.segment = segments_to_seconds(ge.interval, va.duration,
                                                feats.t_count);
                p.score = ge.score;
                p.source = seq_direction_name(ge.origin);
                plist.push_back(std::move(p));
            }
            results[static_cast<std::size_t>(i)] = std::move(plist);
            present[static_cast<std::size_t>(i)] = 1;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            {
                if (!failure) {
                    failure = std::current_exception();
                }
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    infer_result res;
    for (int i = 0; i < n; ++i) {
        if (!present[static_cast<std::size_t>(i)]) {
            std::cerr << "warning: no feature file for video "
                      << ids[static_cast<std::size_t>(i)] << ", skipped\n";
            ++res.skipped_videos;
            continue;
        }
        res.proposals.videos.emplace(
            ids[static_cast<std::size_t>(i)],
            std::move(results[static_cast<std::size_t>(i)]));
    }
    return res;
}

}  // namespace esg
