#include "esg/pipeline.hpp"

#include <filesystem>
#include <iostream>

#include "esg/error.hpp"

namespace esg {

namespace fs = std::filesystem;

proposal_set single_direction_proposals(
    const model_params& params, bool reverse_time,
    const std::vector<segment_features>& features, const annotation_set& ann,
    int max_len) {
    proposal_set out;
    for (const segment_features& f : features) {
        auto it = ann.videos.find(f.video_id);
        if (it == ann.videos.end()) {
            throw validation_error("no annotation for video " + f.video_id);
        }
        const video_annotation& va = it->second;
        event_sequence seq;
        if (reverse_time) {
            event_sequence raw =
                generate_sequence(params, reverse_segments(f), max_len);
            raw.tag = seq_direction::backward;
            seq = map_backward_to_forward(raw, f.t_count);
        } else {
            seq = generate_sequence(params, f, max_len);
        }
        std::vector<proposal> plist;
        for (const generated_event& ge : seq.events) {
            proposal p;
            p.segment = segments_to_seconds(ge.interval, va.duration,
                                            f.t_count);
            p.score = ge.score;
            p.source = reverse_time ? "backward" : "forward";
            plist.push_back(std::move(p));
        }
        out.videos.emplace(f.video_id, std::move(plist));
    }
    return out;
}

pipeline_result run_end_to_end(const pipeline_config& cfg) {
    if (cfg.work_dir.empty()) {
        throw validation_error("pipeline work_dir must be set");
    }
    fs::create_directories(cfg.work_dir);

    // one generator run over train+val keeps the split deterministic
    synth_config sc;
    sc.n_videos = cfg.n_train + cfg.n_val;
    sc.t_min = cfg.t_min;
    sc.t_max = cfg.t_max;
    sc.dim = cfg.dim;
    sc.seed = cfg.seed;
    synth_dataset all = synthesize_dataset(sc);

    synth_dataset train_ds;
    synth_dataset val_ds;
    for (int i = 0; i < sc.n_videos; ++i) {
        const segment_features& f = all.features[static_cast<std::size_t>(i)];
        synth_dataset& dst = i < cfg.n_train ? train_ds : val_ds;
        dst.features.push_back(f);
        dst.annotations.videos.emplace(f.video_id,
                                       all.annotations.videos.at(f.video_id));
    }
    fs::path train_dir = fs::path(cfg.work_dir) / "train";
    fs::path val_dir = fs::path(cfg.work_dir) / "val";
    write_dataset(train_ds, train_dir.string());
    write_dataset(val_ds, val_dir.string());

    model_dims dims = cfg.dims;
    dims.feat_dim = cfg.dim;
    int truncated = 0;
    std::vector<train_sample> samples = build_samples(
        train_ds.features, train_ds.annotations, cfg.train.max_event_len,
        &truncated);
    if (truncated > 0) {
        std::cerr << "warning: " << truncated
                  << " event sequences truncated to max length\n";
    }

    pipeline_result res;
    auto train_one = [&](direction dir, const char* name,
                         train_report& report) {
        epoch_sink sink;
        fs::path ckpt = fs::path(cfg.work_dir) / (std::string(name) + ".esgm");
        if (cfg.save_epoch_checkpoints) {
            sink = [&cfg, name](int epoch, const model_params& p,
                                const train_report&) {
                fs::path ep =
                    fs::path(cfg.work_dir) /
                    (std::string(name) + ".epoch" + std::to_string(epoch) +
                     ".esgm");
                save_checkpoint(p, ep.string());
            };
        }
        train_result tr = train_esg(samples, dir, cfg.train, dims, sink);
        save_checkpoint(tr.params, ckpt.string());
        save_report(tr.report,
                    (fs::path(cfg.work_dir) /
                     (std::string(name) + ".report.json")).string());
        report = tr.report;
        return tr.params;
    };
    model_params params_fwd = train_one(direction::forward, "fwd",
                                        res.report_fwd);
    model_params params_bwd = train_one(direction::backward, "bwd",
                                        res.report_bwd);

    infer_options io;
    io.policy = cfg.policy;
    io.max_len = cfg.train.max_event_len;
    io.jobs = cfg.jobs;
    infer_result inf = infer_corpus(val_dir.string(), params_fwd, params_bwd,
                                    val_ds.annotations, io);
    fs::path props_path = fs::path(cfg.work_dir) / "proposals.json";
    save_proposals(inf.proposals, props_path.string());
    res.proposals_path = props_path.string();

    res.fused = recall_precision(inf.proposals, val_ds.annotations);
    res.forward_only = recall_precision(
        single_direction_proposals(params_fwd, false, val_ds.features,
                                   val_ds.annotations,
                                   cfg.train.max_event_len),
        val_ds.annotations);
    res.backward_only = recall_precision(
        single_direction_proposals(params_bwd, true, val_ds.features,
                                   val_ds.annotations,
                                   cfg.train.max_event_len),
        val_ds.annotations);
    return res;
}

}  // namespace esg
