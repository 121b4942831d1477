#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "esg/error.hpp"
#include "esg/evaluation.hpp"
#include "esg/inference.hpp"
#include "esg/pipeline.hpp"
#include "esg/synth.hpp"
#include "esg/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct train_file_config {
    esg::train_config train;
    esg::model_dims dims;
    bool save_epoch_checkpoints = true;
};

train_file_config load_train_config(const std::string& path) {
    train_file_config out;
    if (path.empty()) {
        return out;
    }
    std::ifstream in(path);
    if (!in) {
        throw esg::io_error("cannot open config file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw esg::format_error("config file " + path + ": " + e.what());
    }
    esg::train_config& t = out.train;
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.epochs = j.value("epochs", t.epochs);
    t.dropout = j.value("dropout", t.dropout);
    t.max_event_len = j.value("max_event_len", t.max_event_len);
    t.grad_clip_norm = j.value("grad_clip_norm", t.grad_clip_norm);
    t.seed = j.value("seed", t.seed);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.epsilon = j.value("epsilon", t.epsilon);
    t.val_fraction = j.value("val_fraction", t.val_fraction);
    esg::model_dims& d = out.dims;
    d.enc_hidden = j.value("enc_hidden", d.enc_hidden);
    d.dec_hidden = j.value("dec_hidden", d.dec_hidden);
    d.mlp_hidden1 = j.value("mlp_hidden1", d.mlp_hidden1);
    d.mlp_hidden2 = j.value("mlp_hidden2", d.mlp_hidden2);
    out.save_epoch_checkpoints =
        j.value("save_epoch_checkpoints", out.save_epoch_checkpoints);
    return out;
}

std::vector<esg::segment_features> load_feature_dir(
    const std::string& dir, const esg::annotation_set& ann) {
    std::vector<esg::segment_features> out;
    for (const auto& [id, va] : ann.videos) {
        fs::path p = fs::path(dir) / (id + ".esgf");
        if (!fs::exists(p)) {
            std::cerr << "warning: no feature file for video " << id
                      << ", skipped\n";
            continue;
        }
        out.push_back(esg::load_features(p.string()));
    }
    if (out.empty()) {
        throw esg::validation_error("no feature files found in " + dir);
    }
    return out;
}

json metric_table_json(const esg::metric_table& m) {
    json j;
    j["thresholds"] = m.thresholds;
    j["recall"] = m.recall;
    j["precision"] = m.precision;
    j["recall_avg"] = m.recall_avg;
    j["precision_avg"] = m.precision_avg;
    j["events_per_video"] = m.events_per_video;
    j["self_tiou"] = m.mean_self_tiou;
    return j;
}

int run(int argc, char** argv) {
    CLI::App app{"Event sequence generation pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand(
        "synth", "Generate a synthetic feature + annotation dataset");
    std::string synth_out;
    esg::synth_config sc;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--videos", sc.n_videos, "number of videos")
        ->required();
    synth->add_option("--seed", sc.seed, "generator seed")->required();
    synth->add_option("--tmin", sc.t_min, "min segments per video");
    synth->add_option("--tmax", sc.t_max, "max segments per video");
    synth->add_option("--dim", sc.dim, "feature dimension");

    // train
    auto* train = app.add_subcommand("train", "Train one direction");
    std::string train_data, train_ann, train_dir_s, train_cfg_path, train_out;
    train->add_option("--data", train_data, "feature directory")->required();
    train->add_option("--ann", train_ann, "annotation file")->required();
    train->add_option("--direction", train_dir_s, "fwd or bwd")->required();
    train->add_option("--config", train_cfg_path, "JSON training config");
    train->add_option("--out", train_out, "output checkpoint path")
        ->required();

    // infer
    auto* infer = app.add_subcommand(
        "infer", "Generate fused proposals for a corpus");
    std::string inf_data, inf_ann, inf_fwd, inf_bwd, inf_policy = "keep-both",
                                                     inf_out;
    int inf_jobs = 1;
    int inf_max_len = 8;
    bool inf_scores = false;
    infer->add_option("--data", inf_data, "feature directory")->required();
    infer->add_option("--ann", inf_ann, "annotation file (for durations)")
        ->required();
    infer->add_option("--fwd", inf_fwd, "forward checkpoint")->required();
    infer->add_option("--bwd", inf_bwd, "backward checkpoint")->required();
    infer->add_option("--policy", inf_policy,
                      "keep-both | keep-forward | drop");
    infer->add_option("--out", inf_out, "proposal JSON path")->required();
    infer->add_option("--jobs", inf_jobs, "parallel videos");
    infer->add_option("--max-len", inf_max_len, "max events per video");
    infer->add_flag("--with-scores", inf_scores,
                    "include diagnostic scores in the output");

    // eval
    auto* eval = app.add_subcommand("eval", "Score proposals against truth");
    std::string eval_props, eval_ann, eval_out;
    eval->add_option("--proposals", eval_props, "proposal JSON")->required();
    eval->add_option("--ann", eval_ann, "annotation file")->required();
    eval->add_option("--out", eval_out, "report JSON path");

    // stats
    auto* stats =
        app.add_subcommand("stats", "Temporal-order statistics of a corpus");
    std::string stats_ann;
    stats->add_option("--ann", stats_ann, "annotation file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);  // --help
        }
        app.exit(e);
        return 1;
    }

    if (synth->parsed()) {
        esg::synth_dataset ds = esg::synthesize_dataset(sc);
        esg::write_dataset(ds, synth_out);
        std::cerr << "wrote " << ds.features.size() << " videos to "
                  << synth_out << "\n";
        return 0;
    }

    if (train->parsed()) {
        esg::direction dir;
        if (train_dir_s == "fwd") {
            dir = esg::direction::forward;
        } else if (train_dir_s == "bwd") {
            dir = esg::direction::backward;
        } else {
            throw esg::validation_error("--direction must be fwd or bwd");
        }
        train_file_config cfg = load_train_config(train_cfg_path);
        esg::annotation_set ann = esg::load_annotations(train_ann);
        std::vector<esg::segment_features> feats =
            load_feature_dir(train_data, ann);
        cfg.dims.feat_dim = feats[0].dim;
        int truncated = 0;
        std::vector<esg::train_sample> samples = esg::build_samples(
            feats, ann, cfg.train.max_event_len, &truncated);
        if (truncated > 0) {
            std::cerr << "warning: " << truncated
                      << " event sequences truncated to first "
                      << cfg.train.max_event_len << " events\n";
        }
        esg::epoch_sink sink;
        fs::path out_path(train_out);
        if (cfg.save_epoch_checkpoints) {
            sink = [&out_path](int epoch, const esg::model_params& p,
                               const esg::train_report&) {
                fs::path ep = out_path;
                ep.replace_extension(".epoch" + std::to_string(epoch) +
                                     ".esgm");
                esg::save_checkpoint(p, ep.string());
            };
        }
        esg::train_result res =
            esg::train_esg(samples, dir, cfg.train, cfg.dims, sink);
        esg::save_checkpoint(res.params, train_out);
        fs::path report_path = out_path;
        report_path.replace_extension(".report.json");
        esg::save_report(res.report, report_path.string());
        std::cerr << "final epoch loss "
                  << res.report.epoch_loss.back() << ", checkpoint "
                  << train_out << "\n";
        return 0;
    }

    if (infer->parsed()) {
        esg::model_params fwd = esg::load_checkpoint(inf_fwd);
        esg::model_params bwd = esg::load_checkpoint(inf_bwd);
        esg::annotation_set ann = esg::load_annotations(inf_ann);
        esg::infer_options opt;
        opt.policy = esg::fuse_policy_from_name(inf_policy);
        opt.jobs = inf_jobs;
        opt.max_len = inf_max_len;
        esg::infer_result res = esg::infer_corpus(inf_data, fwd, bwd, ann, opt);
        esg::save_proposals(res.proposals, inf_out, inf_scores);
        std::cerr << "wrote proposals for " << res.proposals.videos.size()
                  << " videos (" << res.skipped_videos << " skipped) to "
                  << inf_out << "\n";
        return 0;
    }

    if (eval->parsed()) {
        esg::proposal_set props = esg::load_proposals(eval_props);
        esg::annotation_set ann = esg::load_annotations(eval_ann);
        esg::metric_table m = esg::recall_precision(props, ann);
        json j = metric_table_json(m);
        std::string table = esg::format_metric_table("Proposal metrics", m);
        if (eval_out.empty()) {
            std::cerr << table;
            std::cout << j.dump(2) << "\n";
        } else {
            std::ofstream os(eval_out, std::ios::trunc);
            if (!os) {
                throw esg::io_error("cannot open " + eval_out +
                                    " for writing");
            }
            os << j.dump(2) << "\n";
            std::cout << table;
        }
        return 0;
    }

    if (stats->parsed()) {
        esg::annotation_set ann = esg::load_annotations(stats_ann);
        esg::order_stats st = esg::corpus_order_stats(ann);
        json j;
        for (int i = 0; i < 4; ++i) {
            j[esg::order_label_name(static_cast<esg::order_label>(i))] =
                st.fraction[static_cast<std::size_t>(i)];
        }
        j["videos"] = ann.size();
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const esg::io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esg::format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const esg::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
