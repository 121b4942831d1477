#pragma once

#include <string>

#include "esg/evaluation.hpp"
#include "esg/inference.hpp"
#include "esg/synth.hpp"
#include "esg/training.hpp"

namespace esg {

// scripted synth -> train fwd -> train bwd -> infer -> eval composition
struct pipeline_config {
    int n_train = 200;
    int n_val = 50;
    int t_min = 20;
    int t_max = 60;
    int dim = 16;
    std::uint64_t seed = 42;
    train_config train;
    model_dims dims;  // feat_dim is overwritten with dim
    fuse_policy policy = fuse_policy::keep_both;
    int jobs = 1;
    bool save_epoch_checkpoints = false;
    std::string work_dir;  // all artifacts are written below this path
};

struct pipeline_result {
    metric_table fused;
    metric_table forward_only;
    metric_table backward_only;
    train_report report_fwd;
    train_report report_bwd;
    std::string proposals_path;
};

pipeline_result run_end_to_end(const pipeline_config& cfg);

// proposals from a single direction only, mapped to seconds
proposal_set single_direction_proposals(
    const model_params& params, bool reverse_time,
    const std::vector<segment_features>& features, const annotation_set& ann,
    int max_len = 8);

}  // namespace esg
