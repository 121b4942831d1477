#pragma once

#include <string>
#include <utility>
#include <vector>

#include "esg/annotations.hpp"
#include "esg/evaluation.hpp"
#include "esg/events.hpp"
#include "esg/features.hpp"
#include "esg/model.hpp"

namespace esg {

enum class seq_direction { forward, backward, fused };

const char* seq_direction_name(seq_direction d);

struct generated_event {
    event_interval interval;
    std::vector<double> distribution;  // per-segment probabilities
    double score = 0.0;  // mean in-interval probability, diagnostic only
    seq_direction origin = seq_direction::forward;
};

struct event_sequence {
    seq_direction tag = seq_direction::forward;
    std::vector<generated_event> events;
};

// Autoregressive generation: start from <sos>, emit the bridged
// [t0, t1] interval of each step's distribution, feed its indicator
// back, stop at <eos> (no probability reaches 0.5) or max_len events.
event_sequence generate_sequence(const model_params& params,
                                 const segment_features& feats,
                                 int max_len = 8);

// backward-direction sequence mapped into forward coordinates:
// distributions reversed elementwise, intervals mirrored
event_sequence map_backward_to_forward(const event_sequence& bwd,
                                       int t_count);

struct match_result {
    std::vector<std::pair<int, int>> pairs;  // (fwd index, bwd index)
    std::vector<int> fwd_unmatched;
    std::vector<int> bwd_unmatched;
};

// Greedy matching by descending segment tIoU with threshold tau; ties
// broken by smaller forward index, then smaller backward index. Expects
// the backward sequence already in forward coordinates.
match_result match_events(const event_sequence& fwd,
                          const event_sequence& bwd_mapped, double tau = 0.5);

enum class fuse_policy { keep_both, keep_forward, drop };

fuse_policy fuse_policy_from_name(const std::string& name);
const char* fuse_policy_name(fuse_policy p);

// Maps bwd into forward coordinates, matches at tau, averages the
// distributions of matched pairs elementwise and re-extracts their
// intervals (pairs whose fused distribution never reaches 0.5 are
// dropped); unmatched events are handled per policy. Output sorted by
// (start, end).
event_sequence fuse_bidirectional(const event_sequence& fwd,
                                  const event_sequence& bwd,
                                  fuse_policy policy = fuse_policy::keep_both,
                                  double tau = 0.5);

struct infer_options {
    fuse_policy policy = fuse_policy::keep_both;
    int max_len = 8;
    int jobs = 1;
};

struct infer_result {
    proposal_set proposals;
    int skipped_videos = 0;
};

// Per annotated video: load <id>.esgf from features_dir, generate
// forward, generate backward on the reversed features, fuse, and convert
// intervals to seconds. Missing feature files are warned about and
// skipped. Deterministic for any jobs count.
infer_result infer_corpus(const std::string& features_dir,
                          const model_params& params_fwd,
                          const model_params& params_bwd,
                          const annotation_set& ann,
                          const infer_options& opt = {});

}  // namespace esg
