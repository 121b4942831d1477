#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "esg/annotations.hpp"
#include "esg/events.hpp"
#include "esg/features.hpp"
#include "esg/model.hpp"

namespace esg {

struct train_config {
    double learning_rate = 1e-4;
    int batch_size = 8;
    int epochs = 30;
    double dropout = 0.5;
    int max_event_len = 8;
    double grad_clip_norm = 5.0;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // fraction of videos held out for best-epoch selection by validation
    // average recall+precision; 0 selects by training loss instead
    double val_fraction = 0.0;
};

void validate(const train_config& cfg);

struct train_report {
    std::vector<double> epoch_loss;  // mean per-video sequence_nll
    std::vector<double> val_score;   // (recall_avg+precision_avg)/2, if val used
    double wall_seconds = 0.0;
    int best_epoch = 0;  // 0-based
    int truncated_sequences = 0;
};

void save_report(const train_report& r, const std::string& path);

struct train_sample {
    segment_features features;
    std::vector<event_interval> events;  // sorted by (start, end)
};

enum class direction { forward, backward };

// Pairs feature matrices with annotations: timestamps are mapped to
// segment intervals and sorted by (start, end). Sequences longer than
// max_event_len are truncated to the first max_event_len events, with
// the count reported through truncated (may be null).
std::vector<train_sample> build_samples(
    const std::vector<segment_features>& features, const annotation_set& ann,
    int max_event_len, int* truncated = nullptr);

// Reverses the segment axis: feature rows flip, each event [t0, t1]
// maps to [T-1-t1, T-1-t0], and the event order flips.
train_sample reverse_sample(const train_sample& s);

struct adam_state {
    model_params m;  // first moment
    model_params v;  // second moment
    long step = 0;

    static adam_state init(const model_params& shape);
};

// Global-norm clips grads at cfg.grad_clip_norm, then applies one
// bias-corrected adaptive-moment update in place. Non-finite gradients
// raise numeric_error.
void adam_step(model_params& params, const model_params& grads,
               adam_state& state, const train_config& cfg);

struct train_result {
    model_params params;
    train_report report;
};

// Optional per-epoch sink, e.g. for writing checkpoints: called with
// (epoch index, parameters after that epoch).
using epoch_sink =
    std::function<void(int, const model_params&, const train_report&)>;

// Teacher-forced training of one direction. Shuffles videos per epoch
// (seeded), accumulates per-video gradients over batch_size videos per
// adam step. direction::backward trains on reverse_sample outputs.
// Single-threaded over videos; kernel-level parallelism does not change
// results, so runs are bit-reproducible under a fixed seed.
train_result train_esg(const std::vector<train_sample>& dataset,
                       direction dir, const train_config& cfg,
                       const model_dims& dims,
                       const epoch_sink& sink = nullptr);

}  // namespace esg
