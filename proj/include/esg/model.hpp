#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esg/events.hpp"
#include "esg/features.hpp"
#include "esg/tape.hpp"
#include "esg/tensor.hpp"

namespace esg {

struct model_dims {
    int feat_dim = 0;       // D, per dataset
    int enc_hidden = 512;   // encoder GRU hidden size per direction
    int dec_hidden = 512;   // event decoder GRU hidden size
    int mlp_hidden1 = 512;  // MLP head hidden widths
    int mlp_hidden2 = 256;

    int ctx_dim() const { return 2 * enc_hidden; }
    bool operator==(const model_dims&) const = default;
};

struct gru_weights {
    tensor w_z, u_z, b_z;  // update gate
    tensor w_r, u_r, b_r;  // reset gate
    tensor w_h, u_h, b_h;  // candidate
};

// All learnable tensors: bidirectional context encoder, input/init
// projections, event decoder GRU, and the per-segment MLP head.
struct model_params {
    model_dims dims;
    gru_weights enc_fwd;      // D -> H, left to right
    gru_weights enc_bwd;      // D -> H, right to left
    tensor in_proj_w, in_proj_b;  // D -> 2H residual projection
    gru_weights dec;          // 2H -> H_dec
    tensor init_w, init_b;    // 2H -> H_dec decoder-state init
    tensor mlp_w1, mlp_b1;    // H_dec + 2H -> L1
    tensor mlp_w2, mlp_b2;    // L1 -> L2
    tensor mlp_w3, mlp_b3;    // L2 -> 1

    // uniform init in [-k, k], k = 1/sqrt(fan_in), deterministic in seed
    static model_params init(const model_dims& dims, std::uint64_t seed);
    static model_params zeros_like(const model_params& other);
};

// canonical (name, tensor) enumeration; checkpoint files, optimizer
// state, and gradient accumulators all follow this order
std::vector<std::pair<std::string, tensor*>> named_tensors(model_params& p);
std::vector<std::pair<std::string, const tensor*>> named_tensors(
    const model_params& p);

bool params_equal(const model_params& a, const model_params& b);

// .esgm, little-endian: magic "ESGM", version u32 = 1, tensor count u32,
// then per tensor: name length u16, UTF-8 name, rank u8, dims (u32 each),
// IEEE-754 32-bit floats row-major.
void save_checkpoint(const model_params& p, const std::string& path);
model_params load_checkpoint(const std::string& path);

// ---- tape-side forward graph ----

struct gru_leaves {
    value w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h;
};

struct param_leaves {
    gru_leaves enc_fwd, enc_bwd, dec;
    value in_proj_w, in_proj_b, init_w, init_b;
    value mlp_w1, mlp_b1, mlp_w2, mlp_b2, mlp_w3, mlp_b3;
};

param_leaves register_params(tape& tp, const model_params& p);

// leaf handles in the same order as named_tensors
std::vector<value> leaf_list(const param_leaves& l);

// acc += gradients of the registered leaves; call after tp.backward
void accumulate_grads(const tape& tp, const param_leaves& l,
                      model_params& acc);

struct forward_options {
    double dropout = 0.0;            // applied only when rng is set
    counter_rng* dropout_rng = nullptr;
};

// z = sigma(W_z x + U_z h + b_z), r = sigma(W_r x + U_r h + b_r),
// hc = tanh(W_h x + U_h (r*h) + b_h), h' = (1-z)*h + z*hc
value gru_cell(tape& tp, const gru_leaves& g, value x, value h_prev);

// context features: v_hat_t = ReLU([h_fwd_t; h_bwd_t] + P v_t), T x 2H
value encode_video(tape& tp, const param_leaves& l,
                   const segment_features& feats);

// h_0 = tanh(Q meanpool(v_hat))
value init_decoder_state(tape& tp, const param_leaves& l, value ctx);

// masked mean of context rows under the indicator; <sos>/<eos> all-zeros
// maps to the zero vector
value indicator_embed(tape& tp, value ctx, const event_indicator& e_prev);

struct decoder_out {
    value h;  // H_dec
    value p;  // length-T event distribution
};

decoder_out decoder_step(tape& tp, const param_leaves& l,
                         const event_indicator& e_prev, value h_prev,
                         value ctx, const forward_options& opt = {});

// Teacher-forced sequence loss: K+1 decoder steps fed <sos> then the
// ground-truth indicators, each step's mean BCE against the next
// indicator (all-zeros <eos> last), summed over steps.
value sequence_nll(tape& tp, const param_leaves& l,
                   const segment_features& feats,
                   const std::vector<event_interval>& gt_events,
                   int max_event_len, const forward_options& opt = {});

// [first index with p >= threshold, last such index]; nullopt when no
// entry reaches the threshold (the <eos> condition)
std::optional<event_interval> extract_interval(const std::vector<double>& p,
                                               double threshold = 0.5);

}  // namespace esg
