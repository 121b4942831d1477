#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "esg/annotations.hpp"
#include "esg/features.hpp"

namespace esg {

struct synth_config {
    int n_videos = 200;
    int t_min = 20;
    int t_max = 60;
    int dim = 16;
    std::uint64_t seed = 42;
    std::string id_prefix = "video_";
};

struct synth_dataset {
    std::vector<segment_features> features;  // ordered by video_id
    annotation_set annotations;
};

// Plants event structure following the corpus temporal-order
// proportions (81.50% Sequential, 16.94% Summary-Details,
// 0.40% Details-Summary, 1.16% Other). Each event carries a random unit
// signature vector; segment features are the sum of the signatures of
// covering events plus a per-video background unit vector plus Gaussian
// noise (sigma 0.1). Deterministic under seed: all draws go through the
// counter PRNG, so outputs are byte-identical across runs and platforms.
synth_dataset synthesize_dataset(const synth_config& cfg);

// writes <video_id>.esgf files plus annotations.json into dir
void write_dataset(const synth_dataset& ds, const std::string& dir);

inline constexpr std::array<double, 4> kOrderProportions{0.8150, 0.1694,
                                                         0.0040, 0.0116};

}  // namespace esg
