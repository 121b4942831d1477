#pragma once

#include <string>
#include <vector>

namespace esg {

// Per-video T x D segment-feature sequence. Stored as 32-bit floats to
// match the on-disk format exactly.
struct segment_features {
    std::string video_id;
    int t_count = 0;
    int dim = 0;
    std::vector<float> values;  // row-major T x D

    float at(int t, int d) const {
        return values[static_cast<std::size_t>(t) * dim + d];
    }
    float& at(int t, int d) {
        return values[static_cast<std::size_t>(t) * dim + d];
    }
};

// reverses the segment order (row order) in place
segment_features reverse_segments(const segment_features& f);

// .esgf, little-endian: magic "ESGF", version u32 = 1, T u32, D u32,
// then T*D IEEE-754 32-bit floats row-major. video_id is the file stem.
segment_features load_features(const std::string& path);
void write_features(const segment_features& f, const std::string& path);

}  // namespace esg
