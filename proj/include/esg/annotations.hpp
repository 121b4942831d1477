#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace esg {

struct video_annotation {
    double duration = 0.0;  // seconds
    std::vector<std::array<double, 2>> timestamps;  // [start, end] seconds
    std::optional<std::string> pattern;  // temporal-order label, if known
};

// video_id -> annotation; ordered map so iteration order is stable
struct annotation_set {
    std::map<std::string, video_annotation> videos;

    bool empty() const { return videos.empty(); }
    std::size_t size() const { return videos.size(); }
};

// throws validation_error on duration <= 0, empty event list, or
// timestamps outside [0, duration]
void validate(const annotation_set& ann);

// JSON object mapping video_id -> {"duration": number,
// "timestamps": [[s,e],...], "pattern": optional string}
annotation_set load_annotations(const std::string& path);
void save_annotations(const annotation_set& ann, const std::string& path);

}  // namespace esg
