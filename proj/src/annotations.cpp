#include "esg/annotations.hpp"

#include <fstream>

#include <json.hpp>

#include "esg/error.hpp"

namespace esg {

using nlohmann::json;

void validate(const annotation_set& ann) {
    for (const auto& [id, va] : ann.videos) {
        if (!(va.duration > 0.0)) {
            throw validation_error("video " + id +
                                   ": duration must be positive");
        }
        if (va.timestamps.empty()) {
            throw validation_error("video " + id + ": no events");
        }
        for (const auto& ts : va.timestamps) {
            if (!(ts[0] >= 0.0) || !(ts[0] < ts[1]) ||
                !(ts[1] <= va.duration)) {
                throw validation_error(
                    "video " + id + ": timestamp [" + std::to_string(ts[0]) +
                    ", " + std::to_string(ts[1]) + "] outside [0, " +
                    std::to_string(va.duration) + "]");
            }
        }
    }
}

annotation_set load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open annotation file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw format_error("annotation file " + path + ": " + e.what());
    }
    if (!j.is_object()) {
        throw format_error("annotation file " + path +
                           ": top level must be an object");
    }
    annotation_set ann;
    for (const auto& [id, entry] : j.items()) {
        if (!entry.is_object() || !entry.contains("duration") ||
            !entry.contains("timestamps")) {
            throw format_error("annotation for " + id +
                               " must have duration and timestamps");
        }
        video_annotation va;
        va.duration = entry.at("duration").get<double>();
        for (const auto& ts : entry.at("timestamps")) {
            if (!ts.is_array() || ts.size() != 2) {
                throw format_error("annotation for " + id +
                                   ": timestamps must be [start, end] pairs");
            }
            va.timestamps.push_back({ts[0].get<double>(), ts[1].get<double>()});
        }
        if (entry.contains("pattern") && !entry.at("pattern").is_null()) {
            va.pattern = entry.at("pattern").get<std::string>();
        }
        ann.videos.emplace(id, std::move(va));
    }
    validate(ann);
    return ann;
}

void save_annotations(const annotation_set& ann, const std::string& path) {
    validate(ann);
    json j = json::object();
    for (const auto& [id, va] : ann.videos) {
        json entry;
        entry["duration"] = va.duration;
        json ts = json::array();
        for (const auto& t : va.timestamps) {
            ts.push_back({t[0], t[1]});
        }
        entry["timestamps"] = std::move(ts);
        if (va.pattern) {
            entry["pattern"] = *va.pattern;
        }
        j[id] = std::move(entry);
    }
    std::ofstream os(path, std::ios::trunc);
    if (!os) {
        throw io_error("cannot open " + path + " for writing");
    }
    os << j.dump(2) << "\n";
    if (!os) {
        throw io_error("write failure on " + path);
    }
}

}  // namespace esg
