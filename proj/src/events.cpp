#include "esg/events.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "esg/error.hpp"

namespace esg {

void check_interval(const event_interval& e, int t_count) {
    if (e.t0 < 0 || e.t0 > e.t1 || e.t1 >= t_count) {
        throw validation_error("event interval [" + std::to_string(e.t0) +
                               ", " + std::to_string(e.t1) +
                               "] invalid for T=" + std::to_string(t_count));
    }
}

event_interval timestamps_to_segments(double start_sec, double end_sec,
                                      double duration, int t_count) {
    if (t_count < 1) {
        throw validation_error("segment count must be >= 1");
    }
    if (!(start_sec >= 0.0) || !(start_sec < end_sec) ||
        !(end_sec <= duration)) {
        throw validation_error(
            "timestamps must satisfy 0 <= start < end <= duration, got [" +
            std::to_string(start_sec) + ", " + std::to_string(end_sec) +
            "] in " + std::to_string(duration));
    }
    int t0 = static_cast<int>(std::floor(start_sec / duration * t_count));
    t0 = std::clamp(t0, 0, t_count - 1);
    int t1 = static_cast<int>(std::ceil(end_sec / duration * t_count)) - 1;
    t1 = std::clamp(t1, t0, t_count - 1);
    return event_interval{t0, t1};
}

std::array<double, 2> segments_to_seconds(const event_interval& e,
                                          double duration, int t_count) {
    check_interval(e, t_count);
    return {e.t0 * duration / t_count, (e.t1 + 1) * duration / t_count};
}

event_indicator interval_to_indicator(const event_interval& e, int t_count) {
    check_interval(e, t_count);
    event_indicator x(static_cast<std::size_t>(t_count), 0);
    for (int t = e.t0; t <= e.t1; ++t) {
        x[static_cast<std::size_t>(t)] = 1;
    }
    return x;
}

std::optional<event_interval> indicator_to_interval(const event_indicator& x) {
    int first = -1;
    int last = -1;
    for (int t = 0; t < static_cast<int>(x.size()); ++t) {
        if (x[static_cast<std::size_t>(t)]) {
            if (first < 0) {
                first = t;
            }
            last = t;
        }
    }
    if (first < 0) {
        return std::nullopt;
    }
    for (int t = first; t <= last; ++t) {
        if (!x[static_cast<std::size_t>(t)]) {
            throw validation_error(
                "indicator ones are not contiguous (gap at segment " +
                std::to_string(t) + ")");
        }
    }
    return event_interval{first, last};
}

}  // namespace esg
