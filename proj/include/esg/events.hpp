#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace esg {

// inclusive segment-index span [t0, t1] of one event
struct event_interval {
    int t0 = 0;
    int t1 = 0;

    int length() const { return t1 - t0 + 1; }
    bool operator==(const event_interval&) const = default;
};

// T-dimensional binary vector; ones form one contiguous run, or all
// entries are zero (the special <sos>/<eos> events)
using event_indicator = std::vector<std::uint8_t>;

// throws validation_error unless 0 <= t0 <= t1 < t_count
void check_interval(const event_interval& e, int t_count);

// Maps a second-based annotation onto segment indices. floor on the
// start and ceil on the end, so the segment interval always covers the
// second interval.
event_interval timestamps_to_segments(double start_sec, double end_sec,
                                      double duration, int t_count);

// [t0 * duration/T, (t1+1) * duration/T]
std::array<double, 2> segments_to_seconds(const event_interval& e,
                                          double duration, int t_count);

event_indicator interval_to_indicator(const event_interval& e, int t_count);

// nullopt for the all-zero indicator; validation_error when the ones are
// not one contiguous run
std::optional<event_interval> indicator_to_interval(const event_indicator& x);

}  // namespace esg
