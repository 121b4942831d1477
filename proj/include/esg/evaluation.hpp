#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "esg/annotations.hpp"

namespace esg {

// second-based proposal interval with its provenance
struct proposal {
    std::array<double, 2> segment{0.0, 0.0};  // [start_sec, end_sec]
    std::string source;                       // fused | forward | backward
    double score = 0.0;  // mean in-interval probability, diagnostic only
};

// video_id -> proposals in seconds
struct proposal_set {
    std::map<std::string, std::vector<proposal>> videos;
};

// JSON mapping video_id -> list of {"segment": [s, e], "source": str};
// "score" is included only when with_scores is set
void save_proposals(const proposal_set& ps, const std::string& path,
                    bool with_scores = false);
proposal_set load_proposals(const std::string& path);

inline constexpr std::array<double, 4> kTiouThresholds{0.3, 0.5, 0.7, 0.9};

struct metric_table {
    std::array<double, 4> thresholds = kTiouThresholds;
    std::array<double, 4> recall{};
    std::array<double, 4> precision{};
    double recall_avg = 0.0;
    double precision_avg = 0.0;
    double events_per_video = 0.0;
    double mean_self_tiou = 0.0;
};

// temporal IoU of two second-based intervals (start < end each)
double tiou(const std::array<double, 2>& a, const std::array<double, 2>& b);

// tIoU of two inclusive segment-index intervals, treated as half-open
// real intervals [t0, t1+1)
double tiou_segments(int a0, int a1, int b0, int b1);

// Per-video recall = fraction of ground-truth events matched by some
// proposal at tIoU >= threshold; precision = fraction of proposals
// matching some ground-truth event (0 when the video has no proposals).
// Macro-averaged over the annotated videos; proposals for unknown video
// ids raise validation_error.
metric_table recall_precision(const proposal_set& proposals,
                              const annotation_set& gt);

// mean tIoU over unordered pairs; 0 when fewer than two proposals
double self_tiou(const std::vector<std::array<double, 2>>& proposals);

enum class order_label { sequential, summary_details, details_summary, other };

const char* order_label_name(order_label l);
order_label order_label_from_name(const std::string& name);

// Temporal-order classification of one video's events. Events are
// sorted by (start, end); slack is eps_frac times the event span.
//   SummaryDetails: the first event eps-contains every other (K >= 2)
//   DetailsSummary: the last event eps-contains every other (K >= 2)
//   Sequential: K == 1, or starts and ends both non-decreasing and no
//               event eps-contains another
//   Other: anything else
order_label classify_order(std::vector<std::array<double, 2>> events,
                           double eps_frac = 0.1);

struct order_stats {
    // fractions indexed by order_label, summing to 1
    std::array<double, 4> fraction{};
};

order_stats corpus_order_stats(const annotation_set& ann,
                               double eps_frac = 0.1);

// plain-text table: recall block then precision block over the four
// thresholds plus Avg
std::string format_metric_table(const std::string& title,
                                const metric_table& m);

}  // namespace esg
