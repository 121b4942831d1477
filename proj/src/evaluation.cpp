#include "esg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "esg/error.hpp"

namespace esg {

using nlohmann::json;

void save_proposals(const proposal_set& ps, const std::string& path,
                    bool with_scores) {
    json j = json::object();
    for (const auto& [id, props] : ps.videos) {
        json list = json::array();
        for (const proposal& p : props) {
            json e;
            e["segment"] = {p.segment[0], p.segment[1]};
            e["source"] = p.source;
            if (with_scores) {
                e["score"] = p.score;
            }
            list.push_back(std::move(e));
        }
        j[id] = std::move(list);
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

proposal_set load_proposals(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("cannot open proposal file " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw format_error("proposal file " + path + ": " + e.what());
    }
    if (!j.is_object()) {
        throw format_error("proposal file " + path +
                           ": top level must be an object");
    }
    proposal_set ps;
    for (const auto& [id, list] : j.items()) {
        std::vector<proposal> props;
        for (const auto& e : list) {
            proposal p;
            p.segment = {e.at("segment")[0].get<double>(),
                         e.at("segment")[1].get<double>()};
            p.source = e.value("source", "fused");
            p.score = e.value("score", 0.0);
            props.push_back(std::move(p));
        }
        ps.videos.emplace(id, std::move(props));
    }
    return ps;
}

double tiou(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    if (!(a[0] < a[1]) || !(b[0] < b[1])) {
        throw validation_error("tiou on zero-length interval");
    }
    double inter = std::max(0.0, std::min(a[1], b[1]) - std::max(a[0], b[0]));
    double uni = (a[1] - a[0]) + (b[1] - b[0]) - inter;
    return inter / uni;
}

double tiou_segments(int a0, int a1, int b0, int b1) {
    return tiou({static_cast<double>(a0), static_cast<double>(a1) + 1.0},
                {static_cast<double>(b0), static_cast<double>(b1) + 1.0});
}

metric_table recall_precision(const proposal_set& proposals,
                              const annotation_set& gt) {
    if (gt.empty()) {
        throw validation_error("recall_precision on empty annotation set");
    }
    for (const auto& [id, _] : proposals.videos) {
        if (!gt.videos.count(id)) {
            throw validation_error("proposals reference unknown video " + id);
        }
    }
    metric_table m;
    double ev_sum = 0.0;
    double st_sum = 0.0;
    std::array<double, 4> rec_sum{};
    std::array<double, 4> pre_sum{};
    static const std::vector<proposal> kNone;
    for (const auto& [id, va] : gt.videos) {
        auto it = proposals.videos.find(id);
        const std::vector<proposal>& props =
            it == proposals.videos.end() ? kNone : it->second;
        ev_sum += static_cast<double>(props.size());
        std::vector<std::array<double, 2>> segs;
        segs.reserve(props.size());
        for (const proposal& p : props) {
            segs.push_back(p.segment);
        }
        st_sum += self_tiou(segs);
        for (std::size_t k = 0; k < m.thresholds.size(); ++k) {
            double thr = m.thresholds[k];
            int gt_hit = 0;
            for (const auto& g : va.timestamps) {
                bool hit = std::any_of(segs.begin(), segs.end(),
                                       [&](const std::array<double, 2>& s) {
                                           return tiou(g, s) >= thr;
                                       });
                gt_hit += hit ? 1 : 0;
            }
            rec_sum[k] += static_cast<double>(gt_hit) /
                          static_cast<double>(va.timestamps.size());
            if (!segs.empty()) {
                int prop_hit = 0;
                for (const auto& s : segs) {
                    bool hit = std::any_of(
                        va.timestamps.begin(), va.timestamps.end(),
                        [&](const std::array<double, 2>& g) {
                            return tiou(g, s) >= thr;
                        });
                    prop_hit += hit ? 1 : 0;
                }
                pre_sum[k] += static_cast<double>(prop_hit) /
                              static_cast<double>(segs.size());
            }
        }
    }
    double n = static_cast<double>(gt.size());
    for (std::size_t k = 0; k < m.thresholds.size(); ++k) {
        m.recall[k] = rec_sum[k] / n;
        m.precision[k] = pre_sum[k] / n;
        m.recall_avg += m.recall[k] / 4.0;
        m.precision_avg += m.precision[k] / 4.0;
    }
    m.events_per_video = ev_sum / n;
    m.mean_self_tiou = st_sum / n;
    return m;
}

double self_tiou(const std::vector<std::array<double, 2>>& proposals) {
    std::size_t n = proposals.size();
    if (n < 2) {
        return 0.0;
    }
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            sum += tiou(proposals[i], proposals[j]);
            ++pairs;
        }
    }
    return sum / pairs;
}

const char* order_label_name(order_label l) {
    switch (l) {
        case order_label::sequential:
            return "Sequential";
        case order_label::summary_details:
            return "SummaryDetails";
        case order_label::details_summary:
            return "DetailsSummary";
        case order_label::other:
            return "Other";
    }
    return "Other";
}

order_label order_label_from_name(const std::string& name) {
    for (order_label l :
         {order_label::sequential, order_label::summary_details,
          order_label::details_summary, order_label::other}) {
        if (name == order_label_name(l)) {
            return l;
        }
    }
    throw validation_error("unknown order label: " + name);
}

order_label classify_order(std::vector<std::array<double, 2>> events,
                           double eps_frac) {
    if (events.empty()) {
        throw validation_error("classify_order on empty event list");
    }
    std::sort(events.begin(), events.end());
    std::size_t k = events.size();
    if (k == 1) {
        return order_label::sequential;
    }
    double span_start = events.front()[0];
    double span_end = events.front()[1];
    for (const auto& e : events) {
        span_end = std::max(span_end, e[1]);
    }
    double eps = eps_frac * (span_end - span_start);
    auto contains = [eps](const std::array<double, 2>& outer,
                          const std::array<double, 2>& inner) {
        return inner[0] >= outer[0] - eps && inner[1] <= outer[1] + eps;
    };
    auto contains_all = [&](std::size_t idx) {
        for (std::size_t i = 0; i < events.size(); ++i) {
            if (i != idx && !contains(events[idx], events[i])) {
                return false;
            }
        }
        return true;
    };
    if (contains_all(0)) {
        return order_label::summary_details;
    }
    if (contains_all(k - 1)) {
        return order_label::details_summary;
    }
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < k; ++i) {
        if (events[i + 1][0] < events[i][0] || events[i + 1][1] < events[i][1]) {
            monotone = false;
            break;
        }
    }
    bool any_containment = false;
    for (std::size_t i = 0; i < k && !any_containment; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            if (i != j && contains(events[i], events[j])) {
                any_containment = true;
                break;
            }
        }
    }
    if (monotone && !any_containment) {
        return order_label::sequential;
    }
    return order_label::other;
}

order_stats corpus_order_stats(const annotation_set& ann, double eps_frac) {
    if (ann.empty()) {
        throw validation_error("corpus_order_stats on empty corpus");
    }
    order_stats st;
    for (const auto& [id, va] : ann.videos) {
        order_label l = classify_order(va.timestamps, eps_frac);
        st.fraction[static_cast<std::size_t>(l)] += 1.0;
    }
    for (double& f : st.fraction) {
        f /= static_cast<double>(ann.size());
    }
    return st;
}

std::string format_metric_table(const std::string& title,
                                const metric_table& m) {
    std::ostringstream os;
    os << title << "\n";
    os << std::fixed << std::setprecision(2);
    auto block = [&os, &m](const char* name,
                           const std::array<double, 4>& vals, double avg) {
        os << std::left << std::setw(10) << name << std::right;
        for (double v : vals) {
            os << std::setw(8) << v * 100.0;
        }
        os << std::setw(8) << avg * 100.0 << "\n";
    };
    os << std::left << std::setw(10) << "@tIoU" << std::right;
    for (double t : m.thresholds) {
        os << std::setw(8) << t;
    }
    os << std::setw(8) << "Avg" << "\n";
    block("Recall", m.recall, m.recall_avg);
    block("Precision", m.precision, m.precision_avg);
    os << "events/video " << m.events_per_video << ", self-tIoU "
       << m.mean_self_tiou << "\n";
    return os.str();
}

}  // namespace esg
