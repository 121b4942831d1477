#include "esg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "esg/error.hpp"
#include "esg/evaluation.hpp"
#include "esg/events.hpp"
#include "esg/rng.hpp"

namespace esg {

namespace {

using interval = std::array<double, 2>;

constexpr std::uint64_t kStructureSalt = 0x5752a3;
constexpr std::uint64_t kFeatureSalt = 0xfea75;

order_label draw_pattern(counter_rng& rng) {
    double u = rng.next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i < kOrderProportions.size(); ++i) {
        acc += kOrderProportions[i];
        if (u < acc) {
            return static_cast<order_label>(i);
        }
    }
    return order_label::other;
}

std::vector<interval> gen_sequential(counter_rng& rng, double dur) {
    int k = static_cast<int>(rng.next_int(1, 5));
    std::vector<double> len(static_cast<std::size_t>(k));
    double total = 0.0;
    for (double& l : len) {
        l = (0.08 + 0.16 * rng.next_unit()) * dur;
        total += l;
    }
    if (total > 0.75 * dur) {
        for (double& l : len) {
            l *= 0.75 * dur / total;
        }
        total = 0.75 * dur;
    }
    std::vector<double> gap(static_cast<std::size_t>(k) + 1);
    double gap_total = 0.0;
    for (double& g : gap) {
        g = rng.next_unit();
        gap_total += g;
    }
    double slack = dur - total;
    std::vector<interval> evs;
    double pos = 0.0;
    for (int i = 0; i < k; ++i) {
        pos += gap[static_cast<std::size_t>(i)] / gap_total * slack;
        double s = pos;
        double e = s + len[static_cast<std::size_t>(i)];
        pos = e;
        evs.push_back({s, e});
    }
    return evs;
}

std::vector<interval> gen_summary_details(counter_rng& rng, double dur) {
    int k = static_cast<int>(rng.next_int(2, 5));
    double c0 = 0.04 * dur * rng.next_unit();
    double c1 = dur - 0.04 * dur * rng.next_unit();
    std::vector<interval> evs{{c0, c1}};
    double inner = c1 - c0;
    for (int i = 1; i < k; ++i) {
        double len = (0.15 + 0.25 * rng.next_unit()) * inner;
        double s = c0 + 0.03 * dur +
                   rng.next_unit() * (inner - 0.04 * dur - len);
        evs.push_back({s, s + len});
    }
    return evs;
}

std::vector<interval> gen_details_summary(counter_rng& rng, double dur) {
    int k = static_cast<int>(rng.next_int(2, 5));
    // the covering event must sort last: details start at or slightly
    // before the cover's start (within the classifier's slack) and end
    // well before the cover does
    double c0 = (0.05 + 0.02 * rng.next_unit()) * dur;
    double c1 = dur - 0.02 * dur * rng.next_unit();
    std::vector<interval> evs;
    double minlen = 0.08 * dur;
    for (int i = 1; i < k; ++i) {
        double s = c0 - rng.next_unit() * 0.035 * dur;
        double e = s + minlen + rng.next_unit() * (0.45 * dur - minlen);
        evs.push_back({s, e});
    }
    evs.push_back({c0, c1});
    return evs;
}

std::vector<interval> gen_other(counter_rng& rng, double dur) {
    int k = static_cast<int>(rng.next_int(3, 5));
    auto jit = [&rng, dur]() { return 0.01 * dur * rng.next_unit(); };
    // an event nested inside the first plus a later disjoint event, so
    // neither the sequential nor the containment rules apply
    interval a{0.05 * dur + jit(), 0.45 * dur + jit()};
    interval b{a[0] + 0.25 * (a[1] - a[0]), a[1] - 0.25 * (a[1] - a[0])};
    interval c{0.55 * dur + jit(), 0.72 * dur + jit()};
    std::vector<interval> evs{a, b, c};
    double pos = 0.78 * dur;
    for (int i = 3; i < k; ++i) {
        double s = pos + jit();
        double e = s + 0.05 * dur + jit();
        evs.push_back({s, e});
        pos = e + 0.01 * dur;
    }
    return evs;
}

std::vector<interval> gen_events(counter_rng& rng, order_label pat,
                                 double dur) {
    switch (pat) {
        case order_label::sequential:
            return gen_sequential(rng, dur);
        case order_label::summary_details:
            return gen_summary_details(rng, dur);
        case order_label::details_summary:
            return gen_details_summary(rng, dur);
        case order_label::other:
            return gen_other(rng, dur);
    }
    return {};
}

std::vector<double> unit_vector(counter_rng& rng, int dim) {
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm2 = 0.0;
    for (double& x : v) {
        x = rng.next_normal(1.0);
        norm2 += x * x;
    }
    double norm = std::sqrt(norm2);
    if (norm < 1e-12) {
        v[0] = 1.0;
        return v;
    }
    for (double& x : v) {
        x /= norm;
    }
    return v;
}

}  // namespace

synth_dataset synthesize_dataset(const synth_config& cfg) {
    if (cfg.n_videos < 1) {
        throw validation_error("n_videos must be >= 1");
    }
    if (cfg.t_min < 8 || cfg.t_max > 256 || cfg.t_min > cfg.t_max) {
        throw validation_error("T range must lie within [8, 256]");
    }
    if (cfg.dim < 4) {
        throw validation_error("feature dim must be >= 4");
    }
    synth_dataset ds;
    for (int idx = 0; idx < cfg.n_videos; ++idx) {
        counter_rng rng(cfg.seed,
                        derive_stream(kStructureSalt,
                                      static_cast<std::uint64_t>(idx)));
        int t_count = static_cast<int>(rng.next_int(cfg.t_min, cfg.t_max));
        double dur = static_cast<double>(t_count);
        order_label pat = draw_pattern(rng);

        std::vector<interval> evs;
        for (int attempt = 0; attempt < 100; ++attempt) {
            evs = gen_events(rng, pat, dur);
            for (interval& e : evs) {
                e[0] = std::clamp(e[0], 0.0, dur - 0.05);
                e[1] = std::clamp(e[1], e[0] + 0.05, dur);
            }
            if (classify_order(evs) == pat) {
                break;
            }
        }
        std::sort(evs.begin(), evs.end());

        std::ostringstream id;
        id << cfg.id_prefix;
        id.width(6);
        id.fill('0');
        id << idx;

        counter_rng frng(cfg.seed,
                         derive_stream(kFeatureSalt,
                                       static_cast<std::uint64_t>(idx)));
        std::vector<double> acc(
            static_cast<std::size_t>(t_count) * cfg.dim, 0.0);
        std::vector<double> bg = unit_vector(frng, cfg.dim);
        for (int t = 0; t < t_count; ++t) {
            for (int d = 0; d < cfg.dim; ++d) {
                acc[static_cast<std::size_t>(t) * cfg.dim + d] = bg[d];
            }
        }
        for (const interval& e : evs) {
            std::vector<double> sig = unit_vector(frng, cfg.dim);
            event_interval seg =
                timestamps_to_segments(e[0], e[1], dur, t_count);
            for (int t = seg.t0; t <= seg.t1; ++t) {
                for (int d = 0; d < cfg.dim; ++d) {
                    acc[static_cast<std::size_t>(t) * cfg.dim + d] += sig[d];
                }
            }
        }
        segment_features f;
        f.video_id = id.str();
        f.t_count = t_count;
        f.dim = cfg.dim;
        f.values.resize(acc.size());
        for (std::size_t i = 0; i < acc.size(); ++i) {
            f.values[i] = static_cast<float>(acc[i] + 0.1 * frng.next_normal());
        }

        video_annotation va;
        va.duration = dur;
        va.timestamps.assign(evs.begin(), evs.end());
        va.pattern = order_label_name(pat);
        ds.annotations.videos.emplace(f.video_id, std::move(va));
        ds.features.push_back(std::move(f));
    }
    validate(ds.annotations);
    return ds;
}

void write_dataset(const synth_dataset& ds, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw io_error("cannot create directory " + dir + ": " +
                       ec.message());
    }
    for (const segment_features& f : ds.features) {
        write_features(f, (std::filesystem::path(dir) /
                           (f.video_id + ".esgf")).string());
    }
    save_annotations(ds.annotations,
                     (std::filesystem::path(dir) / "annotations.json")
                         .string());
}

}  // namespace esg
