#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/event_detector.hpp"
#include "pvrelay/detect/gwo.hpp"
#include "pvrelay/signal/corpus.hpp"

namespace pvrelay {

/// Denominator of the tuning objective 1 - (detected within one cycle) / N.
/// `total`: N counts every disturbance. `triggered`: N counts disturbances that trigger at all.
enum class GammaObjective { total, triggered };

inline std::string_view to_string(GammaObjective o) { return o == GammaObjective::total ? "total" : "triggered"; }

struct GammaTuningOptions {
    TriggerPolicy trigger_policy = TriggerPolicy::any_phase;
    GammaObjective objective = GammaObjective::total;
};

struct GammaTuningResult {
    double gamma = 0.0;
    double fitness = 0.0;
    std::vector<GwoTracePoint> trace;
};

/// Inception sample of a record: the stored generator value, else derived from
/// the label angle with two pre-event cycles.
inline std::size_t record_inception(const WaveformRecord& rec) {
    if (auto it = rec.meta.find("inception_sample"); it != rec.meta.end())
        if (auto v = parse_uint(it->second)) return static_cast<std::size_t>(*v);
    const std::size_t m = rec.samples_per_cycle();
    return 2 * m + static_cast<std::size_t>(std::llround(rec.label.inception_angle_deg / 360.0 * static_cast<double>(m)));
}

/// Peaks of the combined ED statistic that decide a record's outcome at any gamma.
struct EdPeaks {
    double before = 0.0;   // before inception: a trigger here is premature
    double window = 0.0;   // inception .. inception + M
    double overall = 0.0;
};

inline EdPeaks ed_peaks(const WaveformRecord& rec, TriggerPolicy policy) {
    const std::size_t m = rec.samples_per_cycle();
    const std::size_t inc = record_inception(rec);
    const auto trace = ed_trace(rec, m);
    const auto g = combined_ed(trace, policy);
    EdPeaks p;
    p.before = p.window = p.overall = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t x = trace.first_index + i;
        p.overall = std::max(p.overall, g[i]);
        if (x < inc) p.before = std::max(p.before, g[i]);
        else if (x <= inc + m) p.window = std::max(p.window, g[i]);
    }
    return p;
}

inline double gamma_fitness(const std::vector<EdPeaks>& peaks, double gamma, GammaObjective objective) {
    std::size_t within = 0, triggered = 0;
    for (const auto& p : peaks) {
        if (p.overall >= gamma) ++triggered;
        if (p.before < gamma && p.window >= gamma) ++within;
    }
    const std::size_t denom = objective == GammaObjective::total ? peaks.size() : triggered;
    if (denom == 0) return 1.0;
    return 1.0 - static_cast<double>(within) / static_cast<double>(denom);
}

/// Tunes the detector threshold on the disturbance records of a corpus.
/// Equal fitness prefers the larger gamma.
inline GammaTuningResult tune_gamma(const Corpus& corpus, const GwoParams& gwo,
                                    const GammaTuningOptions& options = {}) {
    std::vector<const WaveformRecord*> disturbances;
    for (const auto& r : corpus.records)
        if (r.label.kind != EventKind::steady) disturbances.push_back(&r);
    if (disturbances.empty()) throw ConfigError("tune_gamma: corpus has no disturbance records");

    std::vector<EdPeaks> peaks(disturbances.size());
    parallel_for(disturbances.size(),
                 [&](std::size_t i) { peaks[i] = ed_peaks(*disturbances[i], options.trigger_policy); });

    auto objective = [&](const std::vector<double>& x) { return gamma_fitness(peaks, x[0], options.objective); };
    auto prefer_larger = [](const std::vector<double>& a, const std::vector<double>& b) { return a[0] > b[0]; };
    GwoParams p = gwo;
    p.dimensions = 1;
    const auto res = gwo_minimize(objective, p, prefer_larger);
    return {res.best_position[0], res.best_value, res.trace};
}

}  // namespace pvrelay
