#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/learn/metrics.hpp"
#include "pvrelay/pipeline/bundle.hpp"

namespace pvrelay {

struct EvalFilter {
    std::optional<double> snr_db;  // keep records generated at this noise level
    std::optional<EventKind> kind;

    bool accepts(const WaveformRecord& r) const {
        if (kind && r.label.kind != *kind) return false;
        if (snr_db) {
            auto it = r.meta.find("snr_db");
            if (it == r.meta.end()) return false;
            auto v = parse_double(it->second);
            if (!v || std::fabs(*v - *snr_db) > 1e-9) return false;
        }
        return true;
    }
};

struct ScenarioRow {
    std::string scenario;
    std::size_t n = 0;
    std::size_t faults = 0;
    std::size_t detected_faults = 0;
    std::size_t non_faults = 0;
    std::size_t rejected_non_faults = 0;
};

struct LatencySummary {
    std::string stage;
    std::size_t n = 0;
    double p50 = 0.0, p95 = 0.0, p99 = 0.0, max = 0.0;
};

struct EvaluationReport {
    std::size_t records = 0;
    std::size_t untriggered = 0;
    std::size_t capture_failed = 0;
    FusionPolicy fusion = FusionPolicy::both;
    double detect = 0.0;  // fused under the bundle's policy
    std::map<FusionPolicy, double> fused;
    double locate = 0.0;  // stage-wise on fault windows
    double phase = 0.0;   // stage-wise on internal-fault windows
    double trip_accuracy = 0.0;  // end-to-end trip decision vs internal-fault truth
    ConfusionMatrix detect_cm, locate_cm, phase_cm;
    std::vector<ScenarioRow> scenarios;
    std::vector<Verdict> verdicts;  // aligned with the evaluated records
    std::vector<std::size_t> record_index;
    std::vector<LatencySummary> latency;
};

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Per-stage latency over the verdicts that reached each stage.
inline std::vector<LatencySummary> summarize_latency(const std::vector<Verdict>& verdicts) {
    std::vector<LatencySummary> out;
    for (std::size_t s = 0; s < std::size(kStageNames); ++s) {
        std::vector<double> v;
        for (const auto& vd : verdicts) {
            const double t = timing_values(vd.timings)[s];
            const bool reached = s == 0 || s == 7 || (s == 1 && vd.triggered) ||
                                 ((s == 2 || s == 3 || s == 4) && vd.triggered && !vd.capture_failed) ||
                                 (s == 5 && vd.zone) || (s == 6 && vd.phases);
            if (reached) v.push_back(t);
        }
        LatencySummary l;
        l.stage = kStageNames[s];
        l.n = v.size();
        l.p50 = percentile(v, 0.50);
        l.p95 = percentile(v, 0.95);
        l.p99 = percentile(v, 0.99);
        l.max = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
        out.push_back(l);
    }
    return out;
}

namespace eval_detail {

inline std::string meta_or(const WaveformRecord& r, const char* key, const char* fallback) {
    auto it = r.meta.find(key);
    return it == r.meta.end() ? fallback : it->second;
}

}  // namespace eval_detail

/// Runs every accepted record through the staged pipeline.
inline EvaluationReport evaluate(const Corpus& corpus, const TrainedBundle& bundle, const EvalFilter& filter = {},
                                 unsigned threads = 0) {
    EvaluationReport rep;
    rep.fusion = bundle.fusion;
    for (std::size_t i = 0; i < corpus.records.size(); ++i)
        if (filter.accepts(corpus.records[i])) rep.record_index.push_back(i);
    rep.records = rep.record_index.size();
    rep.verdicts.resize(rep.records);
    parallel_for(
        rep.records, [&](std::size_t k) { rep.verdicts[k] = run_inference(corpus.records[rep.record_index[k]], bundle); },
        threads);

    std::vector<int> yd, pd, yz, pz, yp, pp, yt, pt;
    std::map<FusionPolicy, std::vector<int>> fused;
    std::map<std::string, ScenarioRow> rows;
    std::vector<std::string> order;
    for (std::size_t k = 0; k < rep.records; ++k) {
        const auto& rec = corpus.records[rep.record_index[k]];
        const auto& l = rec.label;
        const auto& v = rep.verdicts[k];
        if (!v.triggered) ++rep.untriggered;
        if (v.capture_failed) ++rep.capture_failed;
        const bool truth = l.is_faulted();
        yd.push_back(truth ? 1 : 0);
        pd.push_back(v.is_fault ? 1 : 0);
        for (auto p : kFusionPolicies) fused[p].push_back(fuse(p, v.fuzzy_fault, v.forest_fault) ? 1 : 0);
        const bool internal = truth && l.location && zone_of(*l.location) == Zone::internal;
        yt.push_back(internal ? 1 : 0);
        pt.push_back(v.trip ? 1 : 0);

        if (truth && l.location && v.triggered && !v.capture_failed) {
            const auto win = capture_window(rec, *v.trigger_index, bundle.window_cycles);
            const auto feats = extract_selected(win, bundle.feature_specs);
            yz.push_back(static_cast<int>(zone_of(*l.location)));
            pz.push_back(predict(bundle.locate_forest, feats.values).label);
            if (internal && l.fault_type) {
                yp.push_back(static_cast<int>(phase_class(*l.fault_type)));
                pp.push_back(predict(bundle.phase_forest, feats.values).label);
            }
        }

        std::vector<std::string> keys = {"all", "kind=" + std::string(to_string(l.kind)),
                                         "snr_db=" + eval_detail::meta_or(rec, "snr_db", "none"),
                                         "ct_burden_ohm=" + eval_detail::meta_or(rec, "ct_burden_ohm", "none"),
                                         "sample_rate_hz=" + format_double(rec.sample_rate_hz),
                                         "window_cycles=" + format_double(bundle.window_cycles)};
        if (l.kind == EventKind::fault) keys.push_back("resistance_ohm=" + format_double(l.resistance_ohm));
        if (truth && l.location) keys.push_back("zone=" + zone_text(l));
        for (const auto& key : keys) {
            auto [it, fresh] = rows.try_emplace(key);
            if (fresh) {
                it->second.scenario = key;
                order.push_back(key);
            }
            auto& row = it->second;
            ++row.n;
            if (truth) {
                ++row.faults;
                if (v.is_fault) ++row.detected_faults;
            } else {
                ++row.non_faults;
                if (!v.is_fault) ++row.rejected_non_faults;
            }
        }
    }
    std::sort(order.begin(), order.end());
    for (const auto& key : order) rep.scenarios.push_back(rows[key]);

    rep.detect = balanced_accuracy_present(yd, pd, 2);
    for (auto p : kFusionPolicies) rep.fused[p] = balanced_accuracy_present(yd, fused[p], 2);
    rep.locate = yz.empty() ? 0.0 : balanced_accuracy_present(yz, pz, zone_classes().size());
    rep.phase = yp.empty() ? 0.0 : balanced_accuracy_present(yp, pp, phase_classes().size());
    std::size_t trip_ok = 0;
    for (std::size_t i = 0; i < yt.size(); ++i) trip_ok += yt[i] == pt[i];
    rep.trip_accuracy = yt.empty() ? 0.0 : static_cast<double>(trip_ok) / static_cast<double>(yt.size());
    rep.detect_cm = confusion(yd, pd, detect_classes());
    rep.locate_cm = confusion(yz, pz, zone_classes());
    rep.phase_cm = confusion(yp, pp, phase_classes());
    rep.latency = summarize_latency(rep.verdicts);
    return rep;
}

inline std::string ratio_text(std::size_t num, std::size_t den) {
    return den == 0 ? "na" : format_double(static_cast<double>(num) / static_cast<double>(den));
}

/// Deterministic summary: no timings.
inline void write_evaluation_report(std::ostream& out, const EvaluationReport& r) {
    out << "# evaluation report\n";
    out << "records = " << r.records << '\n';
    out << "untriggered = " << r.untriggered << '\n';
    out << "capture_failed = " << r.capture_failed << '\n';
    out << "fusion = " << to_string(r.fusion) << '\n';
    out << "detect = " << format_double(r.detect) << '\n';
    for (const auto& [p, v] : r.fused) out << "detect_" << to_string(p) << " = " << format_double(v) << '\n';
    out << "locate = " << format_double(r.locate) << '\n';
    out << "phase = " << format_double(r.phase) << '\n';
    out << "trip_accuracy = " << format_double(r.trip_accuracy) << '\n';
}

inline void write_scenarios_csv(std::ostream& out, const EvaluationReport& r) {
    out << "scenario,records,faults,fault_recall,non_faults,non_fault_specificity,balanced_accuracy\n";
    for (const auto& s : r.scenarios) {
        std::string ba = "na";
        if (s.faults > 0 && s.non_faults > 0)
            ba = format_double(0.5 * (static_cast<double>(s.detected_faults) / static_cast<double>(s.faults) +
                                      static_cast<double>(s.rejected_non_faults) / static_cast<double>(s.non_faults)));
        out << s.scenario << ',' << s.n << ',' << s.faults << ',' << ratio_text(s.detected_faults, s.faults) << ','
            << s.non_faults << ',' << ratio_text(s.rejected_non_faults, s.non_faults) << ',' << ba << '\n';
    }
}

/// Budget per stage in microseconds; stages without a figure are left empty.
inline std::optional<double> latency_budget_us(const std::string& stage) {
    if (stage == "detect") return 1.0;
    if (stage == "extract") return 10.0;
    if (stage == "fuzzy") return 1800.0;
    if (stage == "forest") return 500.0;
    return std::nullopt;
}

inline void write_latency_csv(std::ostream& out, const std::vector<LatencySummary>& l) {
    out << "stage,n,p50_us,p95_us,p99_us,max_us,budget_us,p99_within_budget\n";
    for (const auto& s : l) {
        const auto budget = latency_budget_us(s.stage);
        out << s.stage << ',' << s.n << ',' << format_double(s.p50) << ',' << format_double(s.p95) << ','
            << format_double(s.p99) << ',' << format_double(s.max) << ',' << (budget ? format_double(*budget) : "")
            << ',' << (budget ? (s.p99 <= *budget ? "yes" : "no") : "") << '\n';
    }
}

/// One verdict line per record in corpus order.
inline void write_verdict_log(std::ostream& out, const Corpus& corpus, const std::vector<std::size_t>& index,
                              const std::vector<Verdict>& verdicts, bool with_timing) {
    out << "file,truth_kind,triggered,trigger_index,is_fault,fuzzy_score,forest_vote,zone,trip,phases";
    if (with_timing) out << ",total_us";
    out << '\n';
    for (std::size_t k = 0; k < verdicts.size(); ++k) {
        const auto& rec = corpus.records[index[k]];
        const auto& v = verdicts[k];
        out << rec.name << ',' << to_string(rec.label.kind) << ',' << (v.triggered ? 1 : 0) << ','
            << (v.trigger_index ? std::to_string(*v.trigger_index) : "") << ',' << (v.is_fault ? 1 : 0) << ','
            << format_double(v.fuzzy_score) << ',' << format_double(v.forest_vote) << ','
            << (v.zone ? std::string(to_string(*v.zone)) : "") << ',' << (v.trip ? 1 : 0) << ','
            << (v.phases ? std::string(to_string(*v.phases)) : "");
        if (with_timing) out << ',' << format_double(v.timings.total_us);
        out << '\n';
    }
}

struct ReplayResult {
    std::vector<std::size_t> record_index;
    std::vector<Verdict> verdicts;
    std::vector<LatencySummary> latency;
};

/// Streams a corpus through inference; verdict order follows the corpus.
inline ReplayResult replay(const Corpus& corpus, const TrainedBundle& bundle, unsigned threads = 0) {
    ReplayResult r;
    r.verdicts.resize(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i) r.record_index.push_back(i);
    parallel_for(
        corpus.records.size(), [&](std::size_t i) { r.verdicts[i] = run_inference(corpus.records[i], bundle); }, threads);
    r.latency = summarize_latency(r.verdicts);
    return r;
}

// ---- resampling ----

/// Integer-factor decimation behind a Blackman-windowed sinc low-pass (cutoff
/// 0.45 of the target rate), with mirrored edges and zero phase.
inline WaveformRecord resample(const WaveformRecord& rec, double target_rate_hz) {
    if (!(target_rate_hz > 0.0)) throw ConfigError("resample: target rate must be positive");
    if (target_rate_hz > rec.sample_rate_hz * (1.0 + 1e-12))
        throw ConfigError("resample: upsampling from " + format_double(rec.sample_rate_hz) + " to " +
                          format_double(target_rate_hz) + " Hz is not supported");
    const double ratio = rec.sample_rate_hz / target_rate_hz;
    const auto d = static_cast<std::size_t>(std::llround(ratio));
    if (std::fabs(ratio - static_cast<double>(d)) > 1e-9 * ratio)
        throw ConfigError("resample: " + format_double(rec.sample_rate_hz) + " -> " + format_double(target_rate_hz) +
                          " Hz is not an integer decimation");
    const double m = target_rate_hz / rec.base_freq_hz;
    if (std::fabs(m - std::round(m)) > 1e-9 * m)
        throw ConfigError("resample: target rate gives a non-integer number of samples per cycle");
    if (d == 1) return rec;

    const std::size_t half = 8 * d;
    const double fc = 0.45 / static_cast<double>(d);  // cycles per source sample
    std::vector<double> h(2 * half + 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) {
        const double n = static_cast<double>(k) - static_cast<double>(half);
        const double sinc = n == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * n) / (std::numbers::pi * n);
        const double w = 0.42 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(h.size() - 1)) +
                         0.08 * std::cos(4.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(h.size() - 1));
        h[k] = sinc * w;
        sum += h[k];
    }
    for (double& v : h) v /= sum;

    WaveformRecord out = rec;
    out.sample_rate_hz = target_rate_hz;
    const auto len = static_cast<long long>(rec.size());
    auto at = [&](const std::vector<double>& x, long long i) {
        if (len == 1) return x[0];
        const long long period = 2 * (len - 1);
        i %= period;
        if (i < 0) i += period;
        return x[static_cast<std::size_t>(i < len ? i : period - i)];
    };
    for (int p = 0; p < 3; ++p) {
        const auto& x = rec.phases[p];
        auto& y = out.phases[p];
        y.clear();
        for (std::size_t i = 0; i < rec.size(); i += d) {
            double acc = 0.0;
            for (std::size_t k = 0; k < h.size(); ++k)
                acc += h[k] * at(x, static_cast<long long>(i) + static_cast<long long>(k) - static_cast<long long>(half));
            y.push_back(acc);
        }
    }
    out.meta["sample_rate_hz"] = format_double(target_rate_hz);
    if (auto it = out.meta.find("inception_sample"); it != out.meta.end())
        if (auto v = parse_uint(it->second))
            it->second = std::to_string(static_cast<std::uint64_t>(std::llround(static_cast<double>(*v) / static_cast<double>(d))));
    return out;
}

inline Corpus resample_corpus(const Corpus& c, double target_rate_hz) {
    Corpus out;
    out.records.resize(c.records.size());
    parallel_for(c.records.size(), [&](std::size_t i) { out.records[i] = resample(c.records[i], target_rate_hz); });
    return out;
}

}  // namespace pvrelay
