#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/event_detector.hpp"
#include "pvrelay/features/registry.hpp"
#include "pvrelay/fuzzy/fuzzy_system.hpp"
#include "pvrelay/learn/forest.hpp"
#include "pvrelay/pipeline/config.hpp"

namespace pvrelay {

inline const std::vector<std::string>& detect_classes() {
    static const std::vector<std::string> v = {"non-fault", "fault"};
    return v;
}
inline const std::vector<std::string>& zone_classes() {
    static const std::vector<std::string> v = {"backward", "internal", "forward"};
    return v;
}
inline const std::vector<std::string>& phase_classes() {
    static const std::vector<std::string> v = {"a", "b", "c", "ab", "bc", "ca", "abc"};
    return v;
}

struct TrainedBundle {
    double sample_rate_hz = 7680.0;
    double base_freq_hz = 60.0;
    DetectorConfig detector;
    double window_cycles = 1.0;
    std::vector<FeatureSpec> feature_specs = default_selected_specs();  // forest inputs
    std::vector<FeatureSpec> fuzzy_specs = default_selected_specs();    // fuzzy inputs, one per input variable
    FuzzySystem fuzzy = default_system();
    ForestModel detect_forest;
    ForestModel locate_forest;
    ForestModel phase_forest;
    FusionPolicy fusion = FusionPolicy::both;

    double gamma() const { return detector.gamma; }
};

inline constexpr const char* kBundleMagic = "pvrelay-bundle";
inline constexpr int kBundleVersion = 1;

inline void write_bundle(std::ostream& out, const TrainedBundle& b) {
    auto specs = [&](const char* key, const std::vector<FeatureSpec>& v) {
        out << key << ' ' << v.size();
        for (const auto& s : v) out << ' ' << spec_name(s);
        out << '\n';
    };
    out << kBundleMagic << ' ' << kBundleVersion << '\n';
    out << "sample_rate_hz " << format_double(b.sample_rate_hz) << '\n';
    out << "base_freq_hz " << format_double(b.base_freq_hz) << '\n';
    out << "detector " << b.detector.samples_per_cycle << ' ' << format_double(b.detector.gamma) << ' '
        << to_string(b.detector.trigger_policy) << '\n';
    out << "window_cycles " << format_double(b.window_cycles) << '\n';
    out << "fusion " << to_string(b.fusion) << '\n';
    specs("features", b.feature_specs);
    specs("fuzzy_features", b.fuzzy_specs);
    write_fuzzy(out, b.fuzzy);
    out << "detect_forest\n";
    write_forest(out, b.detect_forest);
    out << "locate_forest\n";
    write_forest(out, b.locate_forest);
    out << "phase_forest\n";
    write_forest(out, b.phase_forest);
    out << "end-bundle\n";
}

namespace bundle_detail {

inline std::vector<std::string> fields(std::istream& in, const char* expect) {
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) break;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty() || f[0] != expect) throw DataError(std::string("bundle: expected '") + expect + "' line");
    return f;
}

inline double num(const std::vector<std::string>& f, std::size_t i) {
    if (i >= f.size()) throw DataError("bundle: missing value on '" + f[0] + "' line");
    auto v = parse_double(f[i]);
    if (!v) throw DataError("bundle: bad number '" + f[i] + "'");
    return *v;
}

inline std::vector<FeatureSpec> specs(std::istream& in, const char* key) {
    auto f = fields(in, key);
    auto n = f.size() > 1 ? parse_uint(f[1]) : std::nullopt;
    if (!n || f.size() != *n + 2) throw DataError(std::string("bundle: bad ") + key + " line");
    std::vector<FeatureSpec> out;
    for (std::size_t i = 2; i < f.size(); ++i) {
        auto s = parse_spec(f[i]);
        if (!s) throw DataError("bundle: unknown feature spec '" + f[i] + "'");
        out.push_back(*s);
    }
    return out;
}

}  // namespace bundle_detail

inline TrainedBundle read_bundle(std::istream& in) {
    using namespace bundle_detail;
    auto head = fields(in, kBundleMagic);
    if (head.size() != 2 || head[1] != std::to_string(kBundleVersion))
        throw DataError("bundle: unsupported version (expected " + std::to_string(kBundleVersion) + ")");
    TrainedBundle b;
    b.sample_rate_hz = num(fields(in, "sample_rate_hz"), 1);
    b.base_freq_hz = num(fields(in, "base_freq_hz"), 1);
    auto d = fields(in, "detector");
    if (d.size() != 4) throw DataError("bundle: bad detector line");
    auto m = parse_uint(d[1]);
    if (!m) throw DataError("bundle: bad samples_per_cycle");
    b.detector.samples_per_cycle = static_cast<std::size_t>(*m);
    b.detector.gamma = num(d, 2);
    if (d[3] == "any") b.detector.trigger_policy = TriggerPolicy::any_phase;
    else if (d[3] == "all") b.detector.trigger_policy = TriggerPolicy::all_phases;
    else throw DataError("bundle: bad trigger policy '" + d[3] + "'");
    b.window_cycles = num(fields(in, "window_cycles"), 1);
    auto fu = fields(in, "fusion");
    auto policy = fu.size() == 2 ? parse_fusion(fu[1]) : std::nullopt;
    if (!policy) throw DataError("bundle: bad fusion line");
    b.fusion = *policy;
    b.feature_specs = specs(in, "features");
    b.fuzzy_specs = specs(in, "fuzzy_features");
    b.fuzzy = read_fuzzy(in);
    fields(in, "detect_forest");
    b.detect_forest = read_forest(in);
    fields(in, "locate_forest");
    b.locate_forest = read_forest(in);
    fields(in, "phase_forest");
    b.phase_forest = read_forest(in);
    fields(in, "end-bundle");

    if (b.fuzzy_specs.size() != b.fuzzy.inputs.size()) throw DataError("bundle: fuzzy feature count differs from inputs");
    for (const auto* f : {&b.detect_forest, &b.locate_forest, &b.phase_forest})
        if (f->n_features() != b.feature_specs.size()) throw DataError("bundle: forest width differs from feature list");
    if (b.detect_forest.classes != detect_classes() || b.locate_forest.classes != zone_classes() ||
        b.phase_forest.classes != phase_classes())
        throw DataError("bundle: forest class lists do not match their stages");
    try {
        b.detector.validate();
    } catch (const ConfigError& e) {
        throw DataError(std::string("bundle: ") + e.what());
    }
    return b;
}

inline std::string bundle_to_string(const TrainedBundle& b) {
    std::ostringstream s;
    write_bundle(s, b);
    return s.str();
}

inline void save_bundle(const TrainedBundle& b, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write bundle '" + path + "'");
    write_bundle(out, b);
}

inline TrainedBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open bundle '" + path + "'");
    return read_bundle(in);
}

// ---- inference ----

struct StageTimings {
    double detect_us = 0.0;
    double capture_us = 0.0;
    double extract_us = 0.0;
    double fuzzy_us = 0.0;
    double forest_us = 0.0;
    double locate_us = 0.0;
    double phase_us = 0.0;
    double total_us = 0.0;
};

inline constexpr const char* kStageNames[] = {"detect", "capture", "extract", "fuzzy", "forest", "locate", "phase", "total"};

inline std::array<double, 8> timing_values(const StageTimings& t) {
    return {t.detect_us, t.capture_us, t.extract_us, t.fuzzy_us, t.forest_us, t.locate_us, t.phase_us, t.total_us};
}

struct Verdict {
    bool triggered = false;
    std::optional<std::size_t> trigger_index;
    bool capture_failed = false;
    bool is_fault = false;
    double fuzzy_score = 0.5;
    double forest_vote = 0.0;  // fraction of detect trees voting fault
    bool fuzzy_fault = false;
    bool forest_fault = false;
    std::optional<Zone> zone;
    bool trip = false;
    std::optional<PhaseClass> phases;
    StageTimings timings;
};

namespace inference_detail {

using Clock = std::chrono::steady_clock;

inline double micros(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::micro>(b - a).count();
}

inline void check_rate(const WaveformRecord& rec, const TrainedBundle& b) {
    if (std::fabs(rec.sample_rate_hz - b.sample_rate_hz) > 1e-9 * b.sample_rate_hz ||
        std::fabs(rec.base_freq_hz - b.base_freq_hz) > 1e-9 * b.base_freq_hz)
        throw DataError("record '" + rec.name + "' is sampled at " + format_double(rec.sample_rate_hz) + " Hz / " +
                        format_double(rec.base_freq_hz) + " Hz but the bundle expects " +
                        format_double(b.sample_rate_hz) + " Hz / " + format_double(b.base_freq_hz) +
                        " Hz; resample the record first");
}

}  // namespace inference_detail

/// Staged verdict: detect, capture, extract, parallel fuzzy and forest
/// detectors, fusion, then locate and phase selection behind their gates.
inline Verdict run_inference(const WaveformRecord& record, const TrainedBundle& bundle,
                             std::optional<FusionPolicy> fusion = std::nullopt) {
    using namespace inference_detail;
    check_rate(record, bundle);
    Verdict v;
    const auto t0 = Clock::now();
    const auto trig = detect(record, bundle.detector);
    const auto t1 = Clock::now();
    v.timings.detect_us = micros(t0, t1);
    v.triggered = trig.triggered;
    v.trigger_index = trig.trigger_index;
    if (!v.triggered) {
        v.timings.total_us = micros(t0, Clock::now());
        return v;
    }

    std::optional<WaveformWindow> window;
    try {
        window = capture_window(record, *trig.trigger_index, bundle.window_cycles);
    } catch (const CaptureError&) {
        v.capture_failed = true;
    }
    const auto t2 = Clock::now();
    v.timings.capture_us = micros(t1, t2);
    if (!window) {
        v.timings.total_us = micros(t0, t2);
        return v;
    }

    const auto feats = extract_selected(*window, bundle.feature_specs);
    const auto fuzzy_in = bundle.fuzzy_specs == bundle.feature_specs ? feats : extract_selected(*window, bundle.fuzzy_specs);
    const auto t3 = Clock::now();
    v.timings.extract_us = micros(t2, t3);
    if (!feats.complete() || !fuzzy_in.complete()) {
        v.capture_failed = true;
        v.timings.total_us = micros(t0, t3);
        return v;
    }

    v.fuzzy_score = infer(bundle.fuzzy, fuzzy_in.values);
    v.fuzzy_fault = v.fuzzy_score >= 0.5;
    const auto t4 = Clock::now();
    v.timings.fuzzy_us = micros(t3, t4);

    const auto det = predict(bundle.detect_forest, feats.values);
    v.forest_vote = det.vote_fractions[1];
    v.forest_fault = det.label == 1;
    const auto t5 = Clock::now();
    v.timings.forest_us = micros(t4, t5);

    v.is_fault = fuse(fusion.value_or(bundle.fusion), v.fuzzy_fault, v.forest_fault);
    if (v.is_fault) {
        v.zone = static_cast<Zone>(predict(bundle.locate_forest, feats.values).label);
        v.trip = *v.zone == Zone::internal;
        const auto t6 = Clock::now();
        v.timings.locate_us = micros(t5, t6);
        if (v.trip) {
            v.phases = static_cast<PhaseClass>(predict(bundle.phase_forest, feats.values).label);
            v.timings.phase_us = micros(t6, Clock::now());
        }
    }
    v.timings.total_us = micros(t0, Clock::now());
    return v;
}

/// Timing-free structured text of a verdict.
inline void write_verdict(std::ostream& out, const Verdict& v) {
    out << "triggered " << (v.triggered ? "true" : "false") << '\n';
    out << "trigger_index " << (v.trigger_index ? std::to_string(*v.trigger_index) : "none") << '\n';
    out << "capture_failed " << (v.capture_failed ? "true" : "false") << '\n';
    out << "is_fault " << (v.is_fault ? "true" : "false") << '\n';
    out << "fuzzy_score " << format_double(v.fuzzy_score) << '\n';
    out << "forest_vote " << format_double(v.forest_vote) << '\n';
    out << "zone " << (v.zone ? std::string(to_string(*v.zone)) : "none") << '\n';
    out << "trip " << (v.trip ? "true" : "false") << '\n';
    out << "phases " << (v.phases ? std::string(to_string(*v.phases)) : "none") << '\n';
}

}  // namespace pvrelay
