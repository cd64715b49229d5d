#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/event_detector.hpp"
#include "pvrelay/features/linear_trend.hpp"
#include "pvrelay/signal/waveform.hpp"

namespace pvrelay {

enum class TrendFamily { slt, clt };

inline constexpr std::size_t kSegmentSizes[] = {5, 10, 50};
inline constexpr std::size_t kSpecsPerPhase = 5 + 5 * 3 * 4;

/// One trend attribute of one phase. SLT specs carry segment_size 0.
struct FeatureSpec {
    TrendFamily family = TrendFamily::clt;
    TrendAttribute attribute = TrendAttribute::rvalue;
    std::size_t segment_size = 50;
    Aggregator aggregator = Aggregator::mean;
    int phase = 0;

    static FeatureSpec slt(TrendAttribute attr, int phase) { return {TrendFamily::slt, attr, 0, Aggregator::mean, phase}; }
    static FeatureSpec clt(TrendAttribute attr, std::size_t size, Aggregator agg, int phase) {
        return {TrendFamily::clt, attr, size, agg, phase};
    }

    friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

inline constexpr char kPhaseNames[] = {'a', 'b', 'c'};

inline std::string spec_name(const FeatureSpec& s) {
    std::string out = s.family == TrendFamily::slt ? "slt:" : "clt:";
    out += to_string(s.attribute);
    if (s.family == TrendFamily::clt) {
        out += ':' + std::to_string(s.segment_size) + ':';
        out += to_string(s.aggregator);
    }
    out += ':';
    out += kPhaseNames[s.phase];
    return out;
}

inline std::optional<FeatureSpec> parse_spec(std::string_view name) {
    const auto parts = split(trim(name), ':');
    auto attr_of = [](const std::string& s) -> std::optional<TrendAttribute> {
        for (auto a : kTrendAttributes)
            if (to_string(a) == s) return a;
        return std::nullopt;
    };
    auto phase_of = [](const std::string& s) -> int {
        if (s == "a") return 0;
        if (s == "b") return 1;
        if (s == "c") return 2;
        return -1;
    };
    if (parts.size() == 3 && parts[0] == "slt") {
        const auto a = attr_of(parts[1]);
        const int p = phase_of(parts[2]);
        if (!a || p < 0) return std::nullopt;
        return FeatureSpec::slt(*a, p);
    }
    if (parts.size() == 5 && parts[0] == "clt") {
        const auto a = attr_of(parts[1]);
        const auto size = parse_uint(parts[2]);
        const int p = phase_of(parts[4]);
        std::optional<Aggregator> agg;
        for (auto g : kAggregators)
            if (to_string(g) == parts[3]) agg = g;
        if (!a || !size || *size == 0 || !agg || p < 0) return std::nullopt;
        return FeatureSpec::clt(*a, static_cast<std::size_t>(*size), *agg, p);
    }
    return std::nullopt;
}

/// Canonical 195-entry bank: phase-major; within a phase the 5 SLT attributes,
/// then CLT by segment size (5, 10, 50), aggregator (mean, variance, max, min)
/// and attribute (pvalue, rvalue, intercept, slope, stderr).
inline std::vector<FeatureSpec> full_registry() {
    std::vector<FeatureSpec> out;
    out.reserve(3 * kSpecsPerPhase);
    for (int p = 0; p < 3; ++p) {
        for (auto a : kTrendAttributes) out.push_back(FeatureSpec::slt(a, p));
        for (auto size : kSegmentSizes)
            for (auto g : kAggregators)
                for (auto a : kTrendAttributes) out.push_back(FeatureSpec::clt(a, size, g, p));
    }
    return out;
}

/// Position of a spec in full_registry().
inline std::size_t registry_index(const FeatureSpec& s) {
    std::size_t within = 0;
    const auto attr = static_cast<std::size_t>(s.attribute);
    if (s.family == TrendFamily::slt) {
        within = attr;
    } else {
        std::size_t size_idx = 3;
        for (std::size_t i = 0; i < 3; ++i)
            if (kSegmentSizes[i] == s.segment_size) size_idx = i;
        if (size_idx == 3) throw std::invalid_argument("registry_index: segment size not in the bank");
        within = 5 + (size_idx * 4 + static_cast<std::size_t>(s.aggregator)) * 5 + attr;
    }
    return static_cast<std::size_t>(s.phase) * kSpecsPerPhase + within;
}

/// CLT(rvalue, 50, mean) on phases a, b, c.
inline std::vector<FeatureSpec> default_selected_specs() {
    return {FeatureSpec::clt(TrendAttribute::rvalue, 50, Aggregator::mean, 0),
            FeatureSpec::clt(TrendAttribute::rvalue, 50, Aggregator::mean, 1),
            FeatureSpec::clt(TrendAttribute::rvalue, 50, Aggregator::mean, 2)};
}

/// SLT standard error per phase.
inline std::vector<FeatureSpec> slt_stderr_specs() {
    return {FeatureSpec::slt(TrendAttribute::stderr_slope, 0), FeatureSpec::slt(TrendAttribute::stderr_slope, 1),
            FeatureSpec::slt(TrendAttribute::stderr_slope, 2)};
}

struct FeatureVector {
    std::vector<double> values;
    std::vector<std::size_t> absent;  // positions a spec could not be computed for
    std::string registry_id;
    EventLabel label;

    bool complete() const { return absent.empty(); }
};

inline std::string registry_id_of(const std::vector<FeatureSpec>& specs) {
    if (specs == full_registry()) return "full-195";
    return "selected-" + std::to_string(specs.size());
}

/// Evaluates specs on a window. Segment aggregations are shared between specs.
inline FeatureVector extract_selected(const WaveformWindow& window, const std::vector<FeatureSpec>& specs) {
    if (specs.empty()) throw std::invalid_argument("extract_selected: empty spec list");
    FeatureVector fv;
    fv.registry_id = registry_id_of(specs);
    fv.label = window.source_label;
    fv.values.resize(specs.size());

    std::array<std::optional<LinTrendAttrs>, 3> slt_cache;
    std::map<std::tuple<int, std::size_t, int>, std::optional<LinTrendAttrs>> clt_cache;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.phase < 0 || s.phase > 2) throw std::invalid_argument("feature spec phase outside a..c");
        const auto& series = window.samples[static_cast<std::size_t>(s.phase)];
        std::optional<LinTrendAttrs> attrs;
        if (s.family == TrendFamily::slt) {
            auto& slot = slt_cache[static_cast<std::size_t>(s.phase)];
            if (!slot && series.size() >= 2) slot = linregress(series);
            attrs = slot;
        } else {
            const auto key = std::make_tuple(s.phase, s.segment_size, static_cast<int>(s.aggregator));
            auto it = clt_cache.find(key);
            if (it == clt_cache.end()) {
                std::optional<LinTrendAttrs> v;
                if (s.segment_size > 0 && !series.empty() && segment_count(series.size(), s.segment_size) >= 2)
                    v = clt_attrs(series, s.segment_size, s.aggregator);
                it = clt_cache.emplace(key, v).first;
            }
            attrs = it->second;
        }
        if (attrs) {
            fv.values[i] = project(*attrs, s.attribute);
        } else {
            fv.values[i] = std::numeric_limits<double>::quiet_NaN();
            fv.absent.push_back(i);
        }
    }
    return fv;
}

inline FeatureVector extract_all(const WaveformWindow& window) { return extract_selected(window, full_registry()); }

inline void write_registry_doc(std::ostream& out, const std::vector<FeatureSpec>& specs) {
    out << "column,name,family,attribute,segment_size,aggregator,phase\n";
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        const bool clt = s.family == TrendFamily::clt;
        out << "f_" << (i + 1) << ',' << spec_name(s) << ',' << (clt ? "CLT" : "SLT") << ',' << to_string(s.attribute)
            << ',' << (clt ? std::to_string(s.segment_size) : "") << ',' << (clt ? to_string(s.aggregator) : "")
            << ',' << kPhaseNames[s.phase] << '\n';
    }
}

inline std::string zone_text(const EventLabel& l) {
    return l.is_faulted() && l.location ? std::string(to_string(zone_of(*l.location))) : "none";
}

inline std::string phase_class_text(const EventLabel& l) {
    return l.is_faulted() && l.fault_type ? std::string(to_string(phase_class(*l.fault_type))) : "none";
}

/// Plot-ready matrix: label, zone, phase class, then f_1..f_K.
inline void write_feature_matrix(std::ostream& out, const std::vector<FeatureVector>& rows, std::size_t k) {
    out << "label,zone,phase_class";
    for (std::size_t i = 1; i <= k; ++i) out << ",f_" << i;
    out << '\n';
    for (const auto& r : rows) {
        if (r.values.size() != k) throw DataError("feature matrix: row width differs from header");
        out << to_string(r.label.kind) << ',' << zone_text(r.label) << ',' << phase_class_text(r.label);
        for (double v : r.values) out << ',' << (std::isnan(v) ? std::string() : format_double(v));
        out << '\n';
    }
}

}  // namespace pvrelay
