#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/signal/waveform.hpp"

namespace pvrelay {

enum class TriggerPolicy { any_phase, all_phases };

inline std::string_view to_string(TriggerPolicy p) { return p == TriggerPolicy::any_phase ? "any" : "all"; }

struct DetectorConfig {
    std::size_t samples_per_cycle = 128;
    double gamma = 0.06;
    TriggerPolicy trigger_policy = TriggerPolicy::any_phase;

    void validate() const {
        if (samples_per_cycle < 8) throw ConfigError("detector: samples_per_cycle must be >= 8");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("detector: gamma must lie in (0, 1)");
    }
};

/// Per-phase ED values; entry i belongs to sample first_index + i.
struct EdTrace {
    std::size_t first_index = 0;
    std::array<std::vector<double>, 3> phases;

    std::size_t size() const { return phases[0].size(); }
};

struct TriggerResult {
    bool triggered = false;
    std::optional<std::size_t> trigger_index;
    EdTrace ed_trace;
};

/// Cycle-over-cycle fractional increase of the rectified current, evaluated at
/// every sample x >= 2M-1 with trailing windows. A dead current cycle gives 0.
inline std::vector<double> ed_series(std::span<const double> samples, std::size_t m) {
    if (m == 0) throw std::invalid_argument("ed_series: M must be positive");
    if (samples.size() < 2 * m) throw std::invalid_argument("ed_series: need at least 2 cycles of samples");
    std::vector<double> out;
    out.reserve(samples.size() - (2 * m - 1));
    // Direct window sums (no running update) keep periodic inputs bit-exactly at zero.
    for (std::size_t x = 2 * m - 1; x < samples.size(); ++x) {
        double prev = 0.0, cur = 0.0;
        for (std::size_t j = x + 1 - 2 * m; j <= x - m; ++j) prev += std::fabs(samples[j]);
        for (std::size_t j = x + 1 - m; j <= x; ++j) cur += std::fabs(samples[j]);
        out.push_back(cur == 0.0 ? 0.0 : (cur - prev) / cur);
    }
    return out;
}

inline EdTrace ed_trace(const WaveformRecord& record, std::size_t m) {
    EdTrace t;
    t.first_index = 2 * m - 1;
    for (int k = 0; k < 3; ++k) t.phases[k] = ed_series(record.phases[k], m);
    return t;
}

/// Combined per-sample detector statistic: the phase maximum for any-phase
/// triggering, the phase minimum for all-phases. Triggered at x iff value >= gamma.
inline std::vector<double> combined_ed(const EdTrace& trace, TriggerPolicy policy) {
    std::vector<double> out(trace.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = trace.phases[0][i], b = trace.phases[1][i], c = trace.phases[2][i];
        out[i] = policy == TriggerPolicy::any_phase ? std::max({a, b, c}) : std::min({a, b, c});
    }
    return out;
}

inline TriggerResult detect(const WaveformRecord& record, const DetectorConfig& config) {
    config.validate();
    const std::size_t m = config.samples_per_cycle;
    if (record.size() < 2 * m) throw DataError("detect: record shorter than 2 cycles");
    TriggerResult r;
    r.ed_trace = ed_trace(record, m);
    const auto& ph = r.ed_trace.phases;
    for (std::size_t i = 0; i < r.ed_trace.size(); ++i) {
        const bool a = ph[0][i] >= config.gamma, b = ph[1][i] >= config.gamma, c = ph[2][i] >= config.gamma;
        const bool fire = config.trigger_policy == TriggerPolicy::any_phase ? (a || b || c) : (a && b && c);
        if (fire) {
            r.triggered = true;
            r.trigger_index = r.ed_trace.first_index + i;
            break;
        }
    }
    return r;
}

/// Analysis block handed to feature extraction.
struct WaveformWindow {
    std::array<std::vector<double>, 3> samples;
    EventLabel source_label;
    double window_cycles = 1.0;

    std::size_t size() const { return samples[0].size(); }
};

struct CaptureError : DataError {
    using DataError::DataError;
};

inline std::size_t window_length(double window_cycles, std::size_t m) {
    if (!(window_cycles > 0.0)) throw std::invalid_argument("window_cycles must be positive");
    const auto len = static_cast<std::size_t>(std::llround(window_cycles * static_cast<double>(m)));
    if (len < 2) throw std::invalid_argument("window shorter than 2 samples");
    return len;
}

/// Copies window_cycles * M samples per phase starting at the trigger sample.
inline WaveformWindow capture_window(const WaveformRecord& record, std::size_t trigger_index, double window_cycles) {
    const std::size_t len = window_length(window_cycles, record.samples_per_cycle());
    if (trigger_index >= record.size() || record.size() - trigger_index < len)
        throw CaptureError("capture: need " + std::to_string(len) + " samples from index " +
                           std::to_string(trigger_index) + " but record has " + std::to_string(record.size()));
    WaveformWindow w;
    w.window_cycles = window_cycles;
    w.source_label = record.label;
    for (int k = 0; k < 3; ++k)
        w.samples[k].assign(record.phases[k].begin() + static_cast<std::ptrdiff_t>(trigger_index),
                            record.phases[k].begin() + static_cast<std::ptrdiff_t>(trigger_index + len));
    return w;
}

}  // namespace pvrelay
