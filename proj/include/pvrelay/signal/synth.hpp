#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/signal/waveform.hpp"

namespace pvrelay {

/// Per-location fault model. Nearer locations see a larger gain.
struct LocationModel {
    double fault_current_gain = 1.0;
    double resistance_sensitivity = 0.05;  // k_loc, 1/ohm
    double fault_angle_deg = 80.0;         // current lag behind the driving voltage
    double dc_time_constant_s = 0.03;
};

/// Generator constants. Every value is an assumption of the synthetic model.
struct SynthParams {
    double sample_rate_hz = 7680.0;
    double base_freq_hz = 60.0;
    int record_cycles = 6;
    int pre_event_cycles = 2;

    double prefault_amplitude = 1.0;
    double amplitude_jitter = 0.02;
    double load_angle_p_deg = 0.0;
    double load_angle_q_deg = 25.0;
    double load_angle_jitter_deg = 3.0;

    std::array<LocationModel, 8> locations = {{
        {2.0, 0.05, 260.0, 0.04},
        {2.5, 0.05, 260.0, 0.04},
        {3.0, 0.05, 260.0, 0.04},
        {8.0, 0.05, 80.0, 0.03},
        {7.0, 0.05, 80.0, 0.03},
        {4.0, 0.05, 20.0, 0.01},
        {3.5, 0.05, 20.0, 0.01},
        {3.0, 0.05, 20.0, 0.01},
    }};
    double gain_jitter = 0.05;
    double priority_angle_shift_deg = 10.0;
    double dc_offset_ratio = 1.0;
    double zero_sequence_ratio = 0.3;
    double zero_sequence_angle_deg = 20.0;
    double coupling_min = 0.01;
    double coupling_max = 0.05;

    std::array<double, 4> switch_osc_freq_hz = {900.0, 700.0, 500.0, 300.0};
    double switch_osc_jitter_hz = 20.0;
    double switch_damping_s = 0.008;
    double switch_bus_damping_growth = 0.25;
    std::array<double, 4> switch_ring_amplitude = {1.5, 2.0, 2.5, 3.0};
    double switch_bus_attenuation = 0.3;
    double generator_online_factor = 1.1;
    double generator_offline_factor = 0.9;
    std::array<double, 4> load_step_factors = {1.05, 1.2, 1.35, 1.5};
    double load_step_jitter = 0.01;
    double load_step_min = 1.05;
    double load_step_max = 1.5;

    double hif_phase_peak_volts = 187794.0;
    double hif_vp_volts = 30000.0;
    double hif_vn_volts = 30000.0;
    double hif_r_min_ohm = 50.0;
    double hif_r_max_ohm = 300.0;
    double hif_redraw_s = 0.002;
    double hif_base_current_amps = 4000.0;

    std::optional<double> noise_snr_db;
    std::optional<double> ct_burden_ohm;

    std::size_t samples_per_cycle() const {
        const double m = sample_rate_hz / base_freq_hz;
        if (std::fabs(m - std::round(m)) > 1e-9 * m || m < 8.0)
            throw ConfigError("sample_rate_hz / base_freq_hz must be an integer >= 8");
        return static_cast<std::size_t>(std::round(m));
    }

    std::size_t record_length() const { return samples_per_cycle() * static_cast<std::size_t>(record_cycles); }

    void validate() const {
        (void)samples_per_cycle();
        if (pre_event_cycles < 2) throw ConfigError("pre_event_cycles must be >= 2");
        if (record_cycles < pre_event_cycles + 2) throw ConfigError("record_cycles must leave >= 2 post-event cycles");
        if (!(prefault_amplitude > 0.0)) throw ConfigError("prefault_amplitude must be positive");
        for (const auto& l : locations)
            if (!(l.fault_current_gain > 0.0) || !(l.dc_time_constant_s > 0.0) || l.resistance_sensitivity < 0.0)
                throw ConfigError("location gains and time constants must be positive");
        if (!(switch_damping_s > 0.0)) throw ConfigError("switch_damping_s must be positive");
        for (double f : switch_osc_freq_hz)
            if (!(f > 0.0)) throw ConfigError("switch_osc_freq_hz must be positive");
        for (double f : load_step_factors)
            if (!(f > 0.0)) throw ConfigError("load_step_factors must be positive");
        if (coupling_min < 0.0 || coupling_max < coupling_min || coupling_max > 0.05)
            throw ConfigError("coupling range must lie in [0, 0.05]");
        if (hif_vp_volts < 0.0 || hif_vn_volts < 0.0) throw ConfigError("HIF source voltages must be >= 0");
        if (!(hif_r_min_ohm > 0.0) || hif_r_max_ohm < hif_r_min_ohm) throw ConfigError("bad HIF resistance band");
        if (!(hif_redraw_s > 0.0) || !(hif_base_current_amps > 0.0)) throw ConfigError("bad HIF timing or base");
    }
};

/// Switching-event axes for one sweep cell.
struct SwitchingSpec {
    EventKind kind = EventKind::capacitor_switch;
    double angle_deg = 0.0;
    int rating_index = 0;
    int bus_index = 0;
    bool generator_online = true;
    Priority priority = Priority::P;
};

namespace synth_detail {

inline constexpr double kPi = std::numbers::pi;
inline constexpr std::array<double, 3> kPhaseShift = {0.0, -2.0 * kPi / 3.0, 2.0 * kPi / 3.0};

inline double deg2rad(double d) { return d * kPi / 180.0; }

struct Prefault {
    double amplitude;
    double load_angle;  // radians
};

// The first two draws of every generator; keeps pre-event samples identical to the steady record.
inline Prefault draw_prefault(const SynthParams& p, Priority prio, Rng& rng) {
    const double ua = rng.uniform(-1.0, 1.0);
    const double ul = rng.uniform(-1.0, 1.0);
    const double base_la = prio == Priority::P ? p.load_angle_p_deg : p.load_angle_q_deg;
    return {p.prefault_amplitude * (1.0 + p.amplitude_jitter * ua),
            deg2rad(base_la + p.load_angle_jitter_deg * ul)};
}

inline WaveformRecord steady_record(const SynthParams& p, const Prefault& pf) {
    WaveformRecord rec;
    rec.sample_rate_hz = p.sample_rate_hz;
    rec.base_freq_hz = p.base_freq_hz;
    const std::size_t n = p.record_length();
    const double w = 2.0 * kPi * p.base_freq_hz;
    for (int k = 0; k < 3; ++k) {
        auto& ph = rec.phases[k];
        ph.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double t = static_cast<double>(i) / p.sample_rate_hz;
            ph[i] = pf.amplitude * std::sin(w * t + kPhaseShift[k] - pf.load_angle);
        }
    }
    return rec;
}

inline std::size_t inception_sample(const SynthParams& p, double angle_deg) {
    if (!(angle_deg >= 0.0) || !(angle_deg < 360.0))
        throw std::invalid_argument("inception angle must lie in [0, 360)");
    const std::size_t m = p.samples_per_cycle();
    const auto offset = static_cast<std::size_t>(std::llround(angle_deg / 360.0 * static_cast<double>(m)));
    const std::size_t inc = static_cast<std::size_t>(p.pre_event_cycles) * m + offset;
    if (inc >= p.record_length()) throw std::invalid_argument("inception beyond record length");
    return inc;
}

inline void stamp(WaveformRecord& rec, const SynthParams& p, std::uint64_t seed, std::size_t inc) {
    rec.seed = seed;
    rec.meta["sample_rate_hz"] = format_double(p.sample_rate_hz);
    rec.meta["base_freq_hz"] = format_double(p.base_freq_hz);
    rec.meta["inception_sample"] = std::to_string(inc);
}

}  // namespace synth_detail

/// Pre-event sinusoid alone; the shape every other generator starts from.
inline WaveformRecord synth_steady(const SynthParams& params, std::uint64_t seed, Priority priority = Priority::P) {
    params.validate();
    Rng rng(seed);
    const auto pf = synth_detail::draw_prefault(params, priority, rng);
    auto rec = synth_detail::steady_record(params, pf);
    rec.label.kind = EventKind::steady;
    rec.label.priority = priority;
    synth_detail::stamp(rec, params, seed, params.record_length());
    rec.meta.erase("inception_sample");
    return rec;
}

/// Scaled AC plus decaying DC on the faulted phases, from the inception sample on.
inline WaveformRecord synth_fault(const EventLabel& label, const SynthParams& params, std::uint64_t seed) {
    using namespace synth_detail;
    if (label.kind != EventKind::fault) throw std::invalid_argument("synth_fault: label kind must be fault");
    if (!label.fault_type) throw std::invalid_argument("synth_fault: unknown fault type");
    if (!label.location) throw std::invalid_argument("synth_fault: location required");
    if (label.resistance_ohm < 0.0) throw std::invalid_argument("synth_fault: negative resistance");
    label.validate();
    params.validate();

    Rng rng(seed);
    const auto pf = draw_prefault(params, label.priority, rng);
    auto rec = steady_record(params, pf);
    const std::size_t inc = inception_sample(params, label.inception_angle_deg);

    const auto& loc = params.locations[static_cast<std::size_t>(label.location->index - 1)];
    const double gain = loc.fault_current_gain / (1.0 + label.resistance_ohm * loc.resistance_sensitivity) *
                        (1.0 + params.gain_jitter * rng.uniform(-1.0, 1.0));
    std::array<double, 3> coupling{};
    for (auto& c : coupling) c = rng.uniform(params.coupling_min, params.coupling_max);

    const double amp = gain * pf.amplitude;
    const double shift = label.priority == Priority::P ? -params.priority_angle_shift_deg
                                                       : params.priority_angle_shift_deg;
    const double fa = deg2rad(loc.fault_angle_deg + shift);
    const double w = 2.0 * kPi * params.base_freq_hz;
    const std::size_t m = params.samples_per_cycle();
    const double theta = 2.0 * kPi * static_cast<double>(inc % m) / static_cast<double>(m);

    const auto involved = involved_phases(*label.fault_type);
    const int n_involved = involved[0] + involved[1] + involved[2];
    const bool ground = is_ground_fault(*label.fault_type);
    const bool zero_seq = ground && n_involved < 3 && params.zero_sequence_ratio > 0.0;

    // Ungrounded two-phase faults are driven by the line-to-line voltage.
    std::array<double, 3> delta{};
    if (!ground && n_involved == 2) {
        int p = -1, q = -1;
        for (int k = 0; k < 3; ++k)
            if (involved[k]) (p < 0 ? p : q) = k;
        const auto vp = std::polar(1.0, kPhaseShift[p]);
        const auto vq = std::polar(1.0, kPhaseShift[q]);
        delta[p] = std::arg(vp - vq) - kPhaseShift[p];
        delta[q] = std::arg(vq - vp) - kPhaseShift[q];
    }

    for (int k = 0; k < 3; ++k) {
        auto& ph = rec.phases[k];
        if (!involved[k]) {
            for (std::size_t i = inc; i < ph.size(); ++i) ph[i] *= 1.0 + coupling[k];
            continue;
        }
        const double alpha = theta + kPhaseShift[k] + delta[k];
        const double dc0 = params.dc_offset_ratio * amp * std::cos(alpha);
        for (std::size_t i = inc; i < ph.size(); ++i) {
            const double t = static_cast<double>(i) / params.sample_rate_hz;
            const double tp = static_cast<double>(i - inc) / params.sample_rate_hz;
            double v = amp * std::sin(w * t + kPhaseShift[k] + delta[k] - pf.load_angle - fa);
            if (dc0 != 0.0) v += dc0 * std::exp(-tp / loc.dc_time_constant_s);
            if (zero_seq)
                v += params.zero_sequence_ratio * amp *
                     std::sin(w * t - pf.load_angle - fa - deg2rad(params.zero_sequence_angle_deg));
            ph[i] = v;
        }
    }

    rec.label = label;
    stamp(rec, params, seed, inc);
    rec.meta["gain"] = format_double(gain);
    return rec;
}

/// Capacitor switching rings on all phases; load switching steps the amplitude.
inline WaveformRecord synth_switching(const SwitchingSpec& spec, const SynthParams& params, std::uint64_t seed) {
    using namespace synth_detail;
    if (spec.kind != EventKind::capacitor_switch && spec.kind != EventKind::load_switch)
        throw std::invalid_argument("synth_switching: kind must be capacitor_switch or load_switch");
    if (spec.rating_index < 0 || spec.rating_index > 3) throw std::invalid_argument("rating index outside 0..3");
    if (spec.bus_index < 0) throw std::invalid_argument("bus index must be >= 0");
    params.validate();

    Rng rng(seed);
    const auto pf = draw_prefault(params, spec.priority, rng);
    auto rec = steady_record(params, pf);
    const std::size_t inc = inception_sample(params, spec.angle_deg);
    const std::size_t m = params.samples_per_cycle();
    const double theta = 2.0 * kPi * static_cast<double>(inc % m) / static_cast<double>(m);
    const auto r = static_cast<std::size_t>(spec.rating_index);

    if (spec.kind == EventKind::capacitor_switch) {
        double f_osc = params.switch_osc_freq_hz[r] + params.switch_osc_jitter_hz * rng.uniform(-1.0, 1.0);
        f_osc = std::clamp(f_osc, 300.0, 900.0);
        const double bus = static_cast<double>(spec.bus_index);
        const double damping = params.switch_damping_s * (1.0 + params.switch_bus_damping_growth * bus);
        const double ring = params.switch_ring_amplitude[r] *
                            (spec.generator_online ? params.generator_online_factor
                                                   : params.generator_offline_factor) /
                            (1.0 + params.switch_bus_attenuation * bus);
        for (int k = 0; k < 3; ++k) {
            const double a = ring * std::sin(theta + kPhaseShift[k]);
            auto& ph = rec.phases[k];
            for (std::size_t i = inc; i < ph.size(); ++i) {
                const double tp = static_cast<double>(i - inc) / params.sample_rate_hz;
                ph[i] += a * std::exp(-tp / damping) * std::sin(2.0 * kPi * f_osc * tp);
            }
        }
        rec.meta["osc_freq_hz"] = format_double(f_osc);
    } else {
        const double factor =
            std::clamp(params.load_step_factors[r] * (1.0 + params.load_step_jitter * rng.uniform(-1.0, 1.0)),
                       params.load_step_min, params.load_step_max);
        for (auto& ph : rec.phases)
            for (std::size_t i = inc; i < ph.size(); ++i) ph[i] *= factor;
        rec.meta["step_factor"] = format_double(factor);
    }

    rec.label.kind = spec.kind;
    rec.label.inception_angle_deg = spec.angle_deg;
    rec.label.priority = spec.priority;
    stamp(rec, params, seed, inc);
    rec.meta["rating"] = std::to_string(spec.rating_index);
    rec.meta["bus"] = std::to_string(spec.bus_index);
    rec.meta["generator"] = spec.generator_online ? "on" : "off";
    return rec;
}

/// Fault-path current of the anti-parallel diode/source HIF model, in amps.
/// Vn is the magnitude of the negative source, so the dead band is -Vn < v < Vp.
inline double hif_current(double v, double vp, double vn, double rp, double rn) {
    double i = 0.0;
    if (v > vp) i += (v - vp) / rp;
    if (v < -vn) i -= (-vn - v) / rn;
    return i;
}

/// High-impedance fault on one phase with resistances re-drawn every redraw interval.
inline WaveformRecord synth_hif(const EventLabel& label, const SynthParams& params, std::uint64_t seed) {
    using namespace synth_detail;
    if (label.kind != EventKind::hif) throw std::invalid_argument("synth_hif: label kind must be hif");
    if (!label.fault_type || !is_single_phase(*label.fault_type) || !is_ground_fault(*label.fault_type))
        throw std::invalid_argument("synth_hif: HIF requires a single-phase-to-ground code");
    label.validate();
    params.validate();

    Rng rng(seed);
    const auto pf = draw_prefault(params, label.priority, rng);
    auto rec = steady_record(params, pf);
    const std::size_t inc = inception_sample(params, label.inception_angle_deg);

    const auto involved = involved_phases(*label.fault_type);
    const int k = involved[0] ? 0 : (involved[1] ? 1 : 2);
    const double w = 2.0 * kPi * params.base_freq_hz;
    auto& ph = rec.phases[k];
    long interval = -1;
    double rp = params.hif_r_min_ohm, rn = params.hif_r_min_ohm;
    for (std::size_t i = inc; i < ph.size(); ++i) {
        const double t = static_cast<double>(i) / params.sample_rate_hz;
        const double tp = static_cast<double>(i - inc) / params.sample_rate_hz;
        const auto j = static_cast<long>(std::floor(tp / params.hif_redraw_s));
        while (interval < j) {
            rp = rng.uniform(params.hif_r_min_ohm, params.hif_r_max_ohm);
            rn = rng.uniform(params.hif_r_min_ohm, params.hif_r_max_ohm);
            ++interval;
        }
        const double v = params.hif_phase_peak_volts * std::sin(w * t + kPhaseShift[k]);
        ph[i] += hif_current(v, params.hif_vp_volts, params.hif_vn_volts, rp, rn) / params.hif_base_current_amps;
    }

    rec.label = label;
    stamp(rec, params, seed, inc);
    return rec;
}

/// Single-knee CT core model parameters.
struct CtModel {
    double knee_multiple = 3.0;
    double rated_burden_ohm = 10.0;
    double nominal_amplitude = 1.0;
};

/// Flux-limited secondary current. Flux integrates burden * i; above the knee
/// the output drops to zero until the current drives the flux back inside.
inline WaveformRecord apply_ct_saturation(const WaveformRecord& record, double burden_ohm, const CtModel& ct = {}) {
    if (!(burden_ohm >= 0.0)) throw std::invalid_argument("apply_ct_saturation: burden must be >= 0");
    WaveformRecord out = record;
    if (burden_ohm == 0.0) return out;
    const double w = 2.0 * synth_detail::kPi * record.base_freq_hz;
    const double knee = ct.knee_multiple * ct.rated_burden_ohm * ct.nominal_amplitude / w;
    const double dt = 1.0 / record.sample_rate_hz;
    const std::size_t m = std::min(record.samples_per_cycle(), record.size());
    for (int k = 0; k < 3; ++k) {
        const auto& in = record.phases[k];
        auto& ph = out.phases[k];
        // Start the core at the flux offset that centres steady-state flux on zero.
        double partial = 0.0, mean_partial = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            partial += in[i];
            mean_partial += partial;
        }
        double flux = -burden_ohm * dt * mean_partial / static_cast<double>(m);
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double next = flux + burden_ohm * dt * in[i];
            if (std::fabs(next) > knee) {
                ph[i] = 0.0;
                flux = std::copysign(knee, next);
            } else {
                ph[i] = in[i];
                flux = next;
            }
        }
    }
    out.meta["ct_burden_ohm"] = format_double(burden_ohm);
    return out;
}

/// Per-phase white Gaussian noise at the requested SNR; +inf is the identity.
/// Signal power is the mean square of the leading cycle (the pre-event steady
/// state), so the noise floor does not grow with the event current.
inline WaveformRecord add_noise(const WaveformRecord& record, double snr_db, std::uint64_t seed) {
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("add_noise: snr_db must be finite or +inf");
    WaveformRecord out = record;
    if (std::isinf(snr_db)) return out;
    const std::size_t ref = std::min(record.samples_per_cycle(), record.size());
    for (int k = 0; k < 3; ++k) {
        auto& ph = out.phases[k];
        if (ref == 0) continue;
        double power = 0.0;
        for (std::size_t i = 0; i < ref; ++i) power += ph[i] * ph[i];
        power /= static_cast<double>(ref);
        const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(k)}));
        for (double& v : ph) v += sigma * rng.normal();
    }
    out.meta["snr_db"] = format_double(snr_db);
    return out;
}

}  // namespace pvrelay
