#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pvrelay/core/errors.hpp"

namespace pvrelay {

enum class EventKind { fault, capacitor_switch, load_switch, hif, steady };

enum class FaultType { ag, ab, ac, abg, acg, abcg, bg, bcg, bc, cg };

inline constexpr FaultType kFaultTypes[] = {FaultType::ag,  FaultType::ab,   FaultType::ac,  FaultType::abg,
                                            FaultType::acg, FaultType::abcg, FaultType::bg,  FaultType::bcg,
                                            FaultType::bc,  FaultType::cg};

enum class Priority { P, Q };

/// Relay-relative fault region. f1-f3 lie behind the relay, f4-f5 on the
/// protected line, f6-f8 beyond its remote end.
enum class Zone { backward_external, internal, forward_external };

/// Faulted-phase classes used by phase selection.
enum class PhaseClass { a, b, c, ab, bc, ca, abc };

inline std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::fault: return "fault";
        case EventKind::capacitor_switch: return "capacitor_switch";
        case EventKind::load_switch: return "load_switch";
        case EventKind::hif: return "hif";
        case EventKind::steady: return "steady";
    }
    return "?";
}

inline std::optional<EventKind> parse_event_kind(std::string_view s) {
    for (auto k : {EventKind::fault, EventKind::capacitor_switch, EventKind::load_switch, EventKind::hif,
                   EventKind::steady})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

inline std::string_view to_string(FaultType t) {
    switch (t) {
        case FaultType::ag: return "ag";
        case FaultType::ab: return "ab";
        case FaultType::ac: return "ac";
        case FaultType::abg: return "abg";
        case FaultType::acg: return "acg";
        case FaultType::abcg: return "abcg";
        case FaultType::bg: return "bg";
        case FaultType::bcg: return "bcg";
        case FaultType::bc: return "bc";
        case FaultType::cg: return "cg";
    }
    return "?";
}

inline std::optional<FaultType> parse_fault_type(std::string_view s) {
    for (auto t : kFaultTypes)
        if (to_string(t) == s) return t;
    return std::nullopt;
}

inline std::string_view to_string(Priority p) { return p == Priority::P ? "P" : "Q"; }

inline std::optional<Priority> parse_priority(std::string_view s) {
    if (s == "P") return Priority::P;
    if (s == "Q") return Priority::Q;
    return std::nullopt;
}

inline std::string_view to_string(Zone z) {
    switch (z) {
        case Zone::backward_external: return "backward";
        case Zone::internal: return "internal";
        case Zone::forward_external: return "forward";
    }
    return "?";
}

inline std::string_view to_string(PhaseClass p) {
    switch (p) {
        case PhaseClass::a: return "a";
        case PhaseClass::b: return "b";
        case PhaseClass::c: return "c";
        case PhaseClass::ab: return "ab";
        case PhaseClass::bc: return "bc";
        case PhaseClass::ca: return "ca";
        case PhaseClass::abc: return "abc";
    }
    return "?";
}

/// Which of phases a, b, c a fault type involves.
inline std::array<bool, 3> involved_phases(FaultType t) {
    const auto name = to_string(t);
    return {name.find('a') != std::string_view::npos, name.find('b') != std::string_view::npos,
            name.find('c') != std::string_view::npos};
}

inline bool is_ground_fault(FaultType t) { return to_string(t).back() == 'g'; }

inline bool is_single_phase(FaultType t) {
    const auto p = involved_phases(t);
    return (p[0] + p[1] + p[2]) == 1;
}

inline PhaseClass phase_class(FaultType t) {
    const auto p = involved_phases(t);
    if (p[0] && p[1] && p[2]) return PhaseClass::abc;
    if (p[0] && p[1]) return PhaseClass::ab;
    if (p[1] && p[2]) return PhaseClass::bc;
    if (p[0] && p[2]) return PhaseClass::ca;
    if (p[0]) return PhaseClass::a;
    if (p[1]) return PhaseClass::b;
    return PhaseClass::c;
}

/// Fault location f1..f8.
struct Location {
    int index = 1;

    friend bool operator==(Location, Location) = default;
};

inline Zone zone_of(Location loc) {
    if (loc.index < 1 || loc.index > 8) throw std::invalid_argument("location outside f1..f8");
    if (loc.index <= 3) return Zone::backward_external;
    if (loc.index <= 5) return Zone::internal;
    return Zone::forward_external;
}

inline std::string location_name(Location loc) { return "f" + std::to_string(loc.index); }

inline std::optional<Location> parse_location(std::string_view s) {
    if (s.size() != 2 || s[0] != 'f' || s[1] < '1' || s[1] > '8') return std::nullopt;
    return Location{s[1] - '0'};
}

/// Ground truth attached to every record.
struct EventLabel {
    EventKind kind = EventKind::steady;
    std::optional<FaultType> fault_type;
    std::optional<Location> location;
    double resistance_ohm = 0.0;
    double inception_angle_deg = 0.0;
    Priority priority = Priority::P;

    bool is_faulted() const { return kind == EventKind::fault || kind == EventKind::hif; }

    void validate() const {
        const bool faulted = is_faulted();
        if (faulted != fault_type.has_value() || faulted != location.has_value())
            throw std::invalid_argument("label: fault_type and location are required exactly for faults and HIFs");
        if (location) (void)zone_of(*location);
    }

    friend bool operator==(const EventLabel&, const EventLabel&) = default;
};

/// Three-phase current samples at a fixed rate, with provenance.
struct WaveformRecord {
    std::string name;
    double sample_rate_hz = 7680.0;
    double base_freq_hz = 60.0;
    std::array<std::vector<double>, 3> phases;
    EventLabel label;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> meta;

    std::size_t size() const { return phases[0].size(); }

    /// Samples per power-frequency cycle; the ratio must be an integer.
    std::size_t samples_per_cycle() const {
        const double m = sample_rate_hz / base_freq_hz;
        const double r = std::round(m);
        if (!(r >= 1.0) || std::fabs(m - r) > 1e-9 * m)
            throw DataError("sample_rate_hz / base_freq_hz must be an integer (got " + std::to_string(m) + ")");
        return static_cast<std::size_t>(r);
    }

    void validate() const {
        if (!(sample_rate_hz > 0.0) || !(base_freq_hz > 0.0)) throw DataError("record rates must be positive");
        const auto m = samples_per_cycle();
        if (phases[1].size() != phases[0].size() || phases[2].size() != phases[0].size())
            throw DataError("record " + name + ": phase lengths differ");
        if (phases[0].size() < 4 * m) throw DataError("record " + name + ": shorter than 4 cycles");
        label.validate();
    }
};

}  // namespace pvrelay
