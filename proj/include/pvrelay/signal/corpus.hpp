#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/signal/synth.hpp"
#include "pvrelay/signal/waveform.hpp"

namespace pvrelay {

/// Cartesian sweep axes. Every enabled block multiplies out its axes.
struct SweepConfig {
    bool faults = true;
    std::vector<int> fault_locations = {2, 4, 5, 7};
    std::vector<double> fault_resistances = {0.01, 1.0, 10.0};
    std::vector<double> fault_angles = {0.0, 90.0, 180.0, 270.0};
    std::vector<FaultType> fault_types{std::begin(kFaultTypes), std::end(kFaultTypes)};
    std::vector<Priority> priorities = {Priority::P, Priority::Q};

    bool switching = true;
    std::vector<EventKind> switching_kinds = {EventKind::capacitor_switch, EventKind::load_switch};
    std::vector<double> switching_angles = {0.0, 75.0, 150.0, 225.0, 300.0};
    std::vector<int> switching_buses = {0, 1, 2};
    std::vector<int> switching_ratings = {0, 1, 2, 3};
    std::vector<bool> generator_states = {true, false};

    bool hif = false;
    std::vector<int> hif_locations = {4, 5};
    std::vector<double> hif_angles = {0.0, 90.0, 180.0, 270.0};
    std::vector<FaultType> hif_types = {FaultType::ag, FaultType::bg, FaultType::cg};

    std::size_t steady_records = 0;

    /// Desk-scale default: 960 faults, 480 switching events.
    static SweepConfig desk() { return {}; }

    /// Full grid: 2880 faults, 2400 switching events.
    static SweepConfig full() {
        SweepConfig s;
        s.fault_locations = {1, 2, 3, 4, 5, 6, 7, 8};
        s.fault_angles = {0.0, 60.0, 120.0, 180.0, 240.0, 300.0};
        s.switching_angles.clear();
        for (int i = 0; i < 25; ++i) s.switching_angles.push_back(i * 14.4);
        s.switching_buses = {0, 1, 2};
        return s;
    }

    void validate() const {
        auto need = [](bool enabled, std::size_t n, const char* axis) {
            if (enabled && n == 0) throw ConfigError(std::string("sweep axis '") + axis + "' is empty");
        };
        need(faults, fault_locations.size(), "fault_locations");
        need(faults, fault_resistances.size(), "fault_resistances");
        need(faults, fault_angles.size(), "fault_angles");
        need(faults, fault_types.size(), "fault_types");
        need(faults || switching || hif, priorities.size(), "priorities");
        need(switching, switching_kinds.size(), "switching_kinds");
        need(switching, switching_angles.size(), "switching_angles");
        need(switching, switching_buses.size(), "switching_buses");
        need(switching, switching_ratings.size(), "switching_ratings");
        need(switching, generator_states.size(), "generator_states");
        need(hif, hif_locations.size(), "hif_locations");
        need(hif, hif_angles.size(), "hif_angles");
        need(hif, hif_types.size(), "hif_types");
        for (int l : fault_locations)
            if (l < 1 || l > 8) throw ConfigError("fault location outside f1..f8");
        for (int l : hif_locations)
            if (l < 1 || l > 8) throw ConfigError("hif location outside f1..f8");
        for (auto t : hif_types)
            if (!is_single_phase(t) || !is_ground_fault(t)) throw ConfigError("hif_types must be single-phase-to-ground");
        for (auto k : switching_kinds)
            if (k != EventKind::capacitor_switch && k != EventKind::load_switch)
                throw ConfigError("switching_kinds accepts capacitor_switch and load_switch");
        for (int r : switching_ratings)
            if (r < 0 || r > 3) throw ConfigError("switching rating index outside 0..3");
        for (int b : switching_buses)
            if (b < 0) throw ConfigError("switching bus index must be >= 0");
    }

    std::size_t fault_count() const {
        return faults ? fault_locations.size() * fault_resistances.size() * fault_angles.size() * fault_types.size() *
                            priorities.size()
                      : 0;
    }
    std::size_t switching_count() const {
        return switching ? switching_kinds.size() * switching_angles.size() * switching_buses.size() *
                               switching_ratings.size() * generator_states.size() * priorities.size()
                         : 0;
    }
    std::size_t hif_count() const {
        return hif ? hif_locations.size() * hif_angles.size() * hif_types.size() * priorities.size() : 0;
    }
    std::size_t total_count() const { return fault_count() + switching_count() + hif_count() + steady_records; }
};

struct Corpus {
    std::vector<WaveformRecord> records;
};

namespace corpus_detail {

inline std::string record_name(std::size_t index, EventKind kind) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu_", index);
    return std::string(buf) + std::string(to_string(kind)) + ".csv";
}

// One deferred generator call per record, so records can be built in parallel.
struct Job {
    EventLabel label;
    SwitchingSpec switching;
    std::uint64_t seed = 0;
};

inline WaveformRecord apply_scenario(WaveformRecord rec, const SynthParams& p) {
    if (p.ct_burden_ohm) rec = apply_ct_saturation(rec, *p.ct_burden_ohm);
    if (p.noise_snr_db) rec = add_noise(rec, *p.noise_snr_db, derive_seed(rec.seed, {0x6E6F697365ULL}));
    return rec;
}

}  // namespace corpus_detail

/// Builds the Cartesian-product corpus. Record seeds hash the master seed with
/// the block id and axis indices, so any subset regenerates identically.
inline Corpus build_corpus(const SweepConfig& sweep, const SynthParams& params, std::uint64_t seed) {
    sweep.validate();
    params.validate();
    using corpus_detail::Job;
    std::vector<Job> jobs;
    jobs.reserve(sweep.total_count());

    if (sweep.faults) {
        for (std::size_t il = 0; il < sweep.fault_locations.size(); ++il)
            for (std::size_t ir = 0; ir < sweep.fault_resistances.size(); ++ir)
                for (std::size_t ia = 0; ia < sweep.fault_angles.size(); ++ia)
                    for (std::size_t it = 0; it < sweep.fault_types.size(); ++it)
                        for (std::size_t ip = 0; ip < sweep.priorities.size(); ++ip) {
                            Job j;
                            j.label.kind = EventKind::fault;
                            j.label.fault_type = sweep.fault_types[it];
                            j.label.location = Location{sweep.fault_locations[il]};
                            j.label.resistance_ohm = sweep.fault_resistances[ir];
                            j.label.inception_angle_deg = sweep.fault_angles[ia];
                            j.label.priority = sweep.priorities[ip];
                            j.seed = derive_seed(seed, {1, il, ir, ia, it, ip});
                            jobs.push_back(j);
                        }
    }
    if (sweep.switching) {
        for (std::size_t ik = 0; ik < sweep.switching_kinds.size(); ++ik)
            for (std::size_t ia = 0; ia < sweep.switching_angles.size(); ++ia)
                for (std::size_t ib = 0; ib < sweep.switching_buses.size(); ++ib)
                    for (std::size_t ir = 0; ir < sweep.switching_ratings.size(); ++ir)
                        for (std::size_t ig = 0; ig < sweep.generator_states.size(); ++ig)
                            for (std::size_t ip = 0; ip < sweep.priorities.size(); ++ip) {
                                Job j;
                                j.switching = {sweep.switching_kinds[ik], sweep.switching_angles[ia],
                                               sweep.switching_ratings[ir], sweep.switching_buses[ib],
                                               sweep.generator_states[ig], sweep.priorities[ip]};
                                j.label.kind = j.switching.kind;
                                j.seed = derive_seed(seed, {2, ik, ia, ib, ir, ig, ip});
                                jobs.push_back(j);
                            }
    }
    if (sweep.hif) {
        for (std::size_t il = 0; il < sweep.hif_locations.size(); ++il)
            for (std::size_t ia = 0; ia < sweep.hif_angles.size(); ++ia)
                for (std::size_t it = 0; it < sweep.hif_types.size(); ++it)
                    for (std::size_t ip = 0; ip < sweep.priorities.size(); ++ip) {
                        Job j;
                        j.label.kind = EventKind::hif;
                        j.label.fault_type = sweep.hif_types[it];
                        j.label.location = Location{sweep.hif_locations[il]};
                        j.label.resistance_ohm = 0.5 * (params.hif_r_min_ohm + params.hif_r_max_ohm);
                        j.label.inception_angle_deg = sweep.hif_angles[ia];
                        j.label.priority = sweep.priorities[ip];
                        j.seed = derive_seed(seed, {3, il, ia, it, ip});
                        jobs.push_back(j);
                    }
    }
    for (std::size_t i = 0; i < sweep.steady_records; ++i) {
        Job j;
        j.label.kind = EventKind::steady;
        j.label.priority = sweep.priorities.empty() ? Priority::P : sweep.priorities[i % sweep.priorities.size()];
        j.seed = derive_seed(seed, {4, i});
        jobs.push_back(j);
    }

    Corpus corpus;
    corpus.records.resize(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        const auto& j = jobs[i];
        WaveformRecord rec;
        switch (j.label.kind) {
            case EventKind::fault: rec = synth_fault(j.label, params, j.seed); break;
            case EventKind::hif: rec = synth_hif(j.label, params, j.seed); break;
            case EventKind::capacitor_switch:
            case EventKind::load_switch: rec = synth_switching(j.switching, params, j.seed); break;
            case EventKind::steady: rec = synth_steady(params, j.seed, j.label.priority); break;
        }
        rec = corpus_detail::apply_scenario(std::move(rec), params);
        rec.name = corpus_detail::record_name(i + 1, rec.label.kind);
        corpus.records[i] = std::move(rec);
    });
    return corpus;
}

namespace corpus_detail {

inline constexpr const char* kManifestHeader =
    "file,kind,fault_type,location,resistance_ohm,inception_angle_deg,priority,seed";

inline std::string encode_meta(const std::map<std::string, std::string>& meta) {
    std::string out;
    for (const auto& [k, v] : meta) {
        for (char c : k + v)
            if (c == ';' || c == '=' || c == ',' || c == '\n')
                throw DataError("meta entry '" + k + "' contains a reserved character");
        if (!out.empty()) out += ';';
        out += k + '=' + v;
    }
    return out;
}

inline std::map<std::string, std::string> decode_meta(std::string_view s, const std::string& where) {
    std::map<std::string, std::string> meta;
    if (trim(s).empty()) return meta;
    for (const auto& item : split(s, ';')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw DataError(where + ": malformed meta entry '" + item + "'");
        meta[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return meta;
}

inline void write_waveform(const WaveformRecord& rec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "t,ia,ib,ic\n";
    std::string line;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        line.clear();
        line += format_double(static_cast<double>(i) / rec.sample_rate_hz);
        for (int k = 0; k < 3; ++k) {
            line += ',';
            line += format_double(rec.phases[k][i]);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw DataError("write failed for " + path.string());
}

struct WaveformData {
    std::vector<double> t;
    std::array<std::vector<double>, 3> phases;
};

inline WaveformData read_waveform(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const std::string file = path.string();
    std::string line;
    if (!std::getline(in, line)) throw DataError(file + ":1: missing header");
    const auto header = split(trim(line), ',');
    int col_t = -1;
    std::array<int, 3> col{-1, -1, -1};
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = trim(header[i]);
        if (name == "t" || name == "time") col_t = static_cast<int>(i);
        else if (name == "ia") col[0] = static_cast<int>(i);
        else if (name == "ib") col[1] = static_cast<int>(i);
        else if (name == "ic") col[2] = static_cast<int>(i);
        else throw DataError(file + ":1: unknown column '" + std::string(name) + "'");
    }
    if (header.size() != 4 || col_t < 0 || col[0] < 0 || col[1] < 0 || col[2] < 0)
        throw DataError(file + ":1: header must name t, ia, ib, ic");

    WaveformData data;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != 4)
            throw DataError(file + ":" + std::to_string(line_no) + ": expected 4 columns, got " +
                            std::to_string(cells.size()));
        auto cell = [&](int c) {
            const auto v = parse_double(cells[static_cast<std::size_t>(c)]);
            if (!v) throw DataError(file + ":" + std::to_string(line_no) + ": bad number '" + cells[c] + "'");
            return *v;
        };
        data.t.push_back(cell(col_t));
        for (int k = 0; k < 3; ++k) data.phases[k].push_back(cell(col[k]));
    }
    return data;
}

}  // namespace corpus_detail

/// Writes manifest.csv and one waveform CSV per record. The manifest carries an
/// optional trailing `meta` column with rates and scenario tags.
inline void write_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.csv", std::ios::binary);
    if (!manifest) throw DataError("cannot write " + (dir / "manifest.csv").string());
    manifest << corpus_detail::kManifestHeader << ",meta\n";
    for (const auto& rec : corpus.records) {
        if (rec.name.empty() || rec.name.find(',') != std::string::npos || rec.name.find('/') != std::string::npos)
            throw DataError("record name '" + rec.name + "' is not a plain file name");
        const auto& l = rec.label;
        auto meta = rec.meta;
        meta["sample_rate_hz"] = format_double(rec.sample_rate_hz);
        meta["base_freq_hz"] = format_double(rec.base_freq_hz);
        manifest << rec.name << ',' << to_string(l.kind) << ',' << (l.fault_type ? to_string(*l.fault_type) : "")
                 << ',' << (l.location ? location_name(*l.location) : "") << ',' << format_double(l.resistance_ohm)
                 << ',' << format_double(l.inception_angle_deg) << ',' << to_string(l.priority) << ',' << rec.seed
                 << ',' << corpus_detail::encode_meta(meta) << '\n';
        corpus_detail::write_waveform(rec, dir / rec.name);
    }
    if (!manifest) throw DataError("write failed for manifest.csv");
}

inline Corpus read_corpus(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.csv";
    const std::string mfile = manifest_path.string();
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + mfile);
    std::string line;
    if (!std::getline(in, line)) throw DataError(mfile + ":1: missing header");
    const auto header = std::string(trim(line));
    const bool has_meta = header == std::string(corpus_detail::kManifestHeader) + ",meta";
    if (!has_meta && header != corpus_detail::kManifestHeader) throw DataError(mfile + ":1: malformed header");
    const std::size_t ncol = has_meta ? 9 : 8;

    struct Row {
        WaveformRecord rec;
        std::string where;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = mfile + ":" + std::to_string(line_no);
        const auto c = split(trim(line), ',');
        if (c.size() != ncol)
            throw DataError(where + ": expected " + std::to_string(ncol) + " columns, got " + std::to_string(c.size()));
        Row row;
        row.where = where;
        auto& rec = row.rec;
        rec.name = c[0];
        const auto kind = parse_event_kind(c[1]);
        if (!kind) throw DataError(where + ": unknown kind '" + c[1] + "'");
        rec.label.kind = *kind;
        if (!c[2].empty()) {
            const auto ft = parse_fault_type(c[2]);
            if (!ft) throw DataError(where + ": unknown fault_type '" + c[2] + "'");
            rec.label.fault_type = *ft;
        }
        if (!c[3].empty()) {
            const auto loc = parse_location(c[3]);
            if (!loc) throw DataError(where + ": unknown location '" + c[3] + "'");
            rec.label.location = *loc;
        }
        const auto r = parse_double(c[4]);
        const auto a = parse_double(c[5]);
        if (!r || !a) throw DataError(where + ": bad resistance or angle");
        rec.label.resistance_ohm = *r;
        rec.label.inception_angle_deg = *a;
        const auto pr = parse_priority(c[6]);
        if (!pr) throw DataError(where + ": unknown priority '" + c[6] + "'");
        rec.label.priority = *pr;
        const auto s = parse_uint(c[7]);
        if (!s) throw DataError(where + ": bad seed '" + c[7] + "'");
        rec.seed = *s;
        if (has_meta) rec.meta = corpus_detail::decode_meta(c[8], where);
        try {
            rec.label.validate();
        } catch (const std::invalid_argument& e) {
            throw DataError(where + ": " + e.what());
        }
        rows.push_back(std::move(row));
    }

    Corpus corpus;
    corpus.records.resize(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        auto& rec = rows[i].rec;
        auto data = corpus_detail::read_waveform(dir / rec.name);
        if (data.t.size() < 2) throw DataError((dir / rec.name).string() + ": fewer than 2 samples");
        if (auto it = rec.meta.find("sample_rate_hz"); it != rec.meta.end()) {
            const auto v = parse_double(it->second);
            if (!v) throw DataError(rows[i].where + ": bad sample_rate_hz");
            rec.sample_rate_hz = *v;
        } else {
            rec.sample_rate_hz = static_cast<double>(data.t.size() - 1) / (data.t.back() - data.t.front());
        }
        if (auto it = rec.meta.find("base_freq_hz"); it != rec.meta.end()) {
            const auto v = parse_double(it->second);
            if (!v) throw DataError(rows[i].where + ": bad base_freq_hz");
            rec.base_freq_hz = *v;
        }
        rec.phases = std::move(data.phases);
        corpus.records[i] = std::move(rec);
    });
    return corpus;
}

/// Loads one `t,ia,ib,ic` waveform file outside a corpus. The rate comes from
/// the time column (snapped to an integer when within 1e-6) unless given.
inline WaveformRecord read_record_file(const std::filesystem::path& path, double base_freq_hz,
                                       std::optional<double> sample_rate_hz = std::nullopt) {
    auto data = corpus_detail::read_waveform(path);
    if (data.t.size() < 2) throw DataError(path.string() + ": fewer than 2 samples");
    WaveformRecord rec;
    rec.name = path.filename().string();
    rec.base_freq_hz = base_freq_hz;
    if (sample_rate_hz) {
        rec.sample_rate_hz = *sample_rate_hz;
    } else {
        const double span = data.t.back() - data.t.front();
        if (!(span > 0.0)) throw DataError(path.string() + ": time column is not increasing");
        double rate = static_cast<double>(data.t.size() - 1) / span;
        if (std::fabs(rate - std::round(rate)) <= 1e-6 * rate) rate = std::round(rate);
        rec.sample_rate_hz = rate;
    }
    rec.phases = std::move(data.phases);
    return rec;
}

}  // namespace pvrelay
