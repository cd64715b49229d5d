#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/event_detector.hpp"
#include "pvrelay/detect/gamma_tuning.hpp"
#include "pvrelay/detect/gwo.hpp"
#include "pvrelay/fuzzy/ga.hpp"
#include "pvrelay/learn/cv.hpp"
#include "pvrelay/signal/corpus.hpp"
#include "pvrelay/signal/synth.hpp"

namespace pvrelay {

enum class FusionPolicy { fuzzy_only, forest_only, both, either };

inline constexpr FusionPolicy kFusionPolicies[] = {FusionPolicy::fuzzy_only, FusionPolicy::forest_only,
                                                   FusionPolicy::both, FusionPolicy::either};

inline std::string_view to_string(FusionPolicy f) {
    switch (f) {
        case FusionPolicy::fuzzy_only: return "fuzzy-only";
        case FusionPolicy::forest_only: return "forest-only";
        case FusionPolicy::both: return "and";
        case FusionPolicy::either: return "or";
    }
    return "?";
}

inline std::optional<FusionPolicy> parse_fusion(std::string_view s) {
    for (auto f : kFusionPolicies)
        if (to_string(f) == s) return f;
    return std::nullopt;
}

inline bool fuse(FusionPolicy policy, bool fuzzy_fault, bool forest_fault) {
    switch (policy) {
        case FusionPolicy::fuzzy_only: return fuzzy_fault;
        case FusionPolicy::forest_only: return forest_fault;
        case FusionPolicy::both: return fuzzy_fault && forest_fault;
        case FusionPolicy::either: return fuzzy_fault || forest_fault;
    }
    return false;
}

/// Which registry specs the forests consume.
struct FeatureSelection {
    enum class Mode { standard, all, top } mode = Mode::standard;
    std::size_t k = 0;

    std::string text() const {
        switch (mode) {
            case Mode::standard: return "standard";
            case Mode::all: return "all";
            case Mode::top: return "top:" + std::to_string(k);
        }
        return "?";
    }
};

struct PipelineConfig {
    SynthParams synth;
    SweepConfig sweep = SweepConfig::desk();

    std::optional<double> gamma;  // fixed threshold; tuned when absent
    TriggerPolicy trigger_policy = TriggerPolicy::any_phase;
    GammaObjective gamma_objective = GammaObjective::total;
    GwoParams gwo{25, 1, 0.001, 0.5, 200, 0};

    double window_cycles = 1.0;
    FeatureSelection selection;
    std::size_t rank_trees = 100;

    std::size_t holdout_folds = 5;  // one fold held out: 4:1
    bool smote = false;
    std::size_t smote_k = 5;
    std::size_t cv_folds = 5;
    GridSpec grid;
    GaParams ga;
    FusionPolicy fusion = FusionPolicy::both;

    void validate() const {
        synth.validate();
        sweep.validate();
        if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
        gwo.validate();
        if (!(window_cycles > 0.0)) throw ConfigError("window_cycles must be positive");
        if (selection.mode == FeatureSelection::Mode::top && (selection.k < 1 || selection.k > 195))
            throw ConfigError("feature_selection top:K needs 1 <= K <= 195");
        if (rank_trees < 1) throw ConfigError("rank_trees must be >= 1");
        if (holdout_folds < 2) throw ConfigError("holdout_folds must be >= 2");
        if (smote_k < 1) throw ConfigError("smote_k must be >= 1");
        if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
        if (grid.size() == 0) throw ConfigError("hyperparameter grid is empty");
        for (auto v : grid.n_estimators)
            if (v < 1) throw ConfigError("grid_n_estimators entries must be >= 1");
        for (auto v : grid.min_samples_split)
            if (v < 2) throw ConfigError("grid_min_samples_split entries must be >= 2");
        ga.validate();
    }
};

namespace config_detail {

struct Reader {
    std::string where;
    std::string value;

    [[noreturn]] void fail(const std::string& what) const { throw ConfigError(where + ": " + what); }

    double real() const {
        auto v = parse_double(value);
        if (!v || !std::isfinite(*v)) fail("expected a number, got '" + value + "'");
        return *v;
    }
    std::size_t count() const {
        auto v = parse_uint(value);
        if (!v) fail("expected a non-negative integer, got '" + value + "'");
        return static_cast<std::size_t>(*v);
    }
    bool flag() const {
        if (value == "true" || value == "1" || value == "yes") return true;
        if (value == "false" || value == "0" || value == "no") return false;
        fail("expected true/false, got '" + value + "'");
    }
    std::vector<std::string> items() const {
        std::vector<std::string> out;
        for (auto& s : split(value, ',')) {
            auto t = std::string(trim(s));
            if (!t.empty()) out.push_back(t);
        }
        return out;
    }
    std::vector<double> reals() const {
        std::vector<double> out;
        for (const auto& s : items()) {
            auto v = parse_double(s);
            if (!v) fail("bad number '" + s + "' in list");
            out.push_back(*v);
        }
        return out;
    }
    template <class T = std::size_t>
    std::vector<T> counts() const {
        std::vector<T> out;
        for (const auto& s : items()) {
            auto v = parse_uint(s);
            if (!v) fail("bad integer '" + s + "' in list");
            out.push_back(static_cast<T>(*v));
        }
        return out;
    }
    std::vector<int> ints() const {
        std::vector<int> out;
        for (const auto& s : items()) {
            auto v = parse_int(s);
            if (!v) fail("bad integer '" + s + "' in list");
            out.push_back(static_cast<int>(*v));
        }
        return out;
    }
    std::optional<double> optional_real() const {
        if (value == "none" || value == "off") return std::nullopt;
        return real();
    }
};

using Setter = std::function<void(PipelineConfig&, const Reader&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"sample_rate_hz", [](PipelineConfig& c, const Reader& r) { c.synth.sample_rate_hz = r.real(); }},
        {"base_freq_hz", [](PipelineConfig& c, const Reader& r) { c.synth.base_freq_hz = r.real(); }},
        {"noise_snr_db", [](PipelineConfig& c, const Reader& r) { c.synth.noise_snr_db = r.optional_real(); }},
        {"ct_burden_ohm", [](PipelineConfig& c, const Reader& r) { c.synth.ct_burden_ohm = r.optional_real(); }},
        {"dc_offset_ratio", [](PipelineConfig& c, const Reader& r) { c.synth.dc_offset_ratio = r.real(); }},
        {"gain_jitter", [](PipelineConfig& c, const Reader& r) { c.synth.gain_jitter = r.real(); }},
        {"sweep", [](PipelineConfig& c, const Reader& r) {
             if (r.value == "desk") c.sweep = SweepConfig::desk();
             else if (r.value == "full") c.sweep = SweepConfig::full();
             else r.fail("sweep accepts desk or full");
         }},
        {"faults", [](PipelineConfig& c, const Reader& r) { c.sweep.faults = r.flag(); }},
        {"fault_locations", [](PipelineConfig& c, const Reader& r) { c.sweep.fault_locations = r.ints(); }},
        {"fault_resistances", [](PipelineConfig& c, const Reader& r) { c.sweep.fault_resistances = r.reals(); }},
        {"fault_angles", [](PipelineConfig& c, const Reader& r) { c.sweep.fault_angles = r.reals(); }},
        {"fault_types", [](PipelineConfig& c, const Reader& r) {
             c.sweep.fault_types.clear();
             for (const auto& s : r.items()) {
                 auto t = parse_fault_type(s);
                 if (!t) r.fail("unknown fault type '" + s + "'");
                 c.sweep.fault_types.push_back(*t);
             }
         }},
        {"priorities", [](PipelineConfig& c, const Reader& r) {
             c.sweep.priorities.clear();
             for (const auto& s : r.items()) {
                 auto p = parse_priority(s);
                 if (!p) r.fail("unknown priority '" + s + "'");
                 c.sweep.priorities.push_back(*p);
             }
         }},
        {"switching", [](PipelineConfig& c, const Reader& r) { c.sweep.switching = r.flag(); }},
        {"switching_angles", [](PipelineConfig& c, const Reader& r) { c.sweep.switching_angles = r.reals(); }},
        {"switching_buses", [](PipelineConfig& c, const Reader& r) { c.sweep.switching_buses = r.ints(); }},
        {"switching_ratings", [](PipelineConfig& c, const Reader& r) { c.sweep.switching_ratings = r.ints(); }},
        {"hif", [](PipelineConfig& c, const Reader& r) { c.sweep.hif = r.flag(); }},
        {"hif_locations", [](PipelineConfig& c, const Reader& r) { c.sweep.hif_locations = r.ints(); }},
        {"hif_angles", [](PipelineConfig& c, const Reader& r) { c.sweep.hif_angles = r.reals(); }},
        {"steady_records", [](PipelineConfig& c, const Reader& r) { c.sweep.steady_records = r.count(); }},

        {"gamma", [](PipelineConfig& c, const Reader& r) {
             c.gamma = r.value == "auto" ? std::nullopt : std::optional<double>(r.real());
         }},
        {"trigger_policy", [](PipelineConfig& c, const Reader& r) {
             if (r.value == "any") c.trigger_policy = TriggerPolicy::any_phase;
             else if (r.value == "all") c.trigger_policy = TriggerPolicy::all_phases;
             else r.fail("trigger_policy accepts any or all");
         }},
        {"gamma_objective", [](PipelineConfig& c, const Reader& r) {
             if (r.value == "total") c.gamma_objective = GammaObjective::total;
             else if (r.value == "triggered") c.gamma_objective = GammaObjective::triggered;
             else r.fail("gamma_objective accepts total or triggered");
         }},
        {"gwo_population", [](PipelineConfig& c, const Reader& r) { c.gwo.population = r.count(); }},
        {"gwo_iterations", [](PipelineConfig& c, const Reader& r) { c.gwo.max_iter = r.count(); }},
        {"gamma_lower", [](PipelineConfig& c, const Reader& r) { c.gwo.lower = r.real(); }},
        {"gamma_upper", [](PipelineConfig& c, const Reader& r) { c.gwo.upper = r.real(); }},

        {"window_cycles", [](PipelineConfig& c, const Reader& r) { c.window_cycles = r.real(); }},
        {"feature_selection", [](PipelineConfig& c, const Reader& r) {
             if (r.value == "standard") c.selection = {FeatureSelection::Mode::standard, 0};
             else if (r.value == "all") c.selection = {FeatureSelection::Mode::all, 0};
             else if (r.value.rfind("top:", 0) == 0) {
                 auto k = parse_uint(r.value.substr(4));
                 if (!k) r.fail("feature_selection top:K needs an integer K");
                 c.selection = {FeatureSelection::Mode::top, static_cast<std::size_t>(*k)};
             } else r.fail("feature_selection accepts standard, all or top:K");
         }},
        {"rank_trees", [](PipelineConfig& c, const Reader& r) { c.rank_trees = r.count(); }},

        {"holdout_folds", [](PipelineConfig& c, const Reader& r) { c.holdout_folds = r.count(); }},
        {"smote", [](PipelineConfig& c, const Reader& r) { c.smote = r.flag(); }},
        {"smote_k", [](PipelineConfig& c, const Reader& r) { c.smote_k = r.count(); }},
        {"cv_folds", [](PipelineConfig& c, const Reader& r) { c.cv_folds = r.count(); }},
        {"grid_n_estimators", [](PipelineConfig& c, const Reader& r) { c.grid.n_estimators = r.counts(); }},
        {"grid_min_samples_split", [](PipelineConfig& c, const Reader& r) { c.grid.min_samples_split = r.counts(); }},
        {"grid_max_depth", [](PipelineConfig& c, const Reader& r) { c.grid.max_depth = r.counts(); }},
        {"features_per_split", [](PipelineConfig& c, const Reader& r) { c.grid.features_per_split = r.count(); }},

        {"ga_population", [](PipelineConfig& c, const Reader& r) { c.ga.population = r.count(); }},
        {"ga_generations", [](PipelineConfig& c, const Reader& r) { c.ga.generations = r.count(); }},
        {"ga_crossover_rate", [](PipelineConfig& c, const Reader& r) { c.ga.crossover_rate = r.real(); }},
        {"ga_mutation_rate", [](PipelineConfig& c, const Reader& r) { c.ga.mutation_rate = r.real(); }},
        {"ga_mutation_sigma", [](PipelineConfig& c, const Reader& r) { c.ga.mutation_sigma = r.real(); }},
        {"ga_elitism", [](PipelineConfig& c, const Reader& r) { c.ga.elitism = r.count(); }},

        {"fusion", [](PipelineConfig& c, const Reader& r) {
             auto f = parse_fusion(r.value);
             if (!f) r.fail("fusion accepts fuzzy-only, forest-only, and, or");
             c.fusion = *f;
         }},
    };
    return table;
}

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& [k, _] : config_detail::setters()) keys.push_back(k);
    return keys;
}

/// Applies one `key = value` assignment.
inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value,
                          const std::string& where = "config") {
    const auto& table = config_detail::setters();
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    it->second(cfg, {where, value});
}

/// Flat `key = value` text; '#' starts a comment. Later assignments win.
inline PipelineConfig parse_config(std::istream& in, const std::string& source = "config") {
    PipelineConfig cfg;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const auto body = trim(line);
        if (body.empty()) continue;
        const std::string where = source + ":" + std::to_string(n);
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value'");
        const std::string key(trim(body.substr(0, eq)));
        const std::string value(trim(body.substr(eq + 1)));
        if (key.empty()) throw ConfigError(where + ": empty key");
        apply_setting(cfg, key, value, where);
    }
    cfg.validate();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    return parse_config(in, path);
}

}  // namespace pvrelay
