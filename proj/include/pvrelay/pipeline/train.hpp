#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/detect/gamma_tuning.hpp"
#include "pvrelay/features/registry.hpp"
#include "pvrelay/fuzzy/ga.hpp"
#include "pvrelay/learn/cv.hpp"
#include "pvrelay/learn/forest.hpp"
#include "pvrelay/learn/metrics.hpp"
#include "pvrelay/learn/smote.hpp"
#include "pvrelay/pipeline/bundle.hpp"
#include "pvrelay/pipeline/config.hpp"

namespace pvrelay {

/// Detection outcome and full feature bank of one record.
struct RecordFeatures {
    bool triggered = false;
    bool usable = false;  // window captured and every registry spec present
    std::vector<double> bank;
};

inline RecordFeatures record_features(const WaveformRecord& rec, const DetectorConfig& det, double window_cycles) {
    RecordFeatures out;
    const auto trig = detect(rec, det);
    out.triggered = trig.triggered;
    if (!trig.triggered) return out;
    try {
        const auto fv = extract_all(capture_window(rec, *trig.trigger_index, window_cycles));
        if (!fv.complete()) return out;
        out.bank = fv.values;
        out.usable = true;
    } catch (const CaptureError&) {
    }
    return out;
}

inline std::vector<RecordFeatures> corpus_features(const Corpus& corpus, const DetectorConfig& det,
                                                   double window_cycles) {
    std::vector<RecordFeatures> out(corpus.records.size());
    parallel_for(out.size(), [&](std::size_t i) { out[i] = record_features(corpus.records[i], det, window_cycles); });
    return out;
}

/// 4-class event label used to rank features: non-fault plus the three zones.
inline int event_class(const EventLabel& l) { return l.is_faulted() && l.location ? 1 + static_cast<int>(zone_of(*l.location)) : 0; }

inline const std::vector<std::string>& event_classes() {
    static const std::vector<std::string> v = {"non-fault", "backward", "internal", "forward"};
    return v;
}

/// Holdout membership (true = held out) stratified by kind, zone and phase class.
/// Falls back to kind-only strata when a fine stratum is smaller than the fold count.
inline std::vector<bool> holdout_split(const Corpus& corpus, std::size_t folds, std::uint64_t seed) {
    auto strata = [&](bool fine) {
        std::map<std::string, int> ids;
        std::vector<int> y;
        for (const auto& r : corpus.records) {
            std::string key(to_string(r.label.kind));
            if (fine) key += '|' + zone_text(r.label) + '|' + phase_class_text(r.label);
            y.push_back(ids.emplace(key, static_cast<int>(ids.size())).first->second);
        }
        return y;
    };
    std::vector<std::size_t> fold;
    try {
        fold = stratified_kfold(strata(true), folds, seed);
    } catch (const StratificationError&) {
        try {
            fold = stratified_kfold(strata(false), folds, seed);
        } catch (const StratificationError& e) {
            throw TrainingError(std::string("holdout split: ") + e.what());
        }
    }
    std::vector<bool> held(fold.size());
    for (std::size_t i = 0; i < fold.size(); ++i) held[i] = fold[i] == 0;
    return held;
}

struct StageScores {
    double detect = 0.0;  // detect forest, untriggered records counted as non-fault
    double locate = 0.0;
    double phase = 0.0;
    std::map<FusionPolicy, double> fused;
    std::size_t detect_n = 0, locate_n = 0, phase_n = 0;
};

struct TrainingReport {
    std::uint64_t seed = 0;
    std::size_t n_records = 0, n_train = 0, n_holdout = 0;
    std::size_t train_untriggered = 0, train_unusable = 0;
    double gamma = 0.0;
    std::optional<double> gamma_fitness;
    std::vector<GwoTracePoint> gamma_trace;
    FeatureSelection selection;
    FeatureRanking ranking;
    std::vector<FeatureSpec> feature_specs;
    bool smote = false;
    CVReport cv;
    double fuzzy_train_fitness = 0.0;
    std::vector<GaTracePoint> ga_trace;
    StageScores holdout;
};

namespace train_detail {

struct StageData {
    Matrix x;
    std::vector<int> y;
};

inline void require_classes(const std::vector<int>& y, std::size_t n_classes, const std::vector<std::string>& names,
                            const char* stage) {
    std::vector<std::size_t> count(n_classes, 0);
    for (int v : y) ++count[static_cast<std::size_t>(v)];
    std::string missing;
    for (std::size_t c = 0; c < n_classes; ++c)
        if (count[c] == 0) missing += (missing.empty() ? "" : ", ") + names[c];
    if (!missing.empty())
        throw TrainingError(std::string(stage) + " stage: training windows lack class(es) " + missing);
}

inline void require_two_classes(const std::vector<int>& y, const char* stage) {
    for (int v : y)
        if (v != y.front()) return;
    throw TrainingError(std::string(stage) + " stage: training windows cover fewer than two classes");
}

inline StageData maybe_smote(StageData d, const PipelineConfig& cfg, std::size_t n_classes, std::uint64_t seed) {
    if (!cfg.smote) return d;
    auto r = smote_balance(d.x, d.y, n_classes, cfg.smote_k, seed);
    return {std::move(r.x), std::move(r.y)};
}

inline std::vector<std::size_t> spec_columns(const std::vector<FeatureSpec>& specs) {
    std::vector<std::size_t> cols;
    for (const auto& s : specs) cols.push_back(registry_index(s));
    return cols;
}

}  // namespace train_detail

struct TrainResult {
    TrainedBundle bundle;
    TrainingReport report;
};

/// Stage scores of a bundle on a record subset, reusing precomputed banks when the
/// detector settings match the ones they were computed with.
inline StageScores score_stages(const Corpus& corpus, const std::vector<RecordFeatures>& feats,
                                const std::vector<std::size_t>& subset, const TrainedBundle& b) {
    const auto cols = train_detail::spec_columns(b.feature_specs);
    const auto fcols = train_detail::spec_columns(b.fuzzy_specs);
    const FuzzyEvaluator fuzzy(b.fuzzy);
    StageScores s;
    std::vector<int> yd, pd, yz, pz, yp, pp;
    std::map<FusionPolicy, std::vector<int>> fused;
    std::vector<double> row, frow;
    for (auto i : subset) {
        const auto& l = corpus.records[i].label;
        const auto& f = feats[i];
        yd.push_back(l.is_faulted() ? 1 : 0);
        bool fz = false, fo = false;
        if (f.usable) {
            row.clear();
            frow.clear();
            for (auto c : cols) row.push_back(f.bank[c]);
            for (auto c : fcols) frow.push_back(f.bank[c]);
            fo = predict(b.detect_forest, row).label == 1;
            fz = fuzzy(frow).value >= 0.5;
            if (l.is_faulted() && l.location) {
                yz.push_back(static_cast<int>(zone_of(*l.location)));
                pz.push_back(predict(b.locate_forest, row).label);
                if (zone_of(*l.location) == Zone::internal && l.fault_type) {
                    yp.push_back(static_cast<int>(phase_class(*l.fault_type)));
                    pp.push_back(predict(b.phase_forest, row).label);
                }
            }
        }
        pd.push_back(fo ? 1 : 0);
        for (auto p : kFusionPolicies) fused[p].push_back(fuse(p, fz, fo) ? 1 : 0);
    }
    s.detect_n = yd.size();
    s.locate_n = yz.size();
    s.phase_n = yp.size();
    s.detect = balanced_accuracy_present(yd, pd, 2);
    for (auto p : kFusionPolicies) s.fused[p] = balanced_accuracy_present(yd, fused[p], 2);
    s.locate = yz.empty() ? 0.0 : balanced_accuracy_present(yz, pz, zone_classes().size());
    s.phase = yp.empty() ? 0.0 : balanced_accuracy_present(yp, pp, phase_classes().size());
    return s;
}

/// Trains every stage on a 4:1 stratified split and scores the holdout.
/// Stage seeds: 1 gamma, 2 split, 3 ranking, 4 smote, 5 grid, 6 detect, 7 ga, 8 locate, 9 phase.
inline TrainResult train_bundle(const Corpus& corpus, const PipelineConfig& cfg, std::uint64_t seed) {
    using namespace train_detail;
    cfg.validate();
    if (corpus.records.empty()) throw TrainingError("training corpus is empty");
    const auto& first = corpus.records.front();
    for (const auto& r : corpus.records)
        if (r.sample_rate_hz != first.sample_rate_hz || r.base_freq_hz != first.base_freq_hz)
            throw TrainingError("training corpus mixes sample rates; resample to one rate first");

    TrainResult out;
    auto& rep = out.report;
    auto& b = out.bundle;
    rep.seed = seed;
    rep.n_records = corpus.records.size();
    b.sample_rate_hz = first.sample_rate_hz;
    b.base_freq_hz = first.base_freq_hz;
    b.window_cycles = cfg.window_cycles;
    b.fusion = cfg.fusion;
    b.detector.samples_per_cycle = first.samples_per_cycle();
    b.detector.trigger_policy = cfg.trigger_policy;

    const auto held = holdout_split(corpus, cfg.holdout_folds, derive_seed(seed, {2}));
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < held.size(); ++i) (held[i] ? test_idx : train_idx).push_back(i);
    rep.n_train = train_idx.size();
    rep.n_holdout = test_idx.size();

    // (1) detector threshold
    if (cfg.gamma) {
        b.detector.gamma = *cfg.gamma;
    } else {
        Corpus train_corpus;
        for (auto i : train_idx) train_corpus.records.push_back(corpus.records[i]);
        GwoParams gwo = cfg.gwo;
        gwo.seed = derive_seed(seed, {1});
        const auto g = tune_gamma(train_corpus, gwo, {cfg.trigger_policy, cfg.gamma_objective});
        b.detector.gamma = g.gamma;
        rep.gamma_fitness = g.fitness;
        rep.gamma_trace = g.trace;
    }
    rep.gamma = b.detector.gamma;
    b.detector.validate();

    // (2) windows and the full feature bank
    const auto feats = corpus_features(corpus, b.detector, cfg.window_cycles);
    std::vector<std::size_t> usable;
    for (auto i : train_idx) {
        if (!feats[i].triggered) ++rep.train_untriggered;
        else if (!feats[i].usable) ++rep.train_unusable;
        else usable.push_back(i);
    }
    if (usable.empty()) throw TrainingError("capture stage: no training record produced a usable window");

    Matrix bank;
    std::vector<int> y_event;
    for (auto i : usable) {
        bank.push_row(feats[i].bank);
        y_event.push_back(event_class(corpus.records[i].label));
    }

    // (3) ranking and feature selection
    const auto registry = full_registry();
    rep.ranking = rank_features(bank, y_event, event_classes(), registry, {cfg.rank_trees, 2, 0, 0},
                                derive_seed(seed, {3}));
    rep.selection = cfg.selection;
    switch (cfg.selection.mode) {
        case FeatureSelection::Mode::standard: b.feature_specs = default_selected_specs(); break;
        case FeatureSelection::Mode::all: b.feature_specs = registry; break;
        case FeatureSelection::Mode::top:
            b.feature_specs.clear();
            for (std::size_t k = 0; k < cfg.selection.k; ++k) b.feature_specs.push_back(rep.ranking.ranked[k].spec);
            break;
    }
    b.fuzzy_specs = default_selected_specs();
    rep.feature_specs = b.feature_specs;
    rep.smote = cfg.smote;
    const auto x = bank.select_cols(spec_columns(b.feature_specs));

    // (4)-(5) detection forest
    StageData det{x, {}};
    for (auto i : usable) det.y.push_back(corpus.records[i].label.is_faulted() ? 1 : 0);
    require_classes(det.y, 2, detect_classes(), "detection");
    det = maybe_smote(std::move(det), cfg, 2, derive_seed(seed, {4, 0}));
    try {
        rep.cv = grid_search(det.x, det.y, detect_classes(), cfg.grid, cfg.cv_folds, derive_seed(seed, {5}));
    } catch (const StratificationError& e) {
        throw TrainingError(std::string("detection stage: ") + e.what());
    }
    b.detect_forest = fit_forest(det.x, det.y, detect_classes(), rep.cv.best_params, derive_seed(seed, {6}));

    // (6) fuzzy membership tuning on the unbalanced training windows
    {
        const auto xf = bank.select_cols(spec_columns(b.fuzzy_specs));
        std::vector<int> yf;
        for (auto i : usable) yf.push_back(corpus.records[i].label.is_faulted() ? 1 : 0);
        GaParams ga = cfg.ga;
        ga.seed = derive_seed(seed, {7});
        const auto tuned = ga_tune(xf, yf, default_system(), ga);
        b.fuzzy = tuned.system;
        rep.fuzzy_train_fitness = tuned.fitness;
        rep.ga_trace = tuned.trace;
    }

    // (7) locate forest on fault windows
    {
        std::vector<std::size_t> rows;
        StageData loc;
        for (std::size_t r = 0; r < usable.size(); ++r) {
            const auto& l = corpus.records[usable[r]].label;
            if (!l.is_faulted() || !l.location) continue;
            rows.push_back(r);
            loc.y.push_back(static_cast<int>(zone_of(*l.location)));
        }
        if (rows.empty()) throw TrainingError("fault-location stage: no fault windows in the training split");
        // An absent zone is tolerated here; missing internal faults surface at phase selection.
        require_two_classes(loc.y, "fault-location");
        loc.x = x.select_rows(rows);
        loc = maybe_smote(std::move(loc), cfg, 3, derive_seed(seed, {4, 1}));
        b.locate_forest = fit_forest(loc.x, loc.y, zone_classes(), rep.cv.best_params, derive_seed(seed, {8}));
    }

    // (8) phase forest on internal-fault windows
    {
        std::vector<std::size_t> rows;
        StageData ph;
        for (std::size_t r = 0; r < usable.size(); ++r) {
            const auto& l = corpus.records[usable[r]].label;
            if (!l.is_faulted() || !l.location || !l.fault_type || zone_of(*l.location) != Zone::internal) continue;
            rows.push_back(r);
            ph.y.push_back(static_cast<int>(phase_class(*l.fault_type)));
        }
        if (rows.empty()) throw TrainingError("phase-selection stage: no internal-fault windows in the training split");
        require_classes(ph.y, 7, phase_classes(), "phase-selection");
        ph.x = x.select_rows(rows);
        ph = maybe_smote(std::move(ph), cfg, 7, derive_seed(seed, {4, 2}));
        b.phase_forest = fit_forest(ph.x, ph.y, phase_classes(), rep.cv.best_params, derive_seed(seed, {9}));
    }

    rep.holdout = score_stages(corpus, feats, test_idx, b);
    return out;
}

inline void write_training_report(std::ostream& out, const TrainingReport& r, std::size_t ranking_rows = 20) {
    out << "# training report\n";
    out << "seed = " << r.seed << '\n';
    out << "records = " << r.n_records << '\n';
    out << "train_records = " << r.n_train << '\n';
    out << "holdout_records = " << r.n_holdout << '\n';
    out << "train_untriggered = " << r.train_untriggered << '\n';
    out << "train_unusable = " << r.train_unusable << '\n';
    out << "gamma = " << format_double(r.gamma) << '\n';
    out << "gamma_fitness = " << (r.gamma_fitness ? format_double(*r.gamma_fitness) : "fixed") << '\n';
    out << "feature_selection = " << r.selection.text() << '\n';
    out << "feature_count = " << r.feature_specs.size() << '\n';
    out << "smote = " << (r.smote ? "true" : "false") << '\n';
    out << "cv_best = n_estimators:" << r.cv.best_params.n_estimators
        << " min_samples_split:" << r.cv.best_params.min_samples_split
        << " max_depth:" << r.cv.best_params.max_depth << '\n';
    out << "cv_mean = " << format_double(r.cv.mean) << '\n';
    out << "cv_std = " << format_double(r.cv.std) << '\n';
    out << "fuzzy_train_fitness = " << format_double(r.fuzzy_train_fitness) << '\n';
    out << "holdout_detect = " << format_double(r.holdout.detect) << '\n';
    out << "holdout_locate = " << format_double(r.holdout.locate) << '\n';
    out << "holdout_phase = " << format_double(r.holdout.phase) << '\n';
    for (const auto& [p, v] : r.holdout.fused) out << "holdout_fused_" << to_string(p) << " = " << format_double(v) << '\n';
    out << "holdout_counts = detect:" << r.holdout.detect_n << " locate:" << r.holdout.locate_n
        << " phase:" << r.holdout.phase_n << '\n';
    out << "# feature ranking (top " << std::min(ranking_rows, r.ranking.ranked.size()) << ")\n";
    for (std::size_t i = 0; i < std::min(ranking_rows, r.ranking.ranked.size()); ++i)
        out << "rank " << i + 1 << ' ' << spec_name(r.ranking.ranked[i].spec) << ' '
            << format_double(r.ranking.ranked[i].importance) << '\n';
    out << "# family importance\n";
    for (const auto& f : r.ranking.families) out << "family " << family_name(f) << ' ' << format_double(f.importance) << '\n';
}

inline void write_ranking_csv(std::ostream& out, const FeatureRanking& r) {
    out << "rank,name,importance\n";
    for (std::size_t i = 0; i < r.ranked.size(); ++i)
        out << i + 1 << ',' << spec_name(r.ranked[i].spec) << ',' << format_double(r.ranked[i].importance) << '\n';
}

}  // namespace pvrelay
