#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "pvrelay/pvrelay.hpp"

namespace fs = std::filesystem;
using namespace pvrelay;

namespace {

struct Common {
    std::uint64_t seed = 42;
    std::string config;
    std::vector<std::string> overrides;

    PipelineConfig load() const {
        PipelineConfig cfg = config.empty() ? PipelineConfig{} : load_config(config);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            apply_setting(cfg, std::string(trim(o.substr(0, eq))), std::string(trim(o.substr(eq + 1))), "--set");
        }
        cfg.validate();
        return cfg;
    }
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--seed", c.seed, "Master seed")->capture_default_str();
    cmd->add_option("--config", c.config, "Flat key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "Config override key=value (repeatable)");
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << std::fixed << v;
    return s.str();
}

DetectorConfig detector_for(const Corpus& corpus, const PipelineConfig& cfg, std::uint64_t seed, double& gamma_fitness) {
    if (corpus.records.empty()) throw DataError("corpus is empty");
    DetectorConfig det;
    det.samples_per_cycle = corpus.records.front().samples_per_cycle();
    det.trigger_policy = cfg.trigger_policy;
    gamma_fitness = -1.0;
    if (cfg.gamma) {
        det.gamma = *cfg.gamma;
    } else {
        GwoParams gwo = cfg.gwo;
        gwo.seed = derive_seed(seed, {1});
        const auto g = tune_gamma(corpus, gwo, {cfg.trigger_policy, cfg.gamma_objective});
        det.gamma = g.gamma;
        gamma_fitness = g.fitness;
    }
    return det;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pvrelay: fault detection, location and phase selection for inverter-fed lines"};
    app.require_subcommand(1);

    Common common;

    std::string out_dir;
    auto* gen = app.add_subcommand("generate", "Generate a labelled waveform corpus");
    add_common(gen, common);
    gen->add_option("--out", out_dir, "Corpus directory")->required();

    std::string corpus_dir, trace_path;
    auto* tune = app.add_subcommand("tune-gamma", "Tune the event-detector threshold with GWO");
    add_common(tune, common);
    tune->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    tune->add_option("--trace", trace_path, "Write iter,best_gamma,best_fitness CSV");

    std::string features_path, registry_path;
    bool full_bank = false;
    auto* ext = app.add_subcommand("extract", "Export the feature matrix of triggered windows");
    add_common(ext, common);
    ext->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    ext->add_option("--out", features_path, "Feature matrix CSV")->required();
    ext->add_option("--registry", registry_path, "Column documentation CSV");
    ext->add_flag("--all", full_bank, "Export all 195 registry specs instead of the selected ones");

    std::string ranking_path;
    auto* rank = app.add_subcommand("rank-features", "Rank the full feature bank by mean impurity decrease");
    add_common(rank, common);
    rank->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    rank->add_option("--out", ranking_path, "Ranking CSV")->required();

    std::string bundle_path, report_path, ga_trace_path, gamma_trace_path, surface_path;
    auto* train = app.add_subcommand("train", "Train the detection, location and phase-selection bundle");
    add_common(train, common);
    train->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    train->add_option("--out", bundle_path, "Bundle file")->required();
    train->add_option("--report", report_path, "Training report");
    train->add_option("--ga-trace", ga_trace_path, "GA trace CSV");
    train->add_option("--gamma-trace", gamma_trace_path, "GWO trace CSV");
    train->add_option("--surface", surface_path, "Grid-search surface CSV");

    std::optional<double> noise_filter;
    std::string kind_filter;
    auto* eval = app.add_subcommand("evaluate", "Evaluate a bundle on a labelled corpus");
    add_common(eval, common);
    eval->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--bundle", bundle_path, "Bundle file")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", out_dir, "Report directory")->required();
    eval->add_option("--noise", noise_filter, "Only records generated at this SNR (dB)");
    eval->add_option("--kind", kind_filter, "Only records of this kind");

    std::string record_path;
    std::optional<double> rate;
    double base_freq = 60.0;
    auto* inf = app.add_subcommand("infer", "Run one waveform file through the bundle");
    add_common(inf, common);
    inf->add_option("--bundle", bundle_path, "Bundle file")->required()->check(CLI::ExistingFile);
    inf->add_option("--record", record_path, "Waveform CSV (t,ia,ib,ic)")->required()->check(CLI::ExistingFile);
    inf->add_option("--rate", rate, "Sample rate in Hz (default: from the time column)");
    inf->add_option("--base-freq", base_freq, "System frequency in Hz")->capture_default_str();

    std::string log_path, latency_path;
    auto* rep = app.add_subcommand("replay", "Stream a corpus through inference");
    add_common(rep, common);
    rep->add_option("--corpus", corpus_dir, "Corpus directory")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--bundle", bundle_path, "Bundle file")->required()->check(CLI::ExistingFile);
    rep->add_option("--log", log_path, "Verdict log CSV")->required();
    rep->add_option("--latency", latency_path, "Per-stage latency CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const auto t0 = std::chrono::steady_clock::now();
    try {
        const auto cfg = common.load();
        if (*gen) {
            const auto corpus = build_corpus(cfg.sweep, cfg.synth, common.seed);
            write_corpus(corpus, out_dir);
            std::cout << "generate status=ok records=" << corpus.records.size()
                      << " faults=" << cfg.sweep.fault_count() << " switching=" << cfg.sweep.switching_count()
                      << " hif=" << cfg.sweep.hif_count() << " steady=" << cfg.sweep.steady_records
                      << " seed=" << common.seed << " out=" << out_dir << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*tune) {
            const auto corpus = read_corpus(corpus_dir);
            if (corpus.records.empty()) throw DataError("corpus is empty");
            GwoParams gwo = cfg.gwo;
            gwo.seed = derive_seed(common.seed, {1});
            const auto g = tune_gamma(corpus, gwo, {cfg.trigger_policy, cfg.gamma_objective});
            if (!trace_path.empty()) {
                auto out = open_out(trace_path);
                write_gamma_trace_csv(out, g.trace);
            }
            std::cout << "tune-gamma status=ok gamma=" << format_double(g.gamma)
                      << " fitness=" << format_double(g.fitness) << " records=" << corpus.records.size()
                      << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*ext) {
            const auto corpus = read_corpus(corpus_dir);
            double fit = 0.0;
            const auto det = detector_for(corpus, cfg, common.seed, fit);
            const auto specs = full_bank ? full_registry() : default_selected_specs();
            std::vector<FeatureVector> rows(corpus.records.size());
            std::vector<char> ok(corpus.records.size(), 0);
            parallel_for(corpus.records.size(), [&](std::size_t i) {
                const auto& r = corpus.records[i];
                const auto trig = detect(r, det);
                if (!trig.triggered) return;
                try {
                    rows[i] = extract_selected(capture_window(r, *trig.trigger_index, cfg.window_cycles), specs);
                    ok[i] = rows[i].complete();
                } catch (const CaptureError&) {
                }
            });
            std::vector<FeatureVector> kept;
            for (std::size_t i = 0; i < rows.size(); ++i)
                if (ok[i]) kept.push_back(std::move(rows[i]));
            auto out = open_out(features_path);
            write_feature_matrix(out, kept, specs.size());
            if (!registry_path.empty()) {
                auto doc = open_out(registry_path);
                write_registry_doc(doc, specs);
            }
            std::cout << "extract status=ok rows=" << kept.size() << " skipped=" << rows.size() - kept.size()
                      << " columns=" << specs.size() << " gamma=" << format_double(det.gamma)
                      << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*rank) {
            const auto corpus = read_corpus(corpus_dir);
            double fit = 0.0;
            const auto det = detector_for(corpus, cfg, common.seed, fit);
            const auto feats = corpus_features(corpus, det, cfg.window_cycles);
            Matrix bank;
            std::vector<int> y;
            for (std::size_t i = 0; i < feats.size(); ++i)
                if (feats[i].usable) {
                    bank.push_row(feats[i].bank);
                    y.push_back(event_class(corpus.records[i].label));
                }
            if (bank.rows < 2) throw TrainingError("rank-features: fewer than 2 usable windows");
            const auto r = rank_features(bank, y, event_classes(), full_registry(), {cfg.rank_trees, 2, 0, 0},
                                         derive_seed(common.seed, {3}));
            auto out = open_out(ranking_path);
            write_ranking_csv(out, r);
            std::cout << "rank-features status=ok rows=" << bank.rows << " top=" << spec_name(r.ranked[0].spec)
                      << " top_family=" << family_name(r.families[0]) << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*train) {
            const auto corpus = read_corpus(corpus_dir);
            const auto res = train_bundle(corpus, cfg, common.seed);
            save_bundle(res.bundle, bundle_path);
            if (!report_path.empty()) {
                auto out = open_out(report_path);
                write_training_report(out, res.report);
            }
            if (!ga_trace_path.empty()) {
                auto out = open_out(ga_trace_path);
                write_ga_trace_csv(out, res.report.ga_trace);
            }
            if (!gamma_trace_path.empty()) {
                auto out = open_out(gamma_trace_path);
                write_gamma_trace_csv(out, res.report.gamma_trace);
            }
            if (!surface_path.empty()) {
                auto out = open_out(surface_path);
                write_surface_csv(out, res.report.cv);
            }
            const auto& h = res.report.holdout;
            std::cout << "train status=ok gamma=" << format_double(res.report.gamma)
                      << " features=" << res.bundle.feature_specs.size() << " holdout_detect=" << fmt(h.detect)
                      << " holdout_fused=" << fmt(h.fused.at(res.bundle.fusion)) << " holdout_locate=" << fmt(h.locate)
                      << " holdout_phase=" << fmt(h.phase) << " fusion=" << to_string(res.bundle.fusion)
                      << " bundle=" << bundle_path << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*eval) {
            const auto corpus = read_corpus(corpus_dir);
            const auto bundle = load_bundle(bundle_path);
            EvalFilter filter;
            filter.snr_db = noise_filter;
            if (!kind_filter.empty()) {
                filter.kind = parse_event_kind(kind_filter);
                if (!filter.kind) throw ConfigError("unknown --kind '" + kind_filter + "'");
            }
            const auto r = evaluate(corpus, bundle, filter);
            const fs::path dir(out_dir);
            fs::create_directories(dir);
            {
                auto out = open_out(dir / "report.txt");
                write_evaluation_report(out, r);
            }
            {
                auto out = open_out(dir / "confusion_detect.csv");
                write_confusion_csv(out, r.detect_cm);
            }
            {
                auto out = open_out(dir / "confusion_locate.csv");
                write_confusion_csv(out, r.locate_cm);
            }
            {
                auto out = open_out(dir / "confusion_phase.csv");
                write_confusion_csv(out, r.phase_cm);
            }
            {
                auto out = open_out(dir / "scenarios.csv");
                write_scenarios_csv(out, r);
            }
            {
                auto out = open_out(dir / "verdicts.csv");
                write_verdict_log(out, corpus, r.record_index, r.verdicts, false);
            }
            {
                auto out = open_out(dir / "latency.csv");
                write_latency_csv(out, r.latency);
            }
            std::cout << "evaluate status=ok records=" << r.records << " detect=" << fmt(r.detect)
                      << " locate=" << fmt(r.locate) << " phase=" << fmt(r.phase)
                      << " trip_accuracy=" << fmt(r.trip_accuracy) << " fusion=" << to_string(r.fusion)
                      << " out=" << out_dir << " seconds=" << fmt(seconds_since(t0)) << '\n';
        } else if (*inf) {
            const auto bundle = load_bundle(bundle_path);
            const auto rec = read_record_file(record_path, base_freq, rate);
            const auto v = run_inference(rec, bundle);
            write_verdict(std::cout, v);
            std::cout << "infer status=ok triggered=" << (v.triggered ? 1 : 0) << " is_fault=" << (v.is_fault ? 1 : 0)
                      << " trip=" << (v.trip ? 1 : 0)
                      << " zone=" << (v.zone ? std::string(to_string(*v.zone)) : "none")
                      << " phases=" << (v.phases ? std::string(to_string(*v.phases)) : "none")
                      << " total_us=" << fmt(v.timings.total_us) << '\n';
        } else if (*rep) {
            const auto corpus = read_corpus(corpus_dir);
            const auto bundle = load_bundle(bundle_path);
            const auto r = replay(corpus, bundle);
            {
                auto out = open_out(log_path);
                write_verdict_log(out, corpus, r.record_index, r.verdicts, true);
            }
            if (!latency_path.empty()) {
                auto out = open_out(latency_path);
                write_latency_csv(out, r.latency);
            }
            std::size_t trips = 0;
            for (const auto& v : r.verdicts) trips += v.trip;
            std::cout << "replay status=ok records=" << r.verdicts.size() << " trips=" << trips;
            for (const auto& l : r.latency) std::cout << ' ' << l.stage << "_p99_us=" << fmt(l.p99);
            std::cout << " seconds=" << fmt(seconds_since(t0)) << '\n';
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::config);
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::training);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return 0;
}
