#include <gtest/gtest.h>

#include <sstream>

#include "pvrelay/pvrelay.hpp"
#include "support/oracles.hpp"

using namespace pvrelay;

namespace {

std::string verdict_text(const Verdict& v) {
    std::ostringstream s;
    write_verdict(s, v);
    return s.str();
}

const WaveformRecord& find_record(const Corpus& c, FaultType t, int loc, double r, double angle, Priority p) {
    for (const auto& rec : c.records) {
        const auto& l = rec.label;
        if (l.kind == EventKind::fault && l.fault_type == t && l.location == Location{loc} && l.resistance_ohm == r &&
            l.inception_angle_deg == angle && l.priority == p)
            return rec;
    }
    throw std::runtime_error("record not in corpus");
}

// One desk-scale training run shared by the end-to-end tests.
class DeskBundle : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        cfg_ = new PipelineConfig(load_config(PVRELAY_SOURCE_DIR "/configs/desk.conf"));
        corpus_ = new Corpus(build_corpus(cfg_->sweep, cfg_->synth, 42));
        result_ = new TrainResult(train_bundle(*corpus_, *cfg_, 42));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete corpus_;
        delete cfg_;
    }

    static PipelineConfig* cfg_;
    static Corpus* corpus_;
    static TrainResult* result_;
};

PipelineConfig* DeskBundle::cfg_ = nullptr;
Corpus* DeskBundle::corpus_ = nullptr;
TrainResult* DeskBundle::result_ = nullptr;

}  // namespace

TEST(Config, ParsesKeysAndComments) {
    std::istringstream in("# comment\nsweep = desk\ngamma = 0.05\nfusion = or  # trailing\nfault_locations = 4, 5\n"
                          "feature_selection = top:12\ngrid_max_depth = 0, 6\n");
    const auto c = parse_config(in);
    EXPECT_EQ(c.gamma, 0.05);
    EXPECT_EQ(c.fusion, FusionPolicy::either);
    EXPECT_EQ(c.sweep.fault_locations, (std::vector<int>{4, 5}));
    EXPECT_EQ(c.selection.mode, FeatureSelection::Mode::top);
    EXPECT_EQ(c.selection.k, 12u);
    std::istringstream aut("gamma = auto\n");
    EXPECT_FALSE(parse_config(aut).gamma.has_value());
}

TEST(Config, ErrorsNameTheLine) {
    auto message = [](const std::string& text) {
        std::istringstream in(text);
        try {
            (void)parse_config(in, "t.conf");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("accepted");
    };
    EXPECT_NE(message("sweep = desk\n\nbogus = 1\n").find("t.conf:3: unknown key 'bogus'"), std::string::npos);
    EXPECT_NE(message("gamma 0.1\n").find("t.conf:1"), std::string::npos);
    EXPECT_NE(message("fusion = maybe\n").find("t.conf:1"), std::string::npos);
    EXPECT_NE(message("feature_selection = top:0\n"), "accepted");
    EXPECT_NE(message("holdout_folds = 1\n"), "accepted");
    EXPECT_EQ(message("sweep = full\n"), "accepted");
    EXPECT_FALSE(config_keys().empty());
}

TEST(Fusion, TruthTable) {
    for (bool fz : {false, true})
        for (bool fo : {false, true}) {
            EXPECT_EQ(fuse(FusionPolicy::fuzzy_only, fz, fo), fz);
            EXPECT_EQ(fuse(FusionPolicy::forest_only, fz, fo), fo);
            EXPECT_EQ(fuse(FusionPolicy::both, fz, fo), fz && fo);
            EXPECT_EQ(fuse(FusionPolicy::either, fz, fo), fz || fo);
        }
    for (auto p : kFusionPolicies) EXPECT_EQ(parse_fusion(to_string(p)), p);
    EXPECT_EQ(to_string(FusionPolicy::both), "and");
}

TEST(Resample, HalfRate) {
    const auto rec = synth_steady(SynthParams{}, 4);
    const auto half = resample(rec, 3840.0);
    EXPECT_EQ(half.samples_per_cycle(), 64u);
    EXPECT_EQ(half.size(), rec.size() / 2);
    EXPECT_EQ(half.label, rec.label);
    for (int k = 0; k < 3; ++k) {
        const double a = oracle::rms(rec.phases[k], 0, rec.size());
        const double b = oracle::rms(half.phases[k], 0, half.size());
        EXPECT_NEAR(b / a, 1.0, 0.01);
    }
    EXPECT_EQ(resample(rec, 7680.0).phases, rec.phases);
    EXPECT_THROW(resample(rec, 15360.0), ConfigError);
    EXPECT_THROW(resample(rec, 5000.0), ConfigError);
}

TEST(Training, NoInternalFaultsStopsAtPhaseSelection) {
    PipelineConfig cfg;
    cfg.sweep.fault_locations = {2, 7};
    cfg.sweep.fault_resistances = {0.01};
    cfg.sweep.fault_angles = {0.0, 90.0};
    cfg.sweep.switching_angles = {0.0, 150.0};
    cfg.sweep.switching_ratings = {0, 3};
    cfg.gamma = 0.05;
    cfg.gwo.max_iter = 5;
    cfg.grid = {{10}, {2}, {4}, 0};
    cfg.ga.generations = 2;
    cfg.ga.population = 6;
    cfg.rank_trees = 5;
    const auto corpus = build_corpus(cfg.sweep, cfg.synth, 1);
    try {
        (void)train_bundle(corpus, cfg, 1);
        FAIL() << "trained without internal faults";
    } catch (const TrainingError& e) {
        EXPECT_NE(std::string(e.what()).find("phase-selection"), std::string::npos) << e.what();
    }
    Corpus empty;
    EXPECT_THROW(train_bundle(empty, cfg, 1), TrainingError);
}

TEST(Evaluation, NoiseFilterKeepsMatchingRecords) {
    auto a = synth_steady(SynthParams{}, 1);
    const auto noisy = add_noise(a, 20.0, 3);
    const auto other = add_noise(a, 30.0, 3);
    const EvalFilter f{20.0, std::nullopt};
    EXPECT_TRUE(f.accepts(noisy));
    EXPECT_FALSE(f.accepts(other));
    EXPECT_FALSE(f.accepts(a));
    const EvalFilter k{std::nullopt, EventKind::steady};
    EXPECT_TRUE(k.accepts(a));
}

TEST_F(DeskBundle, ReportCarriesStagesAndRanking) {
    const auto& r = result_->report;
    EXPECT_EQ(r.n_records, 1440u);
    EXPECT_EQ(r.n_holdout, 288u);
    EXPECT_EQ(r.n_train + r.n_holdout, r.n_records);
    EXPECT_EQ(r.ranking.ranked.size(), 195u);
    EXPECT_GT(r.holdout.detect_n, 0u);
    EXPECT_GT(r.holdout.locate_n, 0u);
    EXPECT_GT(r.holdout.phase_n, 0u);
    EXPECT_EQ(r.holdout.fused.size(), 4u);
    double total = 0.0;
    for (const auto& e : r.ranking.ranked) total += e.importance;
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t i = 1; i < r.ga_trace.size(); ++i) EXPECT_GE(r.ga_trace[i].best_fitness, r.ga_trace[i - 1].best_fitness);
}

TEST_F(DeskBundle, StageGatingAndFusionAlgebra) {
    const auto& b = result_->bundle;
    for (const auto& rec : corpus_->records) {
        std::map<FusionPolicy, Verdict> v;
        for (auto p : kFusionPolicies) v[p] = run_inference(rec, b, p);
        for (const auto& [p, x] : v) {
            ASSERT_TRUE(!x.zone || x.is_fault);
            ASSERT_TRUE(!x.phases || x.trip);
            ASSERT_TRUE(!x.trip || x.is_fault);
            ASSERT_EQ(x.trip, x.zone.has_value() && *x.zone == Zone::internal);
            ASSERT_EQ(x.zone.has_value(), x.is_fault);
        }
        const bool fz = v[FusionPolicy::fuzzy_only].is_fault, fo = v[FusionPolicy::forest_only].is_fault;
        ASSERT_TRUE(!v[FusionPolicy::both].is_fault || (fz && fo));
        ASSERT_TRUE(!(fz || fo) || v[FusionPolicy::either].is_fault);
    }
}

TEST_F(DeskBundle, BundleRoundTripKeepsVerdicts) {
    const auto& b = result_->bundle;
    const auto text = bundle_to_string(b);
    std::istringstream in(text);
    const auto back = read_bundle(in);
    EXPECT_EQ(bundle_to_string(back), text);
    for (const auto& rec : corpus_->records) ASSERT_EQ(verdict_text(run_inference(rec, back)), verdict_text(run_inference(rec, b)));
}

TEST_F(DeskBundle, TrainingCorpusScoresAtLeastHoldout) {
    const auto rep = evaluate(*corpus_, result_->bundle);
    EXPECT_GE(rep.detect, result_->report.holdout.fused.at(result_->bundle.fusion));
    EXPECT_EQ(rep.records, corpus_->records.size());
}

TEST_F(DeskBundle, ConfusionRowsSumToClassCounts) {
    const auto rep = evaluate(*corpus_, result_->bundle);
    std::size_t faults = 0;
    for (const auto& r : corpus_->records) faults += r.label.is_faulted();
    std::ostringstream csv;
    write_confusion_csv(csv, rep.detect_cm);
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "true\\pred,non-fault,fault");
    std::vector<std::size_t> sums;
    while (std::getline(in, line)) {
        const auto cells = split(line, ',');
        std::size_t s = 0;
        for (std::size_t i = 1; i < cells.size(); ++i) s += *parse_uint(cells[i]);
        sums.push_back(s);
    }
    EXPECT_EQ(sums, (std::vector<std::size_t>{corpus_->records.size() - faults, faults}));
}

TEST_F(DeskBundle, SteadyRecordStopsAtDetection) {
    const auto v = run_inference(synth_steady(cfg_->synth, 77), result_->bundle);
    EXPECT_FALSE(v.triggered);
    EXPECT_FALSE(v.trigger_index.has_value());
    EXPECT_FALSE(v.is_fault);
    EXPECT_FALSE(v.zone.has_value());
    EXPECT_FALSE(v.trip);
    EXPECT_FALSE(v.phases.has_value());
    EXPECT_EQ(v.timings.capture_us, 0.0);
}

TEST_F(DeskBundle, RefusesOtherSampleRates) {
    const auto rec = resample(corpus_->records.front(), 3840.0);
    EXPECT_THROW(run_inference(rec, result_->bundle), DataError);
}

TEST_F(DeskBundle, InternalBoltedThreePhaseFaultTrips) {
    const auto& rec = find_record(*corpus_, FaultType::abcg, 4, 0.01, 0.0, Priority::P);
    const auto v = run_inference(rec, result_->bundle);
    EXPECT_TRUE(v.trip) << verdict_text(v);
    ASSERT_TRUE(v.phases.has_value()) << verdict_text(v);
    EXPECT_EQ(*v.phases, PhaseClass::abc);
}

TEST_F(DeskBundle, ForwardExternalFaultDoesNotTrip) {
    const auto& rec = find_record(*corpus_, FaultType::abcg, 7, 0.01, 0.0, Priority::P);
    const auto v = run_inference(rec, result_->bundle);
    EXPECT_TRUE(v.is_fault) << verdict_text(v);
    EXPECT_EQ(v.zone, Zone::forward_external) << verdict_text(v);
    EXPECT_FALSE(v.trip);
}

TEST_F(DeskBundle, ForestPathLocatesBothExamples) {
    const auto& internal = find_record(*corpus_, FaultType::abcg, 4, 0.01, 0.0, Priority::P);
    const auto vi = run_inference(internal, result_->bundle, FusionPolicy::forest_only);
    EXPECT_TRUE(vi.trip) << verdict_text(vi);
    EXPECT_EQ(vi.phases, PhaseClass::abc) << verdict_text(vi);
    const auto& external = find_record(*corpus_, FaultType::abcg, 7, 0.01, 0.0, Priority::P);
    const auto ve = run_inference(external, result_->bundle, FusionPolicy::forest_only);
    EXPECT_EQ(ve.zone, Zone::forward_external) << verdict_text(ve);
    EXPECT_FALSE(ve.trip);
}
