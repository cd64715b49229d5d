#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "pvrelay/fuzzy/fuzzy_system.hpp"
#include "pvrelay/fuzzy/ga.hpp"
#include "support/oracles.hpp"

using namespace pvrelay;

namespace {

// Piecewise-linear membership written out by segment.
double ref_mu(double x, double a, double b, double c, double d) {
    if (x < a || x > d) return 0.0;
    if (x < b) return (x - a) / (b - a);
    if (x <= c) return 1.0;
    return (d - x) / (d - c);
}

FuzzySystem one_input(Trapezoid out_a, Trapezoid out_b, std::vector<FuzzyRule> rules) {
    FuzzySystem s;
    s.inputs.push_back({"x", 0.0, 1.0, {{"lo", {0.0, 0.0, 0.4, 0.6}}, {"hi", {0.4, 0.6, 1.0, 1.0}}}});
    s.output = {"y", 0.0, 1.0, {{"a", out_a}, {"b", out_b}}};
    s.rules = std::move(rules);
    return s;
}

// Continuous Mamdani centroid by quadrature on the same rule base.
double centroid_oracle(const FuzzySystem& s, const std::vector<double>& x) {
    std::vector<double> strength(s.output.sets.size(), 0.0);
    for (const auto& r : s.rules) {
        double w = 1.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (r.antecedent[i] == kWildcard) continue;
            const auto& t = s.inputs[i].sets[static_cast<std::size_t>(r.antecedent[i])].shape;
            const double xi = std::clamp(x[i], s.inputs[i].lo, s.inputs[i].hi);
            w = std::min(w, ref_mu(xi, t.a, t.b, t.c, t.d));
        }
        auto& st = strength[static_cast<std::size_t>(r.consequent)];
        st = std::max(st, w);
    }
    auto agg = [&](double y) {
        double m = 0.0;
        for (std::size_t k = 0; k < strength.size(); ++k) {
            const auto& t = s.output.sets[k].shape;
            m = std::max(m, std::min(strength[k], ref_mu(y, t.a, t.b, t.c, t.d)));
        }
        return m;
    };
    // Kinks make a single Simpson pass inaccurate, so integrate piece by piece.
    double num = 0.0, den = 0.0;
    const int pieces = 400;
    for (int p = 0; p < pieces; ++p) {
        const double lo = static_cast<double>(p) / pieces, hi = static_cast<double>(p + 1) / pieces;
        num += oracle::adaptive_simpson([&](double y) { return y * agg(y); }, lo, hi, 1e-12);
        den += oracle::adaptive_simpson(agg, lo, hi, 1e-12);
    }
    return den > 0.0 ? num / den : 0.5;
}

}  // namespace

TEST(TrapMu, Examples) {
    const Trapezoid t{0.0, 0.2, 0.4, 1.0};
    EXPECT_EQ(trap_mu(0.3, t), 1.0);
    EXPECT_DOUBLE_EQ(trap_mu(0.1, t), 0.5);
    EXPECT_DOUBLE_EQ(trap_mu(0.7, t), 0.5);
    EXPECT_EQ(trap_mu(-0.1, t), 0.0);
    EXPECT_EQ(trap_mu(1.1, t), 0.0);
    const Trapezoid step{0.5, 0.5, 1.0, 1.0};
    EXPECT_EQ(trap_mu(0.5, step), 1.0);
    EXPECT_EQ(trap_mu(0.4999, step), 0.0);
    EXPECT_EQ(trap_mu(0.5, Trapezoid{0.5, 0.5, 0.5, 0.5}), 1.0);
}

TEST(TrapMu, RandomShapesStayInUnitIntervalAndMatchReference) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int n = 0; n < 500; ++n) {
        std::array<double, 4> q = {u(gen), u(gen), u(gen), u(gen)};
        std::sort(q.begin(), q.end());
        const Trapezoid t{q[0], q[1], q[2], q[3]};
        for (int k = 0; k < 50; ++k) {
            const double x = u(gen);
            const double m = trap_mu(x, t);
            ASSERT_GE(m, 0.0);
            ASSERT_LE(m, 1.0);
            ASSERT_NEAR(m, ref_mu(x, q[0], q[1], q[2], q[3]), 1e-12);
            if (x >= q[1] && x <= q[2]) {
                ASSERT_EQ(m, 1.0);
            }
        }
    }
}

TEST(Inference, SymmetricOutputCentroid) {
    const auto s = one_input({0.0, 0.1, 0.2, 0.3}, {0.5, 0.7, 0.7, 0.9}, {{{1}, 1}});
    ASSERT_NO_THROW(s.validate());
    const std::vector<double> x = {1.0};
    const auto r = infer_detail(s, x);
    EXPECT_TRUE(r.fired);
    EXPECT_NEAR(r.value, 0.7, 1.0 / 200.0);
}

TEST(Inference, NothingFiresGivesMidpoint) {
    const auto s = one_input({0.0, 0.1, 0.2, 0.3}, {0.5, 0.7, 0.7, 0.9}, {{{1}, 1}});
    const std::vector<double> x = {0.1};
    const auto r = infer_detail(s, x);
    EXPECT_FALSE(r.fired);
    EXPECT_EQ(r.value, 0.5);
}

TEST(Inference, BalancedRulesGiveMidpoint) {
    const auto s = one_input({0.1, 0.2, 0.2, 0.3}, {0.7, 0.8, 0.8, 0.9}, {{{0}, 0}, {{1}, 1}});
    const std::vector<double> x = {0.5};
    EXPECT_NEAR(infer(s, x), 0.5, 1e-12);
}

TEST(Inference, ClampsOutOfRangeInputs) {
    const auto s = default_system();
    const std::vector<double> far = {1.5, 1.5, -3.0}, edge = {1.0, 1.0, -1.0};
    const auto r = infer_detail(s, far);
    EXPECT_TRUE(r.clamped);
    EXPECT_FALSE(infer_detail(s, edge).clamped);
    EXPECT_EQ(r.value, infer(s, edge));
    EXPECT_THROW(infer(s, std::vector<double>{0.0, 0.0}), std::invalid_argument);
}

TEST(DefaultSystem, Examples) {
    const auto s = default_system();
    ASSERT_NO_THROW(s.validate());
    EXPECT_LT(infer(s, std::vector<double>{0.0, 0.0, 0.0}), 0.5);
    EXPECT_GT(infer(s, std::vector<double>{0.95, 0.95, 0.95}), 0.5);
    EXPECT_GT(infer(s, std::vector<double>{-0.9, -0.9, 0.0}), 0.5);
    EXPECT_LT(infer(s, std::vector<double>{0.9, -0.9, 0.0}), 0.5);
}

TEST(DefaultSystem, MatchesContinuousCentroid) {
    const auto s = default_system();
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 200; ++n) {
        const std::vector<double> x = {u(gen), u(gen), u(gen)};
        EXPECT_NEAR(infer(s, x), centroid_oracle(s, x), 0.01) << x[0] << ' ' << x[1] << ' ' << x[2];
    }
}

TEST(DefaultSystem, OutputBoundedAndContinuous) {
    const auto s = default_system();
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int n = 0; n < 2000; ++n) {
        std::vector<double> x = {u(gen), u(gen), u(gen)};
        const double y = infer(s, x);
        ASSERT_GE(y, 0.0);
        ASSERT_LE(y, 1.0);
        for (auto& v : x) v += 1e-7;
        ASSERT_NEAR(infer(s, x), y, 1e-3);
    }
}

TEST(Chromosome, EncodeDecode) {
    const auto base = default_system();
    const auto g = encode(base);
    EXPECT_EQ(g.size(), 44u);
    EXPECT_EQ(decode(base, g), base);
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int n = 0; n < 200; ++n) {
        std::vector<double> r(g.size());
        for (auto& v : r) v = u(gen);
        const auto once = decode(base, r);
        ASSERT_NO_THROW(once.validate());
        ASSERT_EQ(decode(base, encode(once)), once);
    }
    EXPECT_THROW(decode(base, std::vector<double>(43, 0.0)), std::invalid_argument);
    EXPECT_THROW(decode(base, std::vector<double>(45, 0.0)), std::invalid_argument);
}

namespace {

// Faults trend together on every phase; the non-fault class sits at `quiet`.
void separable_set(Matrix& x, std::vector<int>& y, double quiet = 0.0) {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> jitter(0.0, 0.03);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 60; ++i) {
        const double s = i % 2 ? 0.92 : -0.92;
        rows.push_back({s + jitter(gen), s + jitter(gen), s + jitter(gen)});
        y.push_back(1);
    }
    for (int i = 0; i < 60; ++i) {
        rows.push_back({quiet + jitter(gen), quiet + jitter(gen), quiet + jitter(gen)});
        y.push_back(0);
    }
    x = Matrix::from_rows(rows);
}

}  // namespace

TEST(Ga, SeparableSet) {
    Matrix x;
    std::vector<int> y;
    separable_set(x, y);
    GaParams p;
    p.seed = 2;
    p.generations = 20;
    EXPECT_GE(ga_tune(x, y, default_system(), p).fitness, 0.95);
}

TEST(Ga, MovesSetsToSeparateShiftedClass) {
    // The default sets read 0.5 as "pos", so the untuned system confuses the classes.
    Matrix x;
    std::vector<int> y;
    separable_set(x, y, 0.5);
    const auto base = default_system();
    const double before = fuzzy_fitness(base, x, y);
    GaParams p;
    p.population = 40;
    p.generations = 60;
    p.seed = 11;
    const auto r = ga_tune(x, y, base, p);
    EXPECT_LT(before, 0.95);
    EXPECT_GE(r.fitness, 0.95);
    EXPECT_EQ(r.fitness, fuzzy_fitness(r.system, x, y));
    EXPECT_EQ(r.system.rules, base.rules);
    for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_GE(r.trace[i].best_fitness, r.trace[i - 1].best_fitness);
}

TEST(Ga, ZeroGenerationsAndDeterminism) {
    Matrix x;
    std::vector<int> y;
    separable_set(x, y);
    const auto base = default_system();
    GaParams p;
    p.generations = 0;
    const auto r0 = ga_tune(x, y, base, p);
    EXPECT_EQ(r0.system, base);
    EXPECT_EQ(r0.fitness, fuzzy_fitness(base, x, y));

    p.generations = 10;
    p.population = 20;
    p.seed = 4;
    const auto a = ga_tune(x, y, base, p), b = ga_tune(x, y, base, p);
    EXPECT_EQ(a.system, b.system);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].mean_fitness, b.trace[i].mean_fitness);
}

TEST(Ga, RejectsDegenerateInput) {
    Matrix x;
    std::vector<int> y;
    separable_set(x, y);
    const auto base = default_system();
    std::vector<int> ones(y.size(), 1);
    EXPECT_THROW(ga_tune(x, ones, base, GaParams{}), std::invalid_argument);
    GaParams bad;
    bad.population = 1;
    EXPECT_THROW(ga_tune(x, y, base, bad), ConfigError);
    std::ostringstream out;
    write_ga_trace_csv(out, {{0, 0.5, 0.25}});
    EXPECT_EQ(out.str(), "generation,best_fitness,mean_fitness\n0,0.5,0.25\n");
}

TEST(FuzzyIo, RoundTrip) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto base = default_system();
    for (int n = 0; n < 20; ++n) {
        std::vector<double> g(44);
        for (auto& v : g) v = u(gen) * 0.999;
        const auto s = decode(base, g);
        std::stringstream io;
        write_fuzzy(io, s);
        const auto back = read_fuzzy(io);
        ASSERT_EQ(back, s);
    }
    std::stringstream bad("pvrelay-fuzzy 9\n");
    EXPECT_THROW(read_fuzzy(bad), DataError);
}
