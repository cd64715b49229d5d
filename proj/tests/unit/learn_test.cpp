#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "pvrelay/learn/cv.hpp"
#include "pvrelay/learn/forest.hpp"
#include "pvrelay/learn/metrics.hpp"
#include "pvrelay/learn/smote.hpp"
#include "support/oracles.hpp"

using namespace pvrelay;

namespace {

const std::vector<std::string> kAB = {"A", "B"};

struct Data {
    Matrix x;
    std::vector<int> y;
};

// Feature 0 decides the label, feature 1 is noise.
Data informative(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Data d;
    for (std::size_t i = 0; i < n; ++i) {
        const double f0 = u(gen), f1 = u(gen);
        const std::vector<double> row = {f0, f1};
        d.x.push_row(row);
        d.y.push_back(f0 > 0.1 ? 1 : 0);
    }
    return d;
}

TreeModel stump(int feature, double thr, int left_class, int right_class, std::size_t n_classes = 2) {
    TreeModel t;
    t.n_classes = n_classes;
    t.n_features = 1;
    t.raw_importance = {1.0};
    TreeNode root;
    root.feature = feature;
    root.threshold = thr;
    root.left = 1;
    root.right = 2;
    root.counts.assign(n_classes, 1.0);
    TreeNode l, r;
    l.counts.assign(n_classes, 0.0);
    r.counts.assign(n_classes, 0.0);
    l.counts[static_cast<std::size_t>(left_class)] = 1.0;
    r.counts[static_cast<std::size_t>(right_class)] = 1.0;
    t.nodes = {root, l, r};
    return t;
}

}  // namespace

TEST(Gini, Values) {
    EXPECT_DOUBLE_EQ(gini(std::vector<double>{10, 0}), 0.0);
    EXPECT_DOUBLE_EQ(gini(std::vector<double>{5, 5}), 0.5);
    EXPECT_NEAR(gini(std::vector<double>{7, 3}), 0.42, 1e-15);
    EXPECT_THROW(gini(std::vector<double>{0, 0}), std::invalid_argument);
}

TEST(Gini, BoundedAndMaximalAtUniform) {
    std::mt19937_64 gen(1);
    std::uniform_int_distribution<int> cnt(0, 20);
    for (std::size_t c = 2; c <= 7; ++c) {
        const double cap = 1.0 - 1.0 / static_cast<double>(c);
        EXPECT_NEAR(gini(std::vector<double>(c, 4.0)), cap, 1e-15);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<double> v(c);
            for (auto& x : v) x = cnt(gen);
            if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0; })) v[0] = 1;
            const double g = gini(v);
            EXPECT_GE(g, 0.0);
            EXPECT_LE(g, cap + 1e-15);
        }
    }
}

TEST(Tree, SeparableOneDimension) {
    Matrix x;
    std::vector<int> y;
    for (int i = -10; i <= 10; ++i) {
        if (i == 0) continue;
        const std::vector<double> row = {static_cast<double>(i)};
        x.push_row(row);
        y.push_back(i > 0 ? 1 : 0);
    }
    const auto t = fit_tree(x, y, 2, {}, 3);
    EXPECT_EQ(t.depth(), 1u);
    for (std::size_t i = 0; i < x.rows; ++i) EXPECT_EQ(t.predict(x.row(i)), y[i]);
    EXPECT_DOUBLE_EQ(t.nodes[0].threshold, 0.0);
}

TEST(Tree, MinSamplesSplitAboveSizeGivesMajorityLeaf) {
    const auto d = informative(30, 4);
    const auto t = fit_tree(d.x, d.y, 2, {31, 0, 0}, 1);
    ASSERT_EQ(t.nodes.size(), 1u);
    const int ones = static_cast<int>(std::count(d.y.begin(), d.y.end(), 1));
    const int majority = ones > 30 - ones ? 1 : 0;
    EXPECT_EQ(t.predict(d.x.row(0)), majority);
}

TEST(Tree, RootSplitMatchesExhaustiveEnumeration) {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + gen() % 19, d = 1 + gen() % 3;
        const int classes = 2 + static_cast<int>(gen() % 2);
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& v : rows[i]) v = static_cast<double>(gen() % 7) * 0.5;  // ties on purpose
            y[i] = static_cast<int>(gen() % static_cast<unsigned>(classes));
        }
        const auto x = Matrix::from_rows(rows);
        const auto t = fit_tree(x, y, static_cast<std::size_t>(classes), {2, 0, d}, gen());
        const auto want = oracle::exhaustive_root_split(rows, y, classes);
        const bool pure = std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; });
        if (pure || !want.found) {
            EXPECT_TRUE(t.nodes[0].is_leaf());
            continue;
        }
        ASSERT_FALSE(t.nodes[0].is_leaf()) << "trial " << trial;
        EXPECT_EQ(t.nodes[0].impurity_decrease, want.gain) << "trial " << trial;
    }
}

TEST(Tree, StructuralInvariants) {
    const auto d = informative(200, 8);
    for (std::size_t depth : {1u, 3u, 6u}) {
        const auto t = fit_tree(d.x, d.y, 2, {2, depth, 2}, 5);
        EXPECT_LE(t.depth(), depth);
        double total_decrease = 0.0;
        for (const auto& n : t.nodes) {
            double s = 0.0;
            for (double c : n.counts) s += c;
            if (!n.is_leaf()) {
                ASSERT_GE(n.left, 0);
                ASSERT_GE(n.right, 0);
                EXPECT_GE(n.impurity_decrease, 0.0);
                double l = 0.0, r = 0.0;
                for (double c : t.nodes[static_cast<std::size_t>(n.left)].counts) l += c;
                for (double c : t.nodes[static_cast<std::size_t>(n.right)].counts) r += c;
                EXPECT_EQ(l + r, s);
                total_decrease += s / 200.0 * n.impurity_decrease;
            }
        }
        double attributed = 0.0;
        for (double v : t.raw_importance) attributed += v;
        EXPECT_NEAR(attributed, total_decrease, 1e-12);
    }
}

TEST(Tree, MonotoneTransformKeepsPartition) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto d = informative(60, gen());
        Matrix warped = d.x;
        for (std::size_t i = 0; i < warped.rows; ++i) warped(i, 0) = std::exp(3.0 * warped(i, 0)) - 7.0;
        const auto seed = gen();
        const auto a = fit_tree(d.x, d.y, 2, {2, 0, 1}, seed);
        const auto b = fit_tree(warped, d.y, 2, {2, 0, 1}, seed);
        ASSERT_EQ(a.nodes.size(), b.nodes.size());
        for (std::size_t k = 0; k < a.nodes.size(); ++k) {
            EXPECT_EQ(a.nodes[k].feature, b.nodes[k].feature);
            EXPECT_EQ(a.nodes[k].counts, b.nodes[k].counts);
        }
        for (std::size_t i = 0; i < d.x.rows; ++i)
            EXPECT_EQ(&a.leaf_for(d.x.row(i)) - a.nodes.data(), &b.leaf_for(warped.row(i)) - b.nodes.data());
    }
}

TEST(Forest, InformativeFeatureDominates) {
    const auto d = informative(300, 2);
    const auto f = fit_forest(d.x, d.y, kAB, {50, 2, 0, 0}, 17);
    EXPECT_GT(f.importances[0], 0.9);
    EXPECT_NEAR(f.importances[0] + f.importances[1], 1.0, 1e-9);
    EXPECT_EQ(f.trees.size(), 50u);
}

TEST(Forest, VotesEqualDirectTreeEvaluation) {
    const auto d = informative(150, 6);
    const auto f = fit_forest(d.x, d.y, kAB, {15, 2, 4, 1}, 3);
    const auto probe = informative(100, 60);
    for (std::size_t i = 0; i < probe.x.rows; ++i) {
        std::vector<int> votes(2, 0);
        for (const auto& t : f.trees) {
            const TreeNode* n = &t.nodes[0];
            while (n->feature >= 0)
                n = &t.nodes[static_cast<std::size_t>(probe.x(i, static_cast<std::size_t>(n->feature)) <= n->threshold
                                                          ? n->left
                                                          : n->right)];
            const int leaf_class = n->counts[1] > n->counts[0] ? 1 : 0;
            ++votes[static_cast<std::size_t>(leaf_class)];
        }
        const auto p = predict(f, probe.x.row(i));
        EXPECT_EQ(p.label, votes[1] > votes[0] ? 1 : 0);
        EXPECT_DOUBLE_EQ(p.vote_fractions[1], votes[1] / 15.0);
    }
}

TEST(Forest, SingleTreeEqualsItsTree) {
    const auto d = informative(80, 12);
    const auto f = fit_forest(d.x, d.y, kAB, {1, 2, 0, 0}, 8);
    const auto probe = informative(50, 13);
    for (std::size_t i = 0; i < probe.x.rows; ++i)
        EXPECT_EQ(predict(f, probe.x.row(i)).label, f.trees[0].predict(probe.x.row(i)));
}

TEST(Forest, DeterministicBytes) {
    const auto d = informative(120, 3);
    const auto a = fit_forest(d.x, d.y, kAB, {10, 2, 0, 0}, 42);
    const auto b = fit_forest(d.x, d.y, kAB, {10, 2, 0, 0}, 42, 1);
    EXPECT_EQ(forest_to_string(a), forest_to_string(b));
    std::istringstream in(forest_to_string(a));
    const auto back = read_forest(in);
    EXPECT_EQ(forest_to_string(back), forest_to_string(a));
}

TEST(Forest, SingleClassIsDegenerate) {
    Matrix x;
    for (int i = 0; i < 5; ++i) {
        const std::vector<double> row = {static_cast<double>(i)};
        x.push_row(row);
    }
    const std::vector<int> y(5, 1);
    const auto f = fit_forest(x, y, kAB, {5, 2, 0, 0}, 1);
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.importances, std::vector<double>{0.0});
    EXPECT_EQ(predict(f, x.row(2)).label, 1);
}

TEST(Predict, VoteRules) {
    ForestModel f;
    f.classes = kAB;
    f.trees = {stump(0, 0.0, 0, 1), stump(0, 0.0, 0, 1), stump(0, 10.0, 0, 1)};
    const std::vector<double> x = {5.0};
    auto p = predict(f, x);
    EXPECT_EQ(p.label, 1);
    EXPECT_DOUBLE_EQ(p.vote_fractions[1], 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(p.vote_fractions[0], 1.0 / 3.0);

    f.trees = {stump(0, 0.0, 1, 0), stump(0, 0.0, 0, 1)};
    p = predict(f, x);
    EXPECT_EQ(p.label, 0);  // tie goes to the first class
    EXPECT_DOUBLE_EQ(p.vote_fractions[0], 0.5);

    f.trees = {stump(0, 0.0, 0, 1), stump(0, 0.0, 0, 1)};
    EXPECT_DOUBLE_EQ(predict(f, x).vote_fractions[1], 1.0);

    const std::vector<double> wide = {1.0, 2.0};
    EXPECT_THROW(predict(f, wide), std::invalid_argument);
}

TEST(Predict, InvariantToTreeOrder) {
    const auto d = informative(100, 31);
    auto f = fit_forest(d.x, d.y, kAB, {9, 2, 3, 1}, 4);
    const auto probe = informative(40, 32);
    std::vector<ForestPrediction> before;
    for (std::size_t i = 0; i < probe.x.rows; ++i) before.push_back(predict(f, probe.x.row(i)));
    std::reverse(f.trees.begin(), f.trees.end());
    std::rotate(f.trees.begin(), f.trees.begin() + 4, f.trees.end());
    for (std::size_t i = 0; i < probe.x.rows; ++i) {
        const auto p = predict(f, probe.x.row(i));
        EXPECT_EQ(p.label, before[i].label);
        EXPECT_EQ(p.vote_fractions, before[i].vote_fractions);
    }
}

TEST(RankFeatures, ThresholdedSpecRanksFirst) {
    const auto specs = full_registry();
    const auto target = registry_index(default_selected_specs()[0]);
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> row(specs.size());
        for (auto& v : row) v = u(gen);
        y.push_back(row[target] > 0.2 ? 1 : 0);
        x.push_row(row);
    }
    const auto r = rank_features(x, y, kAB, specs, {100, 2, 0, 0}, 5);
    EXPECT_EQ(r.ranked[0].spec, specs[target]);
    double total = 0.0;
    for (const auto& f : r.families) total += f.importance;
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_EQ(r.families.size(), 65u);
}

TEST(RankFeatures, NoiseStaysNearUniformShare) {
    const auto specs = full_registry();
    std::mt19937_64 gen(78);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
        std::vector<double> row(specs.size());
        for (auto& v : row) v = u(gen);
        x.push_row(row);
        y.push_back(static_cast<int>(gen() % 2));
    }
    const auto r = rank_features(x, y, kAB, specs, {100, 2, 0, 0}, 5);
    EXPECT_LE(r.ranked[0].importance, 3.0 / 195.0);
}

TEST(Smote, TwoPointsStayOnSegment) {
    const auto x = Matrix::from_rows({{0.0, 0.0}, {2.0, 4.0}, {9.0, 9.0}, {8.0, 9.5}});
    const std::vector<int> y = {1, 1, 0, 0};
    const auto out = smote(x, y, 1, 5, 50, 3);
    ASSERT_EQ(out.x.rows, 54u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(std::vector<double>(out.x.row(i).begin(), out.x.row(i).end()),
                                                  std::vector<double>(x.row(i).begin(), x.row(i).end()));
    for (std::size_t i = 4; i < out.x.rows; ++i) {
        EXPECT_EQ(out.y[i], 1);
        const double u = out.x(i, 0) / 2.0;
        EXPECT_GE(u, 0.0);
        EXPECT_LE(u, 1.0);
        EXPECT_NEAR(out.x(i, 1), 4.0 * u, 1e-12);
    }
}

TEST(Smote, IdentityAndErrors) {
    const auto x = Matrix::from_rows({{0.0}, {1.0}, {2.0}});
    const std::vector<int> y = {0, 1, 1};
    const auto same = smote(x, y, 1, 3, 0, 1);
    EXPECT_EQ(same.x.data, x.data);
    EXPECT_EQ(same.y, y);
    EXPECT_THROW(smote(x, y, 0, 3, 5, 1), std::invalid_argument);
}

TEST(Smote, BalancesCounts) {
    std::mt19937_64 gen(4);
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 2880 + 2400; ++i) {
        const std::vector<double> row = {n01(gen), n01(gen), n01(gen)};
        x.push_row(row);
        y.push_back(i < 2880 ? 0 : 1);
    }
    const auto out = smote_balance(x, y, 2, 5, 9);
    EXPECT_EQ(std::count(out.y.begin(), out.y.end(), 0), 2880);
    EXPECT_EQ(std::count(out.y.begin(), out.y.end(), 1), 2880);
}

TEST(Smote, SyntheticRowsAreConvexCombinationsOfMinorityPairs) {
    std::mt19937_64 gen(14);
    std::normal_distribution<double> n01(0.0, 1.0);
    Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 40; ++i) {
        const std::vector<double> row = {n01(gen), n01(gen), n01(gen)};
        x.push_row(row);
        y.push_back(i < 12 ? 1 : 0);
    }
    const auto out = smote(x, y, 1, 3, 60, 2);
    for (std::size_t s = x.rows; s < out.x.rows; ++s) {
        bool found = false;
        for (std::size_t a = 0; a < 12 && !found; ++a)
            for (std::size_t b = 0; b < 12 && !found; ++b) {
                if (a == b) continue;
                const double dx = x(b, 0) - x(a, 0);
                const double u = (out.x(s, 0) - x(a, 0)) / dx;
                if (!(u >= -1e-12 && u <= 1.0 + 1e-12)) continue;
                bool ok = true;
                for (std::size_t j = 0; j < 3; ++j)
                    ok = ok && std::fabs(x(a, j) + u * (x(b, j) - x(a, j)) - out.x(s, j)) < 1e-9;
                found = ok;
            }
        EXPECT_TRUE(found) << "synthetic row " << s;
    }
}

TEST(Kfold, DivisibleAndSingleFold) {
    std::vector<int> y(20, 0);
    y.insert(y.end(), 10, 1);
    const auto folds = stratified_kfold(y, 10, 5);
    for (std::size_t f = 0; f < 10; ++f) {
        int a = 0, b = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (folds[i] == f) (y[i] ? b : a)++;
        EXPECT_EQ(a, 2);
        EXPECT_EQ(b, 1);
    }
    const auto one = stratified_kfold(y, 1, 5);
    EXPECT_TRUE(std::all_of(one.begin(), one.end(), [](std::size_t f) { return f == 0; }));
}

TEST(Kfold, UnevenClassCounts) {
    std::vector<int> y(25, 0);
    y.insert(y.end(), 10, 1);
    const auto folds = stratified_kfold(y, 10, 6);
    for (std::size_t f = 0; f < 10; ++f) {
        int a = 0, b = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (folds[i] == f) (y[i] ? b : a)++;
        EXPECT_TRUE(a == 2 || a == 3);
        EXPECT_EQ(b, 1);
    }
}

TEST(Kfold, RandomMultisetsStayWithinOne) {
    std::mt19937_64 gen(50);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t k = 2 + gen() % 9, classes = 2 + gen() % 5;
        std::vector<int> y;
        std::vector<std::size_t> n(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            n[c] = k + gen() % 60;
            y.insert(y.end(), n[c], static_cast<int>(c));
        }
        std::shuffle(y.begin(), y.end(), gen);
        const auto folds = stratified_kfold(y, k, gen());
        for (std::size_t c = 0; c < classes; ++c)
            for (std::size_t f = 0; f < k; ++f) {
                double cnt = 0;
                for (std::size_t i = 0; i < y.size(); ++i)
                    if (y[i] == static_cast<int>(c) && folds[i] == f) ++cnt;
                EXPECT_LE(std::fabs(cnt - static_cast<double>(n[c]) / static_cast<double>(k)), 1.0);
            }
    }
}

TEST(Kfold, ShortClassIsReported) {
    const std::vector<int> y = {0, 0, 0, 0, 1, 1};
    try {
        (void)stratified_kfold(y, 3, 1);
        FAIL() << "expected a stratification error";
    } catch (const StratificationError& e) {
        EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
    }
}

TEST(GridSearch, CellsAndTieRule) {
    const auto d = informative(120, 10);
    GridSpec one{{5}, {2}, {3}, 0};
    const auto r1 = grid_search(d.x, d.y, kAB, one, 3, 1);
    EXPECT_EQ(r1.surface.size(), 1u);
    EXPECT_EQ(r1.best_params.n_estimators, 5u);
    EXPECT_EQ(r1.fold_scores.size(), 3u);
    double s = 0.0;
    for (double v : r1.fold_scores) s += v;
    EXPECT_NEAR(r1.mean, s / 3.0, 1e-12);

    const auto r8 = grid_search(d.x, d.y, kAB, GridSpec{}, 3, 1);
    EXPECT_EQ(r8.surface.size(), 8u);
    // The data is separable by a single threshold, so every cell scores alike and the cheapest wins.
    bool all_equal = true;
    for (const auto& c : r8.surface) all_equal = all_equal && c.mean == r8.surface[0].mean;
    if (all_equal) {
        EXPECT_EQ(r8.best_params.n_estimators, 25u);
        EXPECT_EQ(r8.best_params.max_depth, 4u);
    }
    std::ostringstream csv;
    write_surface_csv(csv, r8);
    EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "n_estimators,min_samples_split,max_depth,mean_score,std_score");
}

TEST(BalancedAccuracy, Cases) {
    const std::vector<int> y = {0, 1, 0, 1, 1};
    EXPECT_DOUBLE_EQ(balanced_accuracy(y, y, 2), 1.0);
    EXPECT_DOUBLE_EQ(balanced_accuracy(y, std::vector<int>(5, 1), 2), 0.5);
    std::vector<int> t, p;
    for (int i = 0; i < 9; ++i) t.push_back(1), p.push_back(1);
    t.push_back(1), p.push_back(0);
    for (int i = 0; i < 7; ++i) t.push_back(0), p.push_back(0);
    for (int i = 0; i < 3; ++i) t.push_back(0), p.push_back(1);
    EXPECT_DOUBLE_EQ(balanced_accuracy(t, p, 2), 0.8);
    EXPECT_THROW(balanced_accuracy(std::vector<int>{0, 0}, std::vector<int>{0, 0}, 2), std::domain_error);
}

TEST(Confusion, CountsAndSums) {
    const std::vector<std::string> cls = {"a", "b", "c"};
    const std::vector<int> y = {0, 1, 2, 2, 1, 0, 0};
    const auto perfect = confusion(y, y, cls);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            if (i != j) {
                EXPECT_EQ(perfect.counts[i][j], 0u);
            }
    const std::vector<int> p = {1, 1, 2, 0, 1, 0, 2};
    const auto m = confusion(y, p, cls);
    EXPECT_EQ(m.total(), y.size());
    std::map<int, std::size_t> per;
    for (int v : y) ++per[v];
    for (std::size_t i = 0; i < 3; ++i) {
        std::size_t row = 0;
        for (auto v : m.counts[i]) row += v;
        EXPECT_EQ(row, per[static_cast<int>(i)]);
    }
    EXPECT_THROW(confusion(y, std::vector<int>{0, 0, 0, 0, 0, 0, 3}, cls), std::invalid_argument);
}
