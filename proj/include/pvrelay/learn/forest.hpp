#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/features/registry.hpp"
#include "pvrelay/learn/dataset.hpp"
#include "pvrelay/learn/tree.hpp"

namespace pvrelay {

struct ForestHyper {
    std::size_t n_estimators = 100;
    std::size_t min_samples_split = 2;
    std::size_t max_depth = 0;  // 0: unlimited
    std::size_t features_per_split = 0;  // 0: ceil(sqrt(d))

    TreeHyper tree() const { return {min_samples_split, max_depth, features_per_split}; }

    friend bool operator==(const ForestHyper&, const ForestHyper&) = default;
};

struct ForestModel {
    std::vector<TreeModel> trees;
    ForestHyper hyper;
    std::vector<double> importances;
    std::vector<std::string> classes;
    std::uint64_t train_seed = 0;
    bool degenerate = false;  // single-class training labels

    std::size_t n_features() const { return trees.empty() ? 0 : trees[0].n_features; }
};

struct ForestPrediction {
    int label = 0;
    std::vector<double> vote_fractions;
};

/// Bootstrap-aggregated CART. Tree t draws its bootstrap from derive_seed(seed, {t, 0})
/// and its feature subsets from derive_seed(seed, {t, 1}).
inline ForestModel fit_forest(const Matrix& x, const std::vector<int>& y, const std::vector<std::string>& classes,
                              const ForestHyper& hyper, std::uint64_t seed, unsigned threads = 0) {
    if (x.rows < 2) throw std::invalid_argument("fit_forest: need at least 2 rows");
    if (hyper.n_estimators == 0) throw std::invalid_argument("fit_forest: n_estimators must be >= 1");
    if (hyper.min_samples_split < 2) throw std::invalid_argument("fit_forest: min_samples_split must be >= 2");
    ForestModel f;
    f.hyper = hyper;
    f.classes = classes;
    f.train_seed = seed;
    std::vector<bool> seen(classes.size(), false);
    for (int v : y)
        if (v >= 0 && static_cast<std::size_t>(v) < classes.size()) seen[static_cast<std::size_t>(v)] = true;
    f.degenerate = std::count(seen.begin(), seen.end(), true) < 2;

    f.trees.resize(hyper.n_estimators);
    parallel_for(
        hyper.n_estimators,
        [&](std::size_t t) {
            Rng boot(derive_seed(seed, {t, 0}));
            std::vector<std::size_t> sample(x.rows);
            for (auto& s : sample) s = boot.index(x.rows);
            f.trees[t] = fit_tree(x, y, classes.size(), hyper.tree(), derive_seed(seed, {t, 1}), std::move(sample));
        },
        threads);

    f.importances.assign(x.cols, 0.0);
    std::size_t contributing = 0;
    for (const auto& t : f.trees) {
        double total = 0.0;
        for (double v : t.raw_importance) total += v;
        if (total <= 0.0) continue;
        ++contributing;
        for (std::size_t j = 0; j < x.cols; ++j) f.importances[j] += t.raw_importance[j] / total;
    }
    if (contributing > 0) {
        double s = 0.0;
        for (double v : f.importances) s += v;
        for (double& v : f.importances) v /= s;
    }
    return f;
}

/// Majority vote over trees; ties go to the smallest class index.
inline ForestPrediction predict(const ForestModel& forest, std::span<const double> x) {
    if (x.size() != forest.n_features()) throw std::invalid_argument("predict: feature dimension mismatch");
    ForestPrediction p;
    p.vote_fractions.assign(forest.classes.size(), 0.0);
    for (const auto& t : forest.trees) p.vote_fractions[static_cast<std::size_t>(t.predict(x))] += 1.0;
    p.label = static_cast<int>(std::max_element(p.vote_fractions.begin(), p.vote_fractions.end()) -
                               p.vote_fractions.begin());
    for (double& v : p.vote_fractions) v /= static_cast<double>(forest.trees.size());
    return p;
}

inline std::vector<int> predict_all(const ForestModel& forest, const Matrix& x) {
    std::vector<int> out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = predict(forest, x.row(i)).label;
    return out;
}

// ---- serialization ----

inline constexpr const char* kForestMagic = "pvrelay-forest";
inline constexpr int kForestVersion = 1;

inline void write_forest(std::ostream& out, const ForestModel& f) {
    out << kForestMagic << ' ' << kForestVersion << '\n';
    out << "classes " << f.classes.size();
    for (const auto& c : f.classes) out << ' ' << c;
    out << '\n';
    out << "hyper " << f.hyper.n_estimators << ' ' << f.hyper.min_samples_split << ' ' << f.hyper.max_depth << ' '
        << f.hyper.features_per_split << '\n';
    out << "train_seed " << f.train_seed << '\n';
    out << "degenerate " << (f.degenerate ? 1 : 0) << '\n';
    out << "features " << f.n_features() << '\n';
    out << "importances";
    for (double v : f.importances) out << ' ' << format_double(v);
    out << '\n';
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        const auto& tree = f.trees[t];
        out << "tree " << t << ' ' << tree.nodes.size() << '\n';
        out << "raw_importance";
        for (double v : tree.raw_importance) out << ' ' << format_double(v);
        out << '\n';
        for (const auto& n : tree.nodes) {
            out << "node " << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
                << format_double(n.impurity_decrease);
            for (double c : n.counts) out << ' ' << format_double(c);
            out << '\n';
        }
    }
    out << "end-forest\n";
}

namespace forest_detail {

inline std::vector<std::string> next_fields(std::istream& in, const char* expect) {
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) break;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty() || f[0] != expect) throw DataError(std::string("forest: expected '") + expect + "' line");
    return f;
}

inline double num(const std::string& s) {
    const auto v = parse_double(s);
    if (!v) throw DataError("forest: bad number '" + s + "'");
    return *v;
}

inline std::uint64_t unum(const std::string& s) {
    const auto v = parse_uint(s);
    if (!v) throw DataError("forest: bad integer '" + s + "'");
    return *v;
}

inline long long inum(const std::string& s) {
    const auto v = parse_int(s);
    if (!v) throw DataError("forest: bad integer '" + s + "'");
    return *v;
}

}  // namespace forest_detail

inline ForestModel read_forest(std::istream& in) {
    using namespace forest_detail;
    auto head = next_fields(in, kForestMagic);
    if (head.size() != 2 || inum(head[1]) != kForestVersion) throw DataError("forest: unsupported version");
    ForestModel f;
    auto cl = next_fields(in, "classes");
    const auto nc = unum(cl.at(1));
    if (cl.size() != nc + 2) throw DataError("forest: class count mismatch");
    f.classes.assign(cl.begin() + 2, cl.end());
    auto hy = next_fields(in, "hyper");
    if (hy.size() != 5) throw DataError("forest: bad hyper line");
    f.hyper = {unum(hy[1]), unum(hy[2]), unum(hy[3]), unum(hy[4])};
    f.train_seed = unum(next_fields(in, "train_seed").at(1));
    f.degenerate = unum(next_fields(in, "degenerate").at(1)) != 0;
    const auto nf = unum(next_fields(in, "features").at(1));
    auto im = next_fields(in, "importances");
    if (im.size() != nf + 1) throw DataError("forest: importance count mismatch");
    for (std::size_t i = 1; i < im.size(); ++i) f.importances.push_back(num(im[i]));
    f.trees.resize(f.hyper.n_estimators);
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        auto th = next_fields(in, "tree");
        if (th.size() != 3 || unum(th[1]) != t) throw DataError("forest: tree header out of order");
        auto& tree = f.trees[t];
        tree.n_classes = nc;
        tree.n_features = nf;
        auto ri = next_fields(in, "raw_importance");
        if (ri.size() != nf + 1) throw DataError("forest: raw importance count mismatch");
        for (std::size_t i = 1; i < ri.size(); ++i) tree.raw_importance.push_back(num(ri[i]));
        const auto nn = unum(th[2]);
        for (std::size_t k = 0; k < nn; ++k) {
            auto nd = next_fields(in, "node");
            if (nd.size() != 6 + nc) throw DataError("forest: bad node line");
            TreeNode n;
            n.feature = static_cast<int>(inum(nd[1]));
            n.threshold = num(nd[2]);
            n.left = static_cast<int>(inum(nd[3]));
            n.right = static_cast<int>(inum(nd[4]));
            n.impurity_decrease = num(nd[5]);
            for (std::size_t c = 0; c < nc; ++c) n.counts.push_back(num(nd[6 + c]));
            const auto lim = static_cast<long long>(nn);
            if (n.feature >= static_cast<int>(nf) ||
                (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= lim || n.right >= lim)))
                throw DataError("forest: node references out of range");
            tree.nodes.push_back(std::move(n));
        }
        if (tree.nodes.empty()) throw DataError("forest: empty tree");
    }
    next_fields(in, "end-forest");
    return f;
}

inline std::string forest_to_string(const ForestModel& f) {
    std::ostringstream s;
    write_forest(s, f);
    return s.str();
}

// ---- feature ranking ----

struct RankedFeature {
    FeatureSpec spec;
    double importance = 0.0;
};

struct FamilyImportance {
    TrendFamily family;
    TrendAttribute attribute;
    std::size_t segment_size;
    Aggregator aggregator;
    double importance = 0.0;
};

struct FeatureRanking {
    std::vector<RankedFeature> ranked;     // descending importance, registry order on ties
    std::vector<FamilyImportance> families;  // summed over phases, descending
};

/// Trains a forest on the full bank and ranks specs by mean impurity decrease.
inline FeatureRanking rank_features(const Matrix& x_full, const std::vector<int>& y,
                                    const std::vector<std::string>& classes, const std::vector<FeatureSpec>& specs,
                                    const ForestHyper& hyper, std::uint64_t seed) {
    if (x_full.cols != specs.size()) throw std::invalid_argument("rank_features: columns differ from spec list");
    const auto forest = fit_forest(x_full, y, classes, hyper, seed);
    FeatureRanking r;
    for (std::size_t j = 0; j < specs.size(); ++j) r.ranked.push_back({specs[j], forest.importances[j]});
    std::stable_sort(r.ranked.begin(), r.ranked.end(),
                     [](const RankedFeature& a, const RankedFeature& b) { return a.importance > b.importance; });

    std::map<std::tuple<int, int, std::size_t, int>, double> groups;
    std::vector<std::tuple<int, int, std::size_t, int>> order;
    for (std::size_t j = 0; j < specs.size(); ++j) {
        const auto& s = specs[j];
        const auto key = std::make_tuple(static_cast<int>(s.family), static_cast<int>(s.attribute), s.segment_size,
                                         static_cast<int>(s.aggregator));
        if (!groups.count(key)) order.push_back(key);
        groups[key] += forest.importances[j];
    }
    for (const auto& k : order)
        r.families.push_back({static_cast<TrendFamily>(std::get<0>(k)), static_cast<TrendAttribute>(std::get<1>(k)),
                              std::get<2>(k), static_cast<Aggregator>(std::get<3>(k)), groups[k]});
    std::stable_sort(r.families.begin(), r.families.end(),
                     [](const FamilyImportance& a, const FamilyImportance& b) { return a.importance > b.importance; });
    return r;
}

inline std::string family_name(const FamilyImportance& f) {
    std::string s = f.family == TrendFamily::slt ? "SLT(" : "CLT(";
    s += to_string(f.attribute);
    if (f.family == TrendFamily::clt) {
        s += ',' + std::to_string(f.segment_size) + ',';
        s += to_string(f.aggregator);
    }
    return s + ')';
}

}  // namespace pvrelay
