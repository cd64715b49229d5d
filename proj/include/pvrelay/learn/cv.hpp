#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/learn/dataset.hpp"
#include "pvrelay/learn/forest.hpp"
#include "pvrelay/learn/metrics.hpp"

namespace pvrelay {

struct StratificationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Fold id per example. Each class is shuffled, then dealt round-robin with the
/// dealing position carried over from the previous class.
inline std::vector<std::size_t> stratified_kfold(const std::vector<int>& y, std::size_t k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("stratified_kfold: k must be >= 1");
    int max_label = -1;
    for (int v : y) {
        if (v < 0) throw std::invalid_argument("stratified_kfold: negative label");
        max_label = std::max(max_label, v);
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < y.size(); ++i) members[static_cast<std::size_t>(y[i])].push_back(i);
    std::string short_classes;
    for (std::size_t c = 0; c < members.size(); ++c)
        if (!members[c].empty() && members[c].size() < k)
            short_classes += (short_classes.empty() ? "" : ", ") + std::to_string(c) + " (" +
                             std::to_string(members[c].size()) + ")";
    if (!short_classes.empty())
        throw StratificationError("stratified_kfold: fewer than k=" + std::to_string(k) +
                                  " members in class " + short_classes);

    std::vector<std::size_t> fold(y.size(), 0);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < members.size(); ++c) {
        auto idx = members[c];
        Rng rng(derive_seed(seed, {c}));
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = (offset + j) % k;
        offset += idx.size();
    }
    return fold;
}

struct GridSpec {
    std::vector<std::size_t> n_estimators = {25, 50};
    std::vector<std::size_t> min_samples_split = {2, 5};
    std::vector<std::size_t> max_depth = {4, 8};
    std::size_t features_per_split = 0;

    std::size_t size() const { return n_estimators.size() * min_samples_split.size() * max_depth.size(); }
};

struct GridCell {
    ForestHyper hyper;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double std = 0.0;
};

struct CVReport {
    std::vector<double> fold_scores;
    double mean = 0.0;
    double std = 0.0;
    ForestHyper best_params;
    std::vector<GridCell> surface;
};

namespace cv_detail {

inline std::size_t depth_rank(std::size_t d) { return d == 0 ? SIZE_MAX : d; }

// Cheaper model wins ties: fewer trees, then shallower, then larger min split.
inline bool preferred(const GridCell& a, const GridCell& b) {
    if (a.mean != b.mean) return a.mean > b.mean;
    if (a.hyper.n_estimators != b.hyper.n_estimators) return a.hyper.n_estimators < b.hyper.n_estimators;
    if (a.hyper.max_depth != b.hyper.max_depth) return depth_rank(a.hyper.max_depth) < depth_rank(b.hyper.max_depth);
    return a.hyper.min_samples_split > b.hyper.min_samples_split;
}

}  // namespace cv_detail

/// Exhaustive grid over forest hyperparameters scored by stratified k-fold
/// mean balanced accuracy. Cell c, fold f trains with derive_seed(seed, {c, f}).
inline CVReport grid_search(const Matrix& x, const std::vector<int>& y, const std::vector<std::string>& classes,
                            const GridSpec& grid, std::size_t k, std::uint64_t seed) {
    if (grid.size() == 0) throw ConfigError("grid_search: empty grid");
    if (k < 2) throw ConfigError("grid_search: k must be >= 2");
    const auto folds = stratified_kfold(y, k, derive_seed(seed, {0xF01D}));

    std::vector<GridCell> cells;
    for (auto ne : grid.n_estimators)
        for (auto ms : grid.min_samples_split)
            for (auto md : grid.max_depth) {
                GridCell c;
                c.hyper = {ne, ms, md, grid.features_per_split};
                c.fold_scores.assign(k, 0.0);
                cells.push_back(c);
            }

    std::vector<std::vector<std::size_t>> train_idx(k), test_idx(k);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t f = 0; f < k; ++f) (folds[i] == f ? test_idx[f] : train_idx[f]).push_back(i);

    std::vector<Matrix> x_train(k), x_test(k);
    std::vector<std::vector<int>> y_train(k), y_test(k);
    for (std::size_t f = 0; f < k; ++f) {
        x_train[f] = x.select_rows(train_idx[f]);
        x_test[f] = x.select_rows(test_idx[f]);
        for (auto i : train_idx[f]) y_train[f].push_back(y[i]);
        for (auto i : test_idx[f]) y_test[f].push_back(y[i]);
    }

    parallel_for(cells.size() * k, [&](std::size_t unit) {
        const std::size_t c = unit / k, f = unit % k;
        const auto model = fit_forest(x_train[f], y_train[f], classes, cells[c].hyper, derive_seed(seed, {c, f}), 1);
        cells[c].fold_scores[f] = balanced_accuracy_present(y_test[f], predict_all(model, x_test[f]), classes.size());
    });

    for (auto& c : cells) {
        double s = 0.0;
        for (double v : c.fold_scores) s += v;
        c.mean = s / static_cast<double>(k);
        double ss = 0.0;
        for (double v : c.fold_scores) ss += (v - c.mean) * (v - c.mean);
        c.std = std::sqrt(ss / static_cast<double>(k));
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i)
        if (cv_detail::preferred(cells[i], cells[best])) best = i;

    CVReport r;
    r.fold_scores = cells[best].fold_scores;
    r.mean = cells[best].mean;
    r.std = cells[best].std;
    r.best_params = cells[best].hyper;
    r.surface = std::move(cells);
    return r;
}

inline void write_surface_csv(std::ostream& out, const CVReport& r) {
    out << "n_estimators,min_samples_split,max_depth,mean_score,std_score\n";
    for (const auto& c : r.surface)
        out << c.hyper.n_estimators << ',' << c.hyper.min_samples_split << ',' << c.hyper.max_depth << ','
            << format_double(c.mean) << ',' << format_double(c.std) << '\n';
}

}  // namespace pvrelay
