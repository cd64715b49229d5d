#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pvrelay/core/rng.hpp"
#include "pvrelay/learn/dataset.hpp"

namespace pvrelay {

struct TreeHyper {
    std::size_t min_samples_split = 2;
    std::size_t max_depth = 0;  // 0: unlimited
    std::size_t features_per_split = 0;  // 0: ceil(sqrt(d))
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> counts;  // training class counts reaching the node
    double impurity_decrease = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // node 0 is the root
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<double> raw_importance;  // sum of (n_node / n_root) * delta per feature

    std::size_t depth() const {
        std::size_t best = 0;
        std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
        while (!stack.empty()) {
            auto [i, d] = stack.back();
            stack.pop_back();
            best = std::max(best, d);
            const auto& n = nodes[static_cast<std::size_t>(i)];
            if (!n.is_leaf()) {
                stack.push_back({n.left, d + 1});
                stack.push_back({n.right, d + 1});
            }
        }
        return best;
    }

    const TreeNode& leaf_for(std::span<const double> x) const {
        if (x.size() != n_features) throw std::invalid_argument("tree: feature dimension mismatch");
        const TreeNode* n = &nodes[0];
        while (!n->is_leaf())
            n = &nodes[static_cast<std::size_t>(x[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left
                                                                                                     : n->right)];
        return *n;
    }

    /// Majority class of the reached leaf; ties go to the smallest class index.
    int predict(std::span<const double> x) const {
        const auto& c = leaf_for(x).counts;
        return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
    }
};

/// Weighted impurity decrease of a binary split from integer class counts.
inline double split_gain(const std::vector<double>& parent, const std::vector<double>& left,
                         const std::vector<double>& right) {
    auto g = [](const std::vector<double>& c, double& n) {
        n = 0.0;
        for (double v : c) n += v;
        double s = 0.0;
        for (double v : c) {
            const double p = v / n;
            s += p * p;
        }
        return 1.0 - s;
    };
    double n = 0.0, nl = 0.0, nr = 0.0;
    const double gp = g(parent, n);
    const double gl = g(left, nl);
    const double gr = g(right, nr);
    return gp - (nl / n) * gl - (nr / n) * gr;
}

/// Split point strictly between a < b such that x <= t separates them.
inline double midpoint(double a, double b) {
    const double t = a + (b - a) / 2.0;
    return (t >= b || t < a) ? a : t;
}

namespace tree_detail {

struct Builder {
    const Matrix& x;
    const std::vector<int>& y;
    std::size_t n_classes;
    TreeHyper hyper;
    Rng rng;
    TreeModel tree;
    double n_root = 0.0;

    struct Candidate {
        bool found = false;
        int feature = -1;
        double threshold = 0.0;
        double gain = 0.0;
    };

    std::vector<double> counts_of(const std::vector<std::size_t>& idx) const {
        std::vector<double> c(n_classes, 0.0);
        for (auto i : idx) c[static_cast<std::size_t>(y[i])] += 1.0;
        return c;
    }

    Candidate best_split(const std::vector<std::size_t>& idx, const std::vector<double>& parent) {
        const std::size_t d = x.cols;
        std::vector<std::size_t> order(d);
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);
        const std::size_t want = hyper.features_per_split == 0
                                     ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                     : std::min(hyper.features_per_split, d);
        Candidate best;
        std::size_t used = 0;
        std::vector<std::pair<double, int>> vals(idx.size());
        for (std::size_t f : order) {
            if (used >= want) break;
            for (std::size_t k = 0; k < idx.size(); ++k) vals[k] = {x(idx[k], f), y[idx[k]]};
            std::sort(vals.begin(), vals.end());
            if (vals.front().first == vals.back().first) continue;  // constant here: not counted
            ++used;
            std::vector<double> left(n_classes, 0.0), right = parent;
            for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
                left[static_cast<std::size_t>(vals[k].second)] += 1.0;
                right[static_cast<std::size_t>(vals[k].second)] -= 1.0;
                if (vals[k].first == vals[k + 1].first) continue;
                const double gain = split_gain(parent, left, right);
                const double t = midpoint(vals[k].first, vals[k + 1].first);
                const int fi = static_cast<int>(f);
                if (!best.found || gain > best.gain ||
                    (gain == best.gain && (fi < best.feature || (fi == best.feature && t < best.threshold))))
                    best = {true, fi, t, gain};
            }
        }
        return best;
    }

    int build(const std::vector<std::size_t>& idx, std::size_t depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        auto counts = counts_of(idx);
        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        const bool depth_cap = hyper.max_depth != 0 && depth >= hyper.max_depth;
        Candidate split;
        if (!pure && !depth_cap && idx.size() >= hyper.min_samples_split && idx.size() >= 2)
            split = best_split(idx, counts);
        if (!split.found || !(split.gain >= 0.0)) {
            tree.nodes[static_cast<std::size_t>(id)].counts = std::move(counts);
            return id;
        }
        std::vector<std::size_t> li, ri;
        for (auto i : idx) (x(i, static_cast<std::size_t>(split.feature)) <= split.threshold ? li : ri).push_back(i);
        tree.raw_importance[static_cast<std::size_t>(split.feature)] +=
            static_cast<double>(idx.size()) / n_root * split.gain;
        const int l = build(li, depth + 1);
        const int r = build(ri, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        node.counts = std::move(counts);
        node.impurity_decrease = split.gain;
        return id;
    }
};

}  // namespace tree_detail

/// Greedy CART on the rows listed in `sample` (duplicates allowed, as in a bootstrap).
inline TreeModel fit_tree(const Matrix& x, const std::vector<int>& y, std::size_t n_classes, const TreeHyper& hyper,
                          std::uint64_t seed, std::vector<std::size_t> sample = {}) {
    if (x.rows == 0) throw std::invalid_argument("fit_tree: empty data");
    if (y.size() != x.rows) throw std::invalid_argument("fit_tree: label count differs from rows");
    if (n_classes == 0) throw std::invalid_argument("fit_tree: no classes");
    for (int v : y)
        if (v < 0 || static_cast<std::size_t>(v) >= n_classes) throw std::invalid_argument("fit_tree: label out of range");
    for (double v : x.data)
        if (!std::isfinite(v)) throw std::invalid_argument("fit_tree: non-finite feature value");
    if (sample.empty()) {
        sample.resize(x.rows);
        std::iota(sample.begin(), sample.end(), 0);
    }
    tree_detail::Builder b{x, y, n_classes, hyper, Rng(seed), {}, static_cast<double>(sample.size())};
    b.tree.n_classes = n_classes;
    b.tree.n_features = x.cols;
    b.tree.raw_importance.assign(x.cols, 0.0);
    b.build(sample, 0);
    return std::move(b.tree);
}

}  // namespace pvrelay
