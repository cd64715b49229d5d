#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pvrelay/core/rng.hpp"
#include "pvrelay/learn/dataset.hpp"

namespace pvrelay {

struct SmoteResult {
    Matrix x;
    std::vector<int> y;
};

/// Appends n_synthetic minority rows, each on the segment between a random
/// minority row and one of its k nearest minority neighbours (Euclidean).
/// The original data is kept as a prefix.
inline SmoteResult smote(const Matrix& x, const std::vector<int>& y, int minority_class, std::size_t k,
                         std::size_t n_synthetic, std::uint64_t seed) {
    if (y.size() != x.rows) throw std::invalid_argument("smote: label count differs from rows");
    if (k < 1) throw std::invalid_argument("smote: k must be >= 1");
    std::vector<std::size_t> minority;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == minority_class) minority.push_back(i);
    if (minority.size() < 2) throw std::invalid_argument("smote: minority class needs at least 2 rows");

    SmoteResult out{x, y};
    if (n_synthetic == 0) return out;

    const std::size_t m = minority.size();
    const std::size_t kk = std::min(k, m - 1);
    std::vector<std::vector<std::size_t>> neighbours(m);
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t a = 0; a < m; ++a) {
        dist.clear();
        for (std::size_t b = 0; b < m; ++b) {
            if (a == b) continue;
            double d = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double diff = x(minority[a], j) - x(minority[b], j);
                d += diff * diff;
            }
            dist.push_back({d, b});
        }
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
        for (std::size_t i = 0; i < kk; ++i) neighbours[a].push_back(dist[i].second);
    }

    Rng rng(seed);
    std::vector<double> row(x.cols);
    for (std::size_t s = 0; s < n_synthetic; ++s) {
        const std::size_t a = rng.index(m);
        const std::size_t b = neighbours[a][rng.index(kk)];
        const double u = rng.uniform();
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double xa = x(minority[a], j);
            row[j] = xa + u * (x(minority[b], j) - xa);
        }
        out.x.push_row(row);
        out.y.push_back(minority_class);
    }
    return out;
}

/// Oversamples every class up to the size of the largest one.
inline SmoteResult smote_balance(const Matrix& x, const std::vector<int>& y, std::size_t n_classes, std::size_t k,
                                 std::uint64_t seed) {
    std::vector<std::size_t> count(n_classes, 0);
    for (int v : y) ++count.at(static_cast<std::size_t>(v));
    const std::size_t target = *std::max_element(count.begin(), count.end());
    SmoteResult cur{x, y};
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (count[c] >= target || count[c] < 2) continue;
        cur = smote(cur.x, cur.y, static_cast<int>(c), k, target - count[c], derive_seed(seed, {c}));
    }
    return cur;
}

}  // namespace pvrelay
