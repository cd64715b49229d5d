#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"

namespace pvrelay {

struct GwoParams {
    std::size_t population = 25;
    std::size_t dimensions = 1;
    double lower = 0.0;
    double upper = 1.0;
    std::size_t max_iter = 200;
    std::uint64_t seed = 0;

    void validate() const {
        if (population < 3) throw ConfigError("gwo: population must be >= 3");
        if (dimensions < 1) throw ConfigError("gwo: dimensions must be >= 1");
        if (!(lower < upper)) throw ConfigError("gwo: lower must be < upper");
    }
};

struct GwoTracePoint {
    std::size_t iter = 0;
    std::vector<double> best_position;
    double best_value = 0.0;
};

struct GwoResult {
    std::vector<double> best_position;
    double best_value = 0.0;
    std::vector<GwoTracePoint> trace;  // entry 0 is the initial population
};

/// Equal objective values are ordered by this predicate (true: first is preferred).
using GwoTieBreak = std::function<bool(const std::vector<double>&, const std::vector<double>&)>;

/// Canonical grey wolf optimizer. Coefficient a falls linearly from 2 to 0,
/// each wolf moves to the mean of its three leader-guided proposals, and the
/// alpha, beta and delta wolves are the best positions ever evaluated.
/// The objective may be called concurrently.
template <class Objective>
GwoResult gwo_minimize(Objective&& objective, const GwoParams& params, const GwoTieBreak& tie_break = {}) {
    params.validate();
    const std::size_t n = params.population;
    const std::size_t d = params.dimensions;

    struct Wolf {
        std::vector<double> x;
        double f = 0.0;
        std::size_t order = 0;
    };
    auto better = [&](const Wolf& a, const Wolf& b) {
        if (a.f != b.f) return a.f < b.f;
        if (tie_break) {
            if (tie_break(a.x, b.x)) return true;
            if (tie_break(b.x, a.x)) return false;
        }
        return a.order < b.order;
    };

    std::vector<Wolf> pack(n);
    std::size_t evaluated = 0;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(params.seed, {0, i}));
        pack[i].x.resize(d);
        for (auto& v : pack[i].x) v = rng.uniform(params.lower, params.upper);
    }
    auto evaluate = [&] {
        parallel_for(n, [&](std::size_t i) { pack[i].f = objective(std::as_const(pack[i].x)); });
        for (auto& w : pack) w.order = evaluated++;
    };
    evaluate();

    std::vector<Wolf> leaders;
    auto update_leaders = [&] {
        std::vector<Wolf> pool = leaders;
        pool.insert(pool.end(), pack.begin(), pack.end());
        std::stable_sort(pool.begin(), pool.end(), better);
        leaders.assign(pool.begin(), pool.begin() + 3);
    };
    update_leaders();

    GwoResult res;
    res.trace.push_back({0, leaders[0].x, leaders[0].f});

    for (std::size_t t = 0; t < params.max_iter; ++t) {
        const double a = 2.0 - 2.0 * static_cast<double>(t) / static_cast<double>(params.max_iter);
        parallel_for(n, [&](std::size_t i) {
            Rng rng(derive_seed(params.seed, {1, t, i}));
            auto& x = pack[i].x;
            for (std::size_t j = 0; j < d; ++j) {
                double sum = 0.0;
                for (int l = 0; l < 3; ++l) {
                    const double r1 = rng.uniform();
                    const double r2 = rng.uniform();
                    const double big_a = 2.0 * a * r1 - a;
                    const double big_c = 2.0 * r2;
                    const double lead = leaders[static_cast<std::size_t>(l)].x[j];
                    sum += lead - big_a * std::fabs(big_c * lead - x[j]);
                }
                x[j] = std::clamp(sum / 3.0, params.lower, params.upper);
            }
        });
        evaluate();
        update_leaders();
        res.trace.push_back({t + 1, leaders[0].x, leaders[0].f});
    }

    res.best_position = leaders[0].x;
    res.best_value = leaders[0].f;
    return res;
}

inline void write_gamma_trace_csv(std::ostream& out, const std::vector<GwoTracePoint>& trace) {
    out << "iter,best_gamma,best_fitness\n";
    for (const auto& p : trace)
        out << p.iter << ',' << format_double(p.best_position.empty() ? 0.0 : p.best_position[0]) << ','
            << format_double(p.best_value) << '\n';
}

}  // namespace pvrelay
