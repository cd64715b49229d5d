#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/parallel.hpp"
#include "pvrelay/core/rng.hpp"
#include "pvrelay/core/text.hpp"
#include "pvrelay/fuzzy/fuzzy_system.hpp"
#include "pvrelay/learn/dataset.hpp"
#include "pvrelay/learn/metrics.hpp"

namespace pvrelay {

struct GaParams {
    std::size_t population = 50;
    std::size_t generations = 100;
    double crossover_rate = 0.9;
    double mutation_rate = 0.1;
    double mutation_sigma = 0.05;  // fraction of the variable's universe width
    std::size_t elitism = 2;
    double blend_alpha = 0.5;
    std::size_t tournament = 3;
    std::uint64_t seed = 0;

    void validate() const {
        if (population < 2) throw ConfigError("ga: population must be >= 2");
        if (crossover_rate < 0.0 || crossover_rate > 1.0 || mutation_rate < 0.0 || mutation_rate > 1.0)
            throw ConfigError("ga: rates must lie in [0, 1]");
        if (mutation_sigma < 0.0) throw ConfigError("ga: mutation_sigma must be >= 0");
        if (elitism > population) throw ConfigError("ga: elitism exceeds population");
        if (tournament < 1) throw ConfigError("ga: tournament size must be >= 1");
    }
};

struct GaTracePoint {
    std::size_t generation = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
};

struct GaResult {
    FuzzySystem system;
    double fitness = 0.0;
    std::vector<GaTracePoint> trace;
};

/// Gene layout: (a, b, c, d) of every input set in variable order, then the output sets.
inline std::vector<double> encode(const FuzzySystem& s) {
    std::vector<double> g;
    auto put = [&](const FuzzyVariable& v) {
        for (const auto& set : v.sets) g.insert(g.end(), {set.shape.a, set.shape.b, set.shape.c, set.shape.d});
    };
    for (const auto& v : s.inputs) put(v);
    put(s.output);
    return g;
}

/// Writes genes into a copy of `base`, sorting each 4-tuple and clamping it to the universe.
inline FuzzySystem decode(const FuzzySystem& base, const std::vector<double>& genes) {
    FuzzySystem s = base;
    std::size_t k = 0;
    auto take = [&](FuzzyVariable& v) {
        for (auto& set : v.sets) {
            if (k + 4 > genes.size()) throw std::invalid_argument("decode: chromosome too short");
            std::array<double, 4> q = {genes[k], genes[k + 1], genes[k + 2], genes[k + 3]};
            k += 4;
            std::sort(q.begin(), q.end());
            for (auto& x : q) x = std::clamp(x, v.lo, v.hi);
            set.shape = {q[0], q[1], q[2], q[3]};
        }
    };
    for (auto& v : s.inputs) take(v);
    take(s.output);
    if (k != genes.size()) throw std::invalid_argument("decode: chromosome length mismatch");
    return s;
}

/// Balanced accuracy of (infer >= 0.5) against binary labels (1 = fault).
inline double fuzzy_fitness(const FuzzySystem& s, const Matrix& x, const std::vector<int>& y) {
    const FuzzyEvaluator eval(s);
    std::vector<int> pred(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) pred[i] = eval(x.row(i)).value >= 0.5 ? 1 : 0;
    return balanced_accuracy(y, pred, 2);
}

/// Real-coded GA over the membership vertices; the rule base stays fixed.
inline GaResult ga_tune(const Matrix& x, const std::vector<int>& y, const FuzzySystem& base, const GaParams& params) {
    params.validate();
    base.validate();
    if (x.rows != y.size()) throw std::invalid_argument("ga_tune: label count differs from rows");
    if (x.cols != base.inputs.size()) throw std::invalid_argument("ga_tune: feature count differs from inputs");
    bool has0 = false, has1 = false;
    for (int v : y) {
        if (v != 0 && v != 1) throw std::invalid_argument("ga_tune: labels must be 0 or 1");
        (v ? has1 : has0) = true;
    }
    if (!has0 || !has1) throw std::invalid_argument("ga_tune: both classes are required");

    GaResult res;
    if (params.generations == 0) {
        res.system = base;
        res.fitness = fuzzy_fitness(base, x, y);
        res.trace.push_back({0, res.fitness, res.fitness});
        return res;
    }

    const auto base_genes = encode(base);
    const std::size_t n_genes = base_genes.size();
    std::vector<double> width;
    for (const auto& v : base.inputs)
        for (std::size_t s = 0; s < v.sets.size() * 4; ++s) width.push_back(v.hi - v.lo);
    for (std::size_t s = 0; s < base.output.sets.size() * 4; ++s) width.push_back(base.output.hi - base.output.lo);
    auto repair = [&](const std::vector<double>& g) { return encode(decode(base, g)); };

    struct Individual {
        std::vector<double> genes;
        double fitness = 0.0;
    };
    std::vector<Individual> pop(params.population);
    pop[0].genes = base_genes;
    for (std::size_t i = 1; i < pop.size(); ++i) {
        Rng rng(derive_seed(params.seed, {0, i}));
        auto g = base_genes;
        for (std::size_t j = 0; j < n_genes; ++j) g[j] += params.mutation_sigma * width[j] * rng.normal();
        pop[i].genes = repair(g);
    }
    auto evaluate = [&](std::vector<Individual>& p) {
        parallel_for(p.size(), [&](std::size_t i) { p[i].fitness = fuzzy_fitness(decode(base, p[i].genes), x, y); });
    };
    auto rank = [](std::vector<Individual>& p) {
        std::stable_sort(p.begin(), p.end(),
                         [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; });
    };
    auto record = [&](std::size_t gen, const std::vector<Individual>& p, const Individual& best) {
        double mean = 0.0;
        for (const auto& ind : p) mean += ind.fitness;
        res.trace.push_back({gen, best.fitness, mean / static_cast<double>(p.size())});
    };

    evaluate(pop);
    rank(pop);
    Individual best = pop[0];
    record(0, pop, best);

    for (std::size_t gen = 1; gen <= params.generations; ++gen) {
        std::vector<Individual> next(params.population);
        for (std::size_t e = 0; e < params.elitism; ++e) next[e] = pop[e];
        parallel_for(params.population - params.elitism, [&](std::size_t slot) {
            const std::size_t i = params.elitism + slot;
            Rng rng(derive_seed(params.seed, {gen, i}));
            auto pick = [&] {
                std::size_t w = rng.index(pop.size());
                for (std::size_t t = 1; t < params.tournament; ++t) w = std::min(w, rng.index(pop.size()));
                return w;  // population is ranked, so the smallest index is the fittest
            };
            const auto& p1 = pop[pick()].genes;
            const auto& p2 = pop[pick()].genes;
            std::vector<double> child = p1;
            if (rng.uniform() < params.crossover_rate) {
                for (std::size_t j = 0; j < n_genes; ++j) {
                    const double lo = std::min(p1[j], p2[j]), hi = std::max(p1[j], p2[j]);
                    const double ext = params.blend_alpha * (hi - lo);
                    child[j] = rng.uniform(lo - ext, hi + ext);
                }
            }
            for (std::size_t j = 0; j < n_genes; ++j)
                if (rng.uniform() < params.mutation_rate) child[j] += params.mutation_sigma * width[j] * rng.normal();
            next[i].genes = repair(child);
        });
        std::vector<Individual> fresh(next.begin() + static_cast<std::ptrdiff_t>(params.elitism), next.end());
        evaluate(fresh);
        std::copy(fresh.begin(), fresh.end(), next.begin() + static_cast<std::ptrdiff_t>(params.elitism));
        pop = std::move(next);
        rank(pop);
        if (pop[0].fitness > best.fitness) best = pop[0];
        record(gen, pop, best);
    }

    res.system = decode(base, best.genes);
    res.fitness = best.fitness;
    return res;
}

inline void write_ga_trace_csv(std::ostream& out, const std::vector<GaTracePoint>& trace) {
    out << "generation,best_fitness,mean_fitness\n";
    for (const auto& p : trace)
        out << p.generation << ',' << format_double(p.best_fitness) << ',' << format_double(p.mean_fitness) << '\n';
}

}  // namespace pvrelay
