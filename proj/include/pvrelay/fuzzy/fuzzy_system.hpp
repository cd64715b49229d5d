#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvrelay/core/errors.hpp"
#include "pvrelay/core/text.hpp"

namespace pvrelay {

struct Trapezoid {
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    bool valid() const { return a <= b && b <= c && c <= d; }

    friend bool operator==(const Trapezoid&, const Trapezoid&) = default;
};

/// Trapezoidal membership. A vertical edge (a = b or c = d) belongs to the
/// plateau, so a = b gives a step and a singleton has membership 1 at its point.
inline double trap_mu(double x, const Trapezoid& t) {
    if (x < t.a || x > t.d) return 0.0;
    if (x >= t.b && x <= t.c) return 1.0;
    if (x < t.b) return (x - t.a) / (t.b - t.a);
    return (t.d - x) / (t.d - t.c);
}

struct FuzzySet {
    std::string label;
    Trapezoid shape;

    friend bool operator==(const FuzzySet&, const FuzzySet&) = default;
};

struct FuzzyVariable {
    std::string name;
    double lo = -1.0;
    double hi = 1.0;
    std::vector<FuzzySet> sets;

    int find(const std::string& label) const {
        for (std::size_t i = 0; i < sets.size(); ++i)
            if (sets[i].label == label) return static_cast<int>(i);
        return -1;
    }

    friend bool operator==(const FuzzyVariable&, const FuzzyVariable&) = default;
};

inline constexpr int kWildcard = -1;

/// IF input_0 is A_0 AND input_1 is A_1 ... THEN output is C. kWildcard skips an input.
struct FuzzyRule {
    std::vector<int> antecedent;
    int consequent = 0;

    friend bool operator==(const FuzzyRule&, const FuzzyRule&) = default;
};

struct FuzzySystem {
    std::vector<FuzzyVariable> inputs;
    FuzzyVariable output;
    std::vector<FuzzyRule> rules;
    std::size_t defuzz_grid = 201;

    void validate() const {
        if (inputs.empty()) throw ConfigError("fuzzy: no input variables");
        auto check_var = [](const FuzzyVariable& v) {
            if (!(v.lo < v.hi)) throw ConfigError("fuzzy: variable '" + v.name + "' has an empty universe");
            if (v.sets.size() < 2) throw ConfigError("fuzzy: variable '" + v.name + "' needs >= 2 sets");
            for (std::size_t i = 0; i < v.sets.size(); ++i) {
                if (!v.sets[i].shape.valid())
                    throw ConfigError("fuzzy: set '" + v.sets[i].label + "' violates a <= b <= c <= d");
                if (v.find(v.sets[i].label) != static_cast<int>(i))
                    throw ConfigError("fuzzy: duplicate label '" + v.sets[i].label + "'");
            }
        };
        for (const auto& v : inputs) check_var(v);
        check_var(output);
        if (defuzz_grid < 2) throw ConfigError("fuzzy: defuzz_grid must be >= 2");
        for (const auto& r : rules) {
            if (r.antecedent.size() != inputs.size()) throw ConfigError("fuzzy: rule arity differs from inputs");
            for (std::size_t i = 0; i < inputs.size(); ++i)
                if (r.antecedent[i] != kWildcard &&
                    (r.antecedent[i] < 0 || r.antecedent[i] >= static_cast<int>(inputs[i].sets.size())))
                    throw ConfigError("fuzzy: rule references a missing input label");
            if (r.consequent < 0 || r.consequent >= static_cast<int>(output.sets.size()))
                throw ConfigError("fuzzy: rule references a missing output label");
        }
    }

    friend bool operator==(const FuzzySystem&, const FuzzySystem&) = default;
};

struct InferenceResult {
    double value = 0.5;
    bool clamped = false;  // an input lay outside its universe
    bool fired = false;
};

/// Mamdani evaluator with the output memberships sampled once on the defuzz grid.
class FuzzyEvaluator {
public:
    explicit FuzzyEvaluator(const FuzzySystem& sys) : sys_(sys) {
        const std::size_t n = sys.defuzz_grid;
        grid_.resize(n);
        mu_.assign(sys.output.sets.size(), std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            grid_[i] = sys.output.lo + (sys.output.hi - sys.output.lo) * static_cast<double>(i) /
                                           static_cast<double>(n - 1);
            for (std::size_t s = 0; s < sys.output.sets.size(); ++s) mu_[s][i] = trap_mu(grid_[i], sys.output.sets[s].shape);
        }
    }

    InferenceResult operator()(std::span<const double> x) const {
        if (x.size() != sys_.inputs.size()) throw std::invalid_argument("infer: input count differs from system");
        InferenceResult res;
        std::array<double, 8> xs_small{};
        std::vector<double> xs_big;
        double* xs = xs_small.data();
        if (x.size() > xs_small.size()) {
            xs_big.resize(x.size());
            xs = xs_big.data();
        }
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto& v = sys_.inputs[i];
            double xi = x[i];
            if (std::isnan(xi)) throw std::invalid_argument("infer: NaN input");
            if (xi < v.lo || xi > v.hi) {
                res.clamped = true;
                xi = std::clamp(xi, v.lo, v.hi);
            }
            xs[i] = xi;
        }
        std::vector<double> act(sys_.output.sets.size(), 0.0);
        for (const auto& r : sys_.rules) {
            double w = 1.0;
            for (std::size_t i = 0; i < r.antecedent.size() && w > 0.0; ++i)
                if (r.antecedent[i] != kWildcard)
                    w = std::min(w, trap_mu(xs[i], sys_.inputs[i].sets[static_cast<std::size_t>(r.antecedent[i])].shape));
            auto& a = act[static_cast<std::size_t>(r.consequent)];
            a = std::max(a, w);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t g = 0; g < grid_.size(); ++g) {
            double m = 0.0;
            for (std::size_t s = 0; s < act.size(); ++s) m = std::max(m, std::min(act[s], mu_[s][g]));
            num += grid_[g] * m;
            den += m;
        }
        if (den > 0.0) {
            res.value = num / den;
            res.fired = true;
        }
        return res;
    }

private:
    const FuzzySystem& sys_;
    std::vector<double> grid_;
    std::vector<std::vector<double>> mu_;
};

inline InferenceResult infer_detail(const FuzzySystem& sys, std::span<const double> x) { return FuzzyEvaluator(sys)(x); }

/// Crisp centroid output; 0.5 when no rule fires.
inline double infer(const FuzzySystem& sys, std::span<const double> x) { return infer_detail(sys, x).value; }

/// Three inputs with {neg, flat, pos} on [-1, 1]; output {no-fault, fault} on [0, 1].
/// Two phases sharing a strong trend sign signal a fault; every other combination
/// is no-fault.
inline FuzzySystem default_system() {
    FuzzySystem s;
    for (const char* name : {"r_a", "r_b", "r_c"})
        s.inputs.push_back({name,
                            -1.0,
                            1.0,
                            {{"neg", {-1.0, -1.0, -0.6, -0.2}},
                             {"flat", {-0.6, -0.2, 0.2, 0.6}},
                             {"pos", {0.2, 0.6, 1.0, 1.0}}}});
    s.output = {"fault", 0.0, 1.0, {{"no-fault", {0.0, 0.0, 0.3, 0.5}}, {"fault", {0.5, 0.7, 1.0, 1.0}}}};
    const int neg = 0, flat = 1, pos = 2, nofault = 0, fault = 1;
    const int w = kWildcard;
    for (int sign : {neg, pos}) {
        s.rules.push_back({{sign, sign, w}, fault});
        s.rules.push_back({{w, sign, sign}, fault});
        s.rules.push_back({{sign, w, sign}, fault});
    }
    for (int a : {neg, flat, pos})
        for (int b : {neg, flat, pos})
            for (int c : {neg, flat, pos}) {
                const bool two_same = (a != flat && (a == b || a == c)) || (b != flat && b == c);
                if (!two_same) s.rules.push_back({{a, b, c}, nofault});
            }
    return s;
}

// ---- serialization ----

inline constexpr const char* kFuzzyMagic = "pvrelay-fuzzy";
inline constexpr int kFuzzyVersion = 1;

inline void write_fuzzy(std::ostream& out, const FuzzySystem& s) {
    auto var = [&](const char* kind, const FuzzyVariable& v) {
        out << kind << ' ' << v.name << ' ' << format_double(v.lo) << ' ' << format_double(v.hi) << ' ' << v.sets.size()
            << '\n';
        for (const auto& set : v.sets)
            out << "set " << set.label << ' ' << format_double(set.shape.a) << ' ' << format_double(set.shape.b) << ' '
                << format_double(set.shape.c) << ' ' << format_double(set.shape.d) << '\n';
    };
    out << kFuzzyMagic << ' ' << kFuzzyVersion << '\n';
    out << "grid " << s.defuzz_grid << '\n';
    out << "inputs " << s.inputs.size() << '\n';
    for (const auto& v : s.inputs) var("input", v);
    var("output", s.output);
    out << "rules " << s.rules.size() << '\n';
    for (const auto& r : s.rules) {
        out << "rule";
        for (std::size_t i = 0; i < r.antecedent.size(); ++i)
            out << ' ' << (r.antecedent[i] == kWildcard ? std::string("*") : s.inputs[i].sets[static_cast<std::size_t>(r.antecedent[i])].label);
        out << " => " << s.output.sets[static_cast<std::size_t>(r.consequent)].label << '\n';
    }
    out << "end-fuzzy\n";
}

namespace fuzzy_detail {

inline std::vector<std::string> fields(std::istream& in, const char* expect) {
    std::string line;
    while (std::getline(in, line))
        if (!trim(line).empty()) break;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; ls >> tok;) f.push_back(tok);
    if (f.empty() || f[0] != expect) throw DataError(std::string("fuzzy: expected '") + expect + "' line");
    return f;
}

inline double num(const std::string& s) {
    const auto v = parse_double(s);
    if (!v) throw DataError("fuzzy: bad number '" + s + "'");
    return *v;
}

inline std::size_t count(const std::string& s) {
    const auto v = parse_uint(s);
    if (!v) throw DataError("fuzzy: bad count '" + s + "'");
    return static_cast<std::size_t>(*v);
}

inline FuzzyVariable read_var(std::istream& in, const char* kind) {
    auto h = fields(in, kind);
    if (h.size() != 5) throw DataError(std::string("fuzzy: bad ") + kind + " header");
    FuzzyVariable v{h[1], num(h[2]), num(h[3]), {}};
    const auto n = count(h[4]);
    for (std::size_t i = 0; i < n; ++i) {
        auto f = fields(in, "set");
        if (f.size() != 6) throw DataError("fuzzy: bad set line");
        v.sets.push_back({f[1], {num(f[2]), num(f[3]), num(f[4]), num(f[5])}});
    }
    return v;
}

}  // namespace fuzzy_detail

inline FuzzySystem read_fuzzy(std::istream& in) {
    using namespace fuzzy_detail;
    auto h = fields(in, kFuzzyMagic);
    if (h.size() != 2 || h[1] != std::to_string(kFuzzyVersion)) throw DataError("fuzzy: unsupported version");
    FuzzySystem s;
    s.defuzz_grid = count(fields(in, "grid").at(1));
    const auto ni = count(fields(in, "inputs").at(1));
    for (std::size_t i = 0; i < ni; ++i) s.inputs.push_back(read_var(in, "input"));
    s.output = read_var(in, "output");
    const auto nr = count(fields(in, "rules").at(1));
    for (std::size_t k = 0; k < nr; ++k) {
        auto f = fields(in, "rule");
        if (f.size() != ni + 3 || f[ni + 1] != "=>") throw DataError("fuzzy: bad rule line");
        FuzzyRule r;
        for (std::size_t i = 0; i < ni; ++i) {
            if (f[i + 1] == "*") {
                r.antecedent.push_back(kWildcard);
                continue;
            }
            const int idx = s.inputs[i].find(f[i + 1]);
            if (idx < 0) throw DataError("fuzzy: rule uses unknown label '" + f[i + 1] + "'");
            r.antecedent.push_back(idx);
        }
        r.consequent = s.output.find(f[ni + 2]);
        if (r.consequent < 0) throw DataError("fuzzy: rule uses unknown output '" + f[ni + 2] + "'");
        s.rules.push_back(std::move(r));
    }
    fields(in, "end-fuzzy");
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
    return s;
}

}  // namespace pvrelay
