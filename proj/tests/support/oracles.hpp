#pragma once

// Reference computations written independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

struct LineFit {
    long double slope = 0, intercept = 0, r = 0, stderr_slope = 0;
};

/// Normal equations on raw power sums, r from the sum form of the correlation formula.
inline LineFit normal_equations(const std::vector<double>& y) {
    const long double n = static_cast<long double>(y.size());
    long double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const long double x = static_cast<long double>(i), v = y[i];
        sx += x;
        sy += v;
        sxx += x * x;
        sxy += x * v;
        syy += v * v;
    }
    LineFit f;
    const long double det = n * sxx - sx * sx;
    f.slope = (n * sxy - sx * sy) / det;
    f.intercept = (sy * sxx - sx * sxy) / det;
    const long double vy = n * syy - sy * sy;
    f.r = vy <= 0 ? 0 : (n * sxy - sx * sy) / std::sqrt(det * vy);
    if (y.size() > 2) {
        long double ss = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const long double e = y[i] - (f.intercept + f.slope * static_cast<long double>(i));
            ss += e * e;
        }
        f.stderr_slope = std::sqrt(ss / (n - 2) / (sxx - sx * sx / n));
    }
    return f;
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int depth = 50) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps, int d) {
            const double mid = 0.5 * (lo + hi);
            const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
            const double flm = f(lm), frm = f(rm);
            const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
            const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
            if (d <= 0 || std::fabs(left + right - whole) <= 15.0 * eps)
                return left + right + (left + right - whole) / 15.0;
            return rec(lo, mid, flo, flm, fmid, left, eps / 2.0, d - 1) +
                   rec(mid, hi, fmid, frm, fhi, right, eps / 2.0, d - 1);
        };
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return rec(a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, depth);
}

/// P(|T| >= |t|) by quadrature of the Student t density.
inline double t_two_sided(double t, double dof) {
    const double c = std::exp(std::lgamma((dof + 1.0) / 2.0) - std::lgamma(dof / 2.0)) /
                     std::sqrt(dof * std::numbers::pi);
    auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / dof, -(dof + 1.0) / 2.0); };
    const double at = std::fabs(t);
    if (at <= 1.0) return 1.0 - 2.0 * adaptive_simpson(pdf, 0.0, at, 1e-14);
    // Tail with x = |t| / s, s in (0, 1].
    auto tail = [&](double s) { return s <= 0.0 ? (dof == 1.0 ? c / at : 0.0) : pdf(at / s) * at / (s * s); };
    return 2.0 * adaptive_simpson(tail, 0.0, 1.0, 1e-14);
}

inline double gini(const std::vector<int>& counts) {
    double n = 0;
    for (int c : counts) n += c;
    double s = 0;
    for (int c : counts) s += (c / n) * (c / n);
    return 1.0 - s;
}

struct BestSplit {
    bool found = false;
    double gain = 0;
};

/// Every feature, every midpoint between consecutive distinct values.
inline BestSplit exhaustive_root_split(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                       int n_classes) {
    BestSplit best;
    const std::size_t n = y.size();
    std::vector<int> parent(static_cast<std::size_t>(n_classes), 0);
    for (int v : y) ++parent[static_cast<std::size_t>(v)];
    for (std::size_t f = 0; f < x[0].size(); ++f) {
        std::vector<double> vals;
        for (const auto& row : x) vals.push_back(row[f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double thr = vals[k] + (vals[k + 1] - vals[k]) / 2.0;
            std::vector<int> left(static_cast<std::size_t>(n_classes), 0), right = left;
            for (std::size_t i = 0; i < n; ++i) ++(x[i][f] <= thr ? left : right)[static_cast<std::size_t>(y[i])];
            double nl = 0, nr = 0;
            for (int c : left) nl += c;
            for (int c : right) nr += c;
            const double g = gini(parent) - (nl / n) * gini(left) - (nr / n) * gini(right);
            if (!best.found || g > best.gain) best = {true, g};
        }
    }
    return best;
}

/// Magnitude of DFT bin k over exactly one period of samples.
inline double dft_magnitude(const std::vector<double>& x, std::size_t k) {
    std::complex<double> acc = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * i) / n);
    return std::abs(acc) * 2.0 / n;
}

/// Total harmonic distortion of an integer number of periods, harmonics 2..max_h.
inline double thd(const std::vector<double>& x, std::size_t cycles, std::size_t max_h = 20) {
    const double fund = dft_magnitude(x, cycles);
    double h = 0;
    for (std::size_t k = 2; k <= max_h; ++k) {
        const double m = dft_magnitude(x, k * cycles);
        h += m * m;
    }
    return std::sqrt(h) / fund;
}

inline double rms(const std::vector<double>& x, std::size_t from, std::size_t to) {
    double s = 0;
    for (std::size_t i = from; i < to; ++i) s += x[i] * x[i];
    return std::sqrt(s / static_cast<double>(to - from));
}

}  // namespace oracle
