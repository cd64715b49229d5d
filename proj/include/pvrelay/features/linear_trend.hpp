#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pvrelay/features/stats.hpp"

namespace pvrelay {

/// Least-squares line through (i, y_i), i = 0..n-1, with the usual diagnostics.
struct LinTrendAttrs {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson_r = 0.0;
    double p_value = 1.0;
    double stderr_slope = 0.0;
};

enum class TrendAttribute { pvalue, rvalue, intercept, slope, stderr_slope };
enum class Aggregator { mean, variance, max, min };

inline constexpr TrendAttribute kTrendAttributes[] = {TrendAttribute::pvalue, TrendAttribute::rvalue,
                                                      TrendAttribute::intercept, TrendAttribute::slope,
                                                      TrendAttribute::stderr_slope};
inline constexpr Aggregator kAggregators[] = {Aggregator::mean, Aggregator::variance, Aggregator::max,
                                              Aggregator::min};

inline std::string_view to_string(TrendAttribute a) {
    switch (a) {
        case TrendAttribute::pvalue: return "pvalue";
        case TrendAttribute::rvalue: return "rvalue";
        case TrendAttribute::intercept: return "intercept";
        case TrendAttribute::slope: return "slope";
        case TrendAttribute::stderr_slope: return "stderr";
    }
    return "?";
}

inline std::string_view to_string(Aggregator a) {
    switch (a) {
        case Aggregator::mean: return "mean";
        case Aggregator::variance: return "variance";
        case Aggregator::max: return "max";
        case Aggregator::min: return "min";
    }
    return "?";
}

inline double project(const LinTrendAttrs& t, TrendAttribute a) {
    switch (a) {
        case TrendAttribute::pvalue: return t.p_value;
        case TrendAttribute::rvalue: return t.pearson_r;
        case TrendAttribute::intercept: return t.intercept;
        case TrendAttribute::slope: return t.slope;
        case TrendAttribute::stderr_slope: return t.stderr_slope;
    }
    return 0.0;
}

namespace detail {

inline double clamp_correlation(double r) {
    // Rounding may push |r| a hair past 1; anything larger is a bug upstream.
    if (std::fabs(r) > 1.0 + 1e-12) throw std::logic_error("correlation outside [-1, 1]");
    return std::clamp(r, -1.0, 1.0);
}

}  // namespace detail

/// Regression of y against its 0-based index.
///
/// Degenerate cases: a constant series yields r = 0, slope 0, p = 1; two points
/// fit exactly (stderr 0, p = 1); an exact non-constant line with n > 2 has p = 0.
inline LinTrendAttrs linregress(std::span<const double> y) {
    const std::size_t n = y.size();
    if (n < 2) throw std::invalid_argument("linregress: need at least 2 points");
    const double nd = static_cast<double>(n);
    const double x_mean = (nd - 1.0) / 2.0;
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= nd;

    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = static_cast<double>(i) - x_mean;
        const double dy = y[i] - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }

    LinTrendAttrs out;
    if (syy == 0.0) {
        out.intercept = y_mean;
        return out;
    }
    out.slope = sxy / sxx;
    out.intercept = y_mean - out.slope * x_mean;
    out.pearson_r = detail::clamp_correlation(sxy / std::sqrt(sxx * syy));
    if (n == 2) return out;

    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (out.intercept + out.slope * static_cast<double>(i));
        ss_res += e * e;
    }
    const double dof = nd - 2.0;
    out.stderr_slope = std::sqrt(ss_res / dof / sxx);
    if (out.stderr_slope == 0.0) {
        out.p_value = 0.0;
    } else {
        out.p_value = stats::student_t_two_sided(out.slope / out.stderr_slope, dof);
    }
    return out;
}

/// Pearson correlation of two equal-length sequences; 0 when either has zero variance.
inline double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson_r: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson_r: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return detail::clamp_correlation(sxy / std::sqrt(sxx * syy));
}

inline std::size_t segment_count(std::size_t length, std::size_t segment_size) {
    return (length + segment_size - 1) / segment_size;
}

/// Collapses contiguous chunks of `segment_size` samples into one value each.
/// The final chunk may be shorter; variance is the population variance.
inline std::vector<double> aggregate_segments(std::span<const double> series, std::size_t segment_size,
                                              Aggregator agg) {
    if (segment_size == 0) throw std::invalid_argument("aggregate_segments: segment_size must be >= 1");
    if (series.empty()) throw std::invalid_argument("aggregate_segments: empty series");
    std::vector<double> out;
    out.reserve(segment_count(series.size(), segment_size));
    for (std::size_t start = 0; start < series.size(); start += segment_size) {
        const auto chunk = series.subspan(start, std::min(segment_size, series.size() - start));
        const double len = static_cast<double>(chunk.size());
        switch (agg) {
            case Aggregator::mean: {
                double s = 0.0;
                for (double v : chunk) s += v;
                out.push_back(s / len);
                break;
            }
            case Aggregator::variance: {
                double s = 0.0;
                for (double v : chunk) s += v;
                const double m = s / len;
                double ss = 0.0;
                for (double v : chunk) ss += (v - m) * (v - m);
                out.push_back(ss / len);
                break;
            }
            case Aggregator::max: out.push_back(*std::max_element(chunk.begin(), chunk.end())); break;
            case Aggregator::min: out.push_back(*std::min_element(chunk.begin(), chunk.end())); break;
        }
    }
    return out;
}

/// Combined linear trend: regression over segment aggregates.
inline LinTrendAttrs clt_attrs(std::span<const double> series, std::size_t segment_size, Aggregator agg) {
    if (segment_size == 0 || series.empty() || segment_count(series.size(), segment_size) < 2)
        throw std::invalid_argument("clt: fewer than 2 segments");
    const auto aggregated = aggregate_segments(series, segment_size, agg);
    return linregress(aggregated);
}

inline double clt(std::span<const double> series, std::size_t segment_size, Aggregator agg,
                  TrendAttribute attribute) {
    return project(clt_attrs(series, segment_size, agg), attribute);
}

}  // namespace pvrelay
