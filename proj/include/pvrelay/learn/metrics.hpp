#pragma once

#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvrelay {

/// 1 - sum p_i^2 over class counts.
template <class Count>
double gini(std::span<const Count> counts) {
    double total = 0.0;
    for (auto c : counts) {
        if (c < 0) throw std::invalid_argument("gini: negative count");
        total += static_cast<double>(c);
    }
    if (total == 0.0) throw std::invalid_argument("gini: all counts are zero");
    double s = 0.0;
    for (auto c : counts) {
        const double p = static_cast<double>(c) / total;
        s += p * p;
    }
    return 1.0 - s;
}

inline double gini(const std::vector<double>& counts) { return gini(std::span<const double>(counts)); }

namespace metrics_detail {

inline std::vector<double> recalls(const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t c,
                                   std::vector<std::size_t>& support) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("metric: length mismatch");
    support.assign(c, 0);
    std::vector<double> hit(c, 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i];
        if (t < 0 || static_cast<std::size_t>(t) >= c) throw std::invalid_argument("metric: label out of range");
        ++support[static_cast<std::size_t>(t)];
        if (y_pred[i] == t) hit[static_cast<std::size_t>(t)] += 1.0;
    }
    return hit;
}

}  // namespace metrics_detail

/// Macro recall over classes 0..n_classes-1; every class must occur in y_true.
inline double balanced_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred, std::size_t n_classes) {
    std::vector<std::size_t> support;
    const auto hit = metrics_detail::recalls(y_true, y_pred, n_classes, support);
    double s = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (support[c] == 0)
            throw std::domain_error("balanced_accuracy: class " + std::to_string(c) + " absent from y_true");
        s += hit[c] / static_cast<double>(support[c]);
    }
    return s / static_cast<double>(n_classes);
}

/// Macro recall over the classes that occur in y_true (subset reports).
inline double balanced_accuracy_present(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                        std::size_t n_classes) {
    std::vector<std::size_t> support;
    const auto hit = metrics_detail::recalls(y_true, y_pred, n_classes, support);
    double s = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (support[c] == 0) continue;
        s += hit[c] / static_cast<double>(support[c]);
        ++present;
    }
    if (present == 0) throw std::domain_error("balanced_accuracy: empty y_true");
    return s / static_cast<double>(present);
}

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::size_t>> counts;  // rows: true, cols: predicted

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& r : counts)
            for (auto v : r) t += v;
        return t;
    }
};

inline ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                 const std::vector<std::string>& classes) {
    if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion: length mismatch");
    const std::size_t c = classes.size();
    ConfusionMatrix m{classes, std::vector<std::vector<std::size_t>>(c, std::vector<std::size_t>(c, 0))};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int t = y_true[i], p = y_pred[i];
        if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= c || static_cast<std::size_t>(p) >= c)
            throw std::invalid_argument("confusion: label outside the class list");
        ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    }
    return m;
}

inline void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
    out << "true\\pred";
    for (const auto& c : m.classes) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < m.classes.size(); ++i) {
        out << m.classes[i];
        for (auto v : m.counts[i]) out << ',' << v;
        out << '\n';
    }
}

}  // namespace pvrelay
