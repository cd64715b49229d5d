#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pvrelay {

/// Dense row-major feature matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rs) {
        Matrix m;
        m.rows = rs.size();
        m.cols = rs.empty() ? 0 : rs[0].size();
        m.data.reserve(m.rows * m.cols);
        for (const auto& r : rs) {
            if (r.size() != m.cols) throw std::invalid_argument("Matrix: ragged rows");
            m.data.insert(m.data.end(), r.begin(), r.end());
        }
        return m;
    }

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    void push_row(std::span<const double> r) {
        if (rows == 0 && cols == 0) cols = r.size();
        if (r.size() != cols) throw std::invalid_argument("Matrix: row width mismatch");
        data.insert(data.end(), r.begin(), r.end());
        ++rows;
    }

    Matrix select_rows(const std::vector<std::size_t>& idx) const {
        Matrix m(idx.size(), cols);
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                        m.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
        return m;
    }

    Matrix select_cols(const std::vector<std::size_t>& idx) const {
        Matrix m(rows, idx.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j) m(r, j) = (*this)(r, idx[j]);
        return m;
    }
};

/// Class names sorted lexicographically; labels are indices into this list.
struct ClassList {
    std::vector<std::string> names;

    static ClassList from_labels(std::vector<std::string> labels) {
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        return {labels};
    }

    std::size_t size() const { return names.size(); }

    int index_of(const std::string& name) const {
        const auto it = std::lower_bound(names.begin(), names.end(), name);
        if (it == names.end() || *it != name) throw std::invalid_argument("unknown class '" + name + "'");
        return static_cast<int>(it - names.begin());
    }

    std::vector<int> encode(const std::vector<std::string>& labels) const {
        std::vector<int> out;
        out.reserve(labels.size());
        for (const auto& l : labels) out.push_back(index_of(l));
        return out;
    }
};

}  // namespace pvrelay
