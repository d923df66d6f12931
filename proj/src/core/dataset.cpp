// SPDX-License-Identifier: Apache-2.0
#include "relreg/dataset.hpp"

#include <cmath>
#include <set>

#include "relreg/core/error.hpp"

namespace relreg {

void RelDataset::validate() const {
    const std::size_t n = y.size();
    if (n == 0) throw ConfigError("dataset is empty");
    if (x.rows() != n) throw ShapeError("feature rows " + std::to_string(x.rows()) + " != targets " + std::to_string(n));
    if (r.rows() != n || r.cols() != n) throw ShapeError("relation matrix must be " + std::to_string(n) + "x" + std::to_string(n));
    if (!x.all_finite()) throw ConfigError("features contain non-finite values");
    for (double v : y)
        if (!std::isfinite(v)) throw ConfigError("targets contain non-finite values");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = r(i, j);
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("relation matrix entries must be finite and nonnegative");
            if (j > i && std::abs(v - r(j, i)) > 1e-12) {
                throw ConfigError("relation matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

RelDataset RelDataset::subset(std::span<const std::size_t> rows) const {
    RelDataset out;
    out.x = select_rows(x, rows);
    out.y.reserve(rows.size());
    for (std::size_t i : rows) out.y.push_back(y.at(i));
    out.r = select(r, rows, rows);
    return out;
}

void SplitIndex::validate(std::size_t n) const {
    if (background.empty()) throw ConfigError("background set is empty");
    std::set<std::size_t> seen;
    for (const IndexList* part : {&background, &trial, &validation}) {
        for (std::size_t i : *part) {
            if (i >= n) throw ConfigError("split index " + std::to_string(i) + " out of range for " + std::to_string(n) + " rows");
            if (!seen.insert(i).second) throw ConfigError("split index " + std::to_string(i) + " appears twice");
        }
    }
}

Standardizer Standardizer::fit(const Matrix& m, std::span<const std::size_t> rows) {
    IndexList all;
    if (rows.empty()) {
        all.resize(m.rows());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        rows = all;
    }
    Standardizer s;
    s.mean.assign(m.cols(), 0.0);
    s.scale.assign(m.cols(), 1.0);
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double mu = 0.0;
        for (std::size_t i : rows) mu += m(i, c);
        mu /= n;
        double var = 0.0;
        for (std::size_t i : rows) var += (m(i, c) - mu) * (m(i, c) - mu);
        var /= n;
        s.mean[c] = mu;
        s.scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Standardizer Standardizer::identity(std::size_t cols) {
    return Standardizer{Vector(cols, 0.0), Vector(cols, 1.0)};
}

Matrix Standardizer::apply(const Matrix& m) const {
    if (empty()) return m;
    if (m.cols() != mean.size()) throw ShapeError("standardizer expects " + std::to_string(mean.size()) + " columns");
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / scale[c];
    return out;
}

}  // namespace relreg
