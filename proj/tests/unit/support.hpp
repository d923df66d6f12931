// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "relreg/core/matrix.hpp"

namespace testing {

inline relreg::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    relreg::Matrix m(rows, cols);
    for (double& v : m.data()) v = u(rng);
    return m;
}

inline relreg::Matrix random_binary_symmetric(std::size_t n, std::mt19937_64& rng) {
    std::bernoulli_distribution b(0.5);
    relreg::Matrix r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) r(i, j) = r(j, i) = b(rng) ? 1.0 : 0.0;
    return r;
}

/// Central difference of f at every entry of x.
inline relreg::Matrix numeric_gradient(const std::function<double(const relreg::Matrix&)>& f, relreg::Matrix x,
                                       double h = 1e-5) {
    relreg::Matrix g(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x.data()[i];
        x.data()[i] = keep + h;
        const double up = f(x);
        x.data()[i] = keep - h;
        const double down = f(x);
        x.data()[i] = keep;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max |a−b| / max(|b|, floor) over entries.
inline double max_rel_error(const relreg::Matrix& a, const relreg::Matrix& b, double floor = 1e-6) {
    double worst = 0.0;
    double scale = floor;
    for (double v : b.data()) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]) / scale);
    return worst;
}

}  // namespace testing
