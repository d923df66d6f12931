// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/dropout.hpp"

#include <cstdint>

#include "relreg/core/error.hpp"

namespace relreg {

namespace {
void check_rate(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must satisfy 0 <= rate < 1, got " + std::to_string(rate));
    }
}
}  // namespace

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng) {
    check_rate(rate);
    Matrix mask(rows, cols, 1.0);
    if (rate == 0.0) return mask;
    // Each 64-bit draw yields two 32-bit uniforms.
    const auto threshold = static_cast<std::uint64_t>(rate * 4294967296.0);
    const double scale = 1.0 / (1.0 - rate);
    auto data = mask.data();
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (i % 2 == 0) bits = rng();
        const std::uint64_t u = (i % 2 == 0) ? (bits & 0xffffffffULL) : (bits >> 32);
        data[i] = u < threshold ? 0.0 : scale;
    }
    return mask;
}

Matrix dropout_apply(const Matrix& m, double rate, std::mt19937_64& rng, bool training) {
    check_rate(rate);
    if (!training || rate == 0.0) return m;
    return hadamard(m, dropout_mask(m.rows(), m.cols(), rate, rng));
}

}  // namespace relreg
