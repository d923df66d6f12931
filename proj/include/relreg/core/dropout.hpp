// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "relreg/core/matrix.hpp"

namespace relreg {

/// Keep-mask scaled by 1/(1−rate): entries are 0 or 1/(1−rate).
/// Throws ConfigError unless 0 <= rate < 1.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64& rng);

/// Inverted dropout. Identity when `training` is false or `rate` is 0;
/// the generator is not advanced in either case.
Matrix dropout_apply(const Matrix& m, double rate, std::mt19937_64& rng, bool training);

}  // namespace relreg
