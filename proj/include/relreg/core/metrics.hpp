// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

namespace relreg {

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual);

/// Coefficient of determination, 1 − SSE/SST with SST taken around the mean
/// of `actual`. Returns 0 when `actual` is constant and the fit is exact,
/// −inf when it is constant and the fit is not.
double r_squared(std::span<const double> predicted, std::span<const double> actual);

double mean(std::span<const double> values);
/// Sample standard deviation (n−1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> values);

}  // namespace relreg
