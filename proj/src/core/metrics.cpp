// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/metrics.hpp"

#include <cmath>
#include <limits>

#include "relreg/core/error.hpp"

namespace relreg {

namespace {
void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    if (a.empty()) throw ShapeError("metric of empty vectors");
}
}  // namespace

double mean_squared_error(std::span<const double> predicted, std::span<const double> actual) {
    check_lengths(predicted, actual);
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double d = predicted[i] - actual[i];
        total += d * d;
    }
    return total / static_cast<double>(actual.size());
}

double r_squared(std::span<const double> predicted, std::span<const double> actual) {
    check_lengths(predicted, actual);
    const double mu = mean(actual);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        sse += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
        sst += (actual[i] - mu) * (actual[i] - mu);
    }
    if (sst == 0.0) return sse == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - sse / sst;
}

double mean(std::span<const double> values) {
    if (values.empty()) throw ShapeError("mean of an empty vector");
    double total = 0.0;
    for (double v : values) total += v;
    return total / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double mu = mean(values);
    double acc = 0.0;
    for (double v : values) acc += (v - mu) * (v - mu);
    return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

}  // namespace relreg
