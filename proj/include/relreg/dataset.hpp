// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "relreg/core/matrix.hpp"

namespace relreg {

/// Features, targets and the symmetric sample-to-sample relationship matrix.
struct RelDataset {
    Matrix x;
    Vector y;
    Matrix r;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    [[nodiscard]] std::size_t dims() const noexcept { return x.cols(); }

    /// Checks shapes, finiteness, non-negativity and symmetry of r (1e-12).
    void validate() const;

    /// Rows `rows` of x and y with the principal submatrix of r.
    [[nodiscard]] RelDataset subset(std::span<const std::size_t> rows) const;
};

/// Disjoint index sets: background rows supply the weighted targets, trial
/// rows drive the training loss, validation rows measure generalization.
struct SplitIndex {
    IndexList background;
    IndexList trial;
    IndexList validation;

    /// Throws ConfigError unless the sets are pairwise disjoint, within
    /// [0, n) and the background is nonempty.
    void validate(std::size_t n) const;
};

/// Column-wise affine standardization fitted on a subset of rows.
struct Standardizer {
    Vector mean;
    Vector scale;

    /// Statistics over `rows` of m (all rows when empty). Zero-variance
    /// columns get scale 1.
    static Standardizer fit(const Matrix& m, std::span<const std::size_t> rows = {});
    static Standardizer identity(std::size_t cols);

    [[nodiscard]] Matrix apply(const Matrix& m) const;
    [[nodiscard]] bool empty() const noexcept { return mean.empty(); }
};

}  // namespace relreg
