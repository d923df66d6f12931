// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "relreg/core/param_store.hpp"
#include "relreg/dataset.hpp"
#include "relreg/nw/nw.hpp"

namespace relreg::nw {

struct FitConfig {
    int epochs = 500;
    double learning_rate = 0.05;
    /// Learning rate for MLP weights (mlp_embed); σ and γ keep `learning_rate`.
    double mlp_learning_rate = 1e-3;
    int patience = 50;
    double min_improvement = 1e-6;
    bool standardize = true;
    MlpConfig mlp;
    std::uint64_t seed = 0;
    /// Wall-clock limit per fit in seconds; 0 disables the guard.
    double timeout_seconds = 0.0;
};

struct FitResult {
    NwModel model;
    std::vector<double> loss_curve;
    int epochs_run = 0;
    double initial_trial_mse = 0.0;
    double trial_mse = 0.0;
    double trial_r2 = 0.0;
    /// NaN when the split has no validation rows.
    double validation_mse = 0.0;
    double validation_r2 = 0.0;
    Vector trial_predictions;
    Vector validation_predictions;
};

/// Full-batch Adam on the trial-set MSE with background rows as the kernel
/// support. Parameters start at the vanilla baseline (σ = 1, γ = 0, w = 1)
/// and the best trial-loss iterate is returned. Throws DivergedError with the
/// epoch on a non-finite loss.
FitResult nw_fit(const RelDataset& data, const SplitIndex& split, Variant variant, const FitConfig& config = {});

/// Predictions for `rows` of `data` from a model fitted on `split`.
Vector nw_predict_rows(const NwModel& model, const RelDataset& data, const SplitIndex& split,
                       std::span<const std::size_t> rows);

}  // namespace relreg::nw
