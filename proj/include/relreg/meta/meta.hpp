// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "relreg/dataset.hpp"
#include "relreg/nw/fit.hpp"
#include "relreg/tabrel/tabrel.hpp"

namespace relreg::meta {

/// Observational data with a binary treatment indicator.
struct TreatmentDataset {
    Matrix x;
    Vector w;
    Vector y;
    Matrix r;
    std::optional<Vector> tau_true;

    [[nodiscard]] std::size_t size() const noexcept { return y.size(); }
    /// Throws unless w is binary with both groups present and r is a valid
    /// relation matrix for the rows.
    void validate() const;
    [[nodiscard]] IndexList group(bool treated) const;
    [[nodiscard]] RelDataset outcome_dataset() const { return {x, y, r}; }
};

/// Predictions of a fitted base model on the trial and validation rows of
/// the split it was fitted on, in split order.
struct RegressorOutput {
    Vector trial;
    Vector validation;
};

/// Any regressor in the library behind a common transductive interface.
struct BaseRegressor {
    std::string tag;
    std::function<RegressorOutput(const RelDataset&, const SplitIndex&, std::uint64_t seed)> fit_predict;
};

BaseRegressor nw_regressor(nw::Variant variant, nw::FitConfig config = {});
BaseRegressor tabrel_regressor(tabrel::TabRelConfig config = {}, tabrel::TabRelFitConfig fit_config = {});

enum class LearnerKind { s, t, x };
std::string to_string(LearnerKind kind);
LearnerKind parse_learner(std::string_view text);

/// τ̂ on the validation rows and, in-sample, on the trial rows of the split.
struct CateEstimate {
    LearnerKind kind = LearnerKind::s;
    std::string base_tag;
    Vector tau_hat;
    Vector tau_hat_trial;
};

/// One model on [X | W]; τ̂(x) = μ̂(x, 1) − μ̂(x, 0) with x's relation row.
CateEstimate s_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed);
/// Separate models per treatment group with relations restricted to the group.
CateEstimate t_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed);
/// T-learner stage followed by imputed-effect models; τ̂ = ½(τ̂₀ + τ̂₁).
CateEstimate x_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed);
CateEstimate run_learner(LearnerKind kind, const TreatmentDataset& data, const SplitIndex& split,
                         const BaseRegressor& base, std::uint64_t seed);

/// Mean squared difference between estimated and true effects.
double pehe(std::span<const double> tau_hat, std::span<const double> tau_true);

/// Principal submatrix r[rows, rows].
Matrix restrict_relations(const Matrix& r, std::span<const std::size_t> rows);

/// Drops the categorical column `category_col` from x and relates rows that
/// share its value.
TreatmentDataset build_ihdp_rel(const Matrix& x, Vector w, Vector y, std::optional<Vector> tau_true,
                                std::size_t category_col);

/// Parabola outcomes over three relation clusters with a constant effect:
/// Y(1) = Y(0) + effect, treatment assigned by a fair coin.
TreatmentDataset gen_additive_effect(std::size_t n, double effect, std::uint64_t seed, double noise_std = 0.0);

}  // namespace relreg::meta
