// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "relreg/core/autodiff.hpp"
#include "relreg/core/matrix.hpp"
#include "relreg/dataset.hpp"
#include "relreg/nw/mlp.hpp"

namespace relreg::nw {

enum class Variant { vanilla, rel_kernel, rel_features, learnable_norm, mlp_embed };

std::string_view to_string(Variant v);
/// Throws ConfigError for unknown names.
Variant parse_variant(std::string_view name);
/// True for variants whose kernel carries the γ·r term.
bool uses_relation_term(Variant v);

/// A fitted (or hand-built) Nadaraya-Watson estimator.
///
/// The kernel exponent between query s and background row i is
///   vanilla        −‖x_s − x_i‖² / σ
///   rel_kernel     −‖x_s − x_i‖² / σ + γ r_si
///   rel_features   −(‖x_s − x_i‖² + Ω_si) / σ,   Ω_si = Σ_p (r_sp − r_ip)²
///   learnable_norm −Σ_k w_k² (x_sk − x_ik)² + γ r_si
///   mlp_embed      −‖g(x_s) − g(x_i)‖² / σ + γ r_si
/// with σ = exp(log_sigma). Features pass through `scaler` first.
struct NwModel {
    Variant variant = Variant::vanilla;
    double log_sigma = 0.0;
    double gamma = 0.0;
    Vector w;
    std::optional<Mlp> mlp;
    Standardizer scaler;

    [[nodiscard]] double sigma() const;
};

/// Background rows of a dataset as seen by the estimator.
struct Background {
    const Matrix& x;
    std::span<const double> y;
    /// Relation rows of the background points (n_b × P); used by rel_features only.
    const Matrix* relation_rows = nullptr;
};

Vector nw_predict_vanilla(const NwModel& model, const Background& background, const Matrix& queries);

/// `r_query` is n_q × n_b.
Vector nw_predict_rel(const NwModel& model, const Background& background, const Matrix& queries,
                      const Matrix& r_query);

/// `r_query` is n_q × P, aligned with `background.relation_rows`.
Vector nw_predict_rel_features(const NwModel& model, const Background& background, const Matrix& queries,
                               const Matrix& r_query);

Vector nw_predict_learnable_norm(const NwModel& model, const Background& background, const Matrix& queries,
                                 const Matrix& r_query);

Vector nw_predict_mlp(const NwModel& model, const Background& background, const Matrix& queries,
                      const Matrix& r_query);

/// Dispatches on `model.variant`. `self_index[s]` names the background row
/// that is the query itself (−1 for none); such pairs get zero weight.
Vector nw_predict(const NwModel& model, const Background& background, const Matrix& queries,
                  const Matrix& r_query, std::span<const std::ptrdiff_t> self_index = {});

/// Normalized kernel weights (n_q × n_b) behind `nw_predict`.
Matrix nw_weights(const NwModel& model, const Background& background, const Matrix& queries,
                  const Matrix& r_query, std::span<const std::ptrdiff_t> self_index = {});

/// Parameter handles for one forward pass; constants at prediction time,
/// ParamStore-bound leaves while fitting.
struct NwVars {
    std::optional<ad::Var> log_sigma;
    std::optional<ad::Var> gamma;
    std::optional<ad::Var> w;
    std::optional<MlpVars> mlp;
    double mlp_dropout = 0.0;
};

/// Inputs of one forward pass, already standardized.
struct NwGraphInputs {
    const Matrix* background_x = nullptr;
    const Matrix* background_y = nullptr;  // n_b × 1
    const Matrix* queries = nullptr;
    const Matrix* r_query = nullptr;       // n_q × n_b (relation-term variants)
    const Matrix* omega = nullptr;         // n_q × n_b (rel_features)
    const Mask* mask = nullptr;            // n_q × n_b
};

struct NwGraph {
    ad::Var weights;      // n_q × n_b
    ad::Var predictions;  // n_q × 1
};

/// Records the forward pass of `variant` on `tape`.
NwGraph record_nw_graph(ad::Tape& tape, Variant variant, const NwVars& vars, const NwGraphInputs& in,
                        std::mt19937_64* rng, bool training);

/// Ω between query relation rows and background relation rows.
Matrix relation_row_distance(const Matrix& query_rows, const Matrix& background_rows);

/// Mask excluding each query's own background row.
std::optional<Mask> self_mask(std::size_t n_queries, std::size_t n_background,
                              std::span<const std::ptrdiff_t> self_index);

}  // namespace relreg::nw
