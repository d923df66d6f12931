// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "relreg/core/autodiff.hpp"
#include "relreg/core/param_store.hpp"
#include "relreg/dataset.hpp"

namespace relreg::tabrel {

/// Which key columns are hidden from which query rows.
enum class MaskScope {
    /// Non-background columns are hidden from every row.
    all_rows,
    /// Non-background rows may not attend other non-background rows; they
    /// still see themselves, and background rows see everything.
    trial_pairs,
};

struct TabRelConfig {
    std::size_t embed_dim = 32;
    std::size_t num_heads = 4;
    std::size_t depth = 2;
    double dropout = 0.1;
    /// Width of each scalar feature's embedding.
    std::size_t feature_embed_dim = 8;
    bool layer_norm = false;
    bool feed_forward = false;
    MaskScope mask_scope = MaskScope::all_rows;

    [[nodiscard]] std::size_t head_dim() const { return embed_dim / num_heads; }
    /// Throws ConfigError unless embed_dim % num_heads == 0, depth >= 1 and
    /// all widths are positive.
    void validate() const;
};

/// Learnable tensors, one ParamStore slot each:
///   embed.w, embed.b   F × E   per-feature affine maps (F = features + 1)
///   in.w, in.b         F·E × ed, 1 × ed
///   L<l>.wq/wk/wv/wo   ed × ed
///   L<l>.s             1 × nh  per-head relation scales, initialized to 0
///   L<l>.ff1/ff2       feed-forward block when enabled
///   head.w, head.b     ed × 1, 1 × 1, initialized to 0
struct TabRelParams {
    TabRelConfig config;
    std::size_t input_features = 0;
    ParamStore store;

    static TabRelParams init(const TabRelConfig& config, std::size_t input_features, std::mt19937_64& rng);
};

enum class BatchRole { trial, validation };

/// Transductive input: background rows first, then trial rows, then (for the
/// validation role) validation rows. Only background rows carry their y.
struct AttentionBatch {
    Matrix x_in;  // ns × (d+1), last column y
    Matrix r;     // ns × ns
    IndexList rows;
    std::size_t n_background = 0;
    std::size_t n_trial = 0;
    std::size_t n_validation = 0;

    [[nodiscard]] std::size_t size() const { return rows.size(); }
    [[nodiscard]] std::size_t n_masked() const { return n_trial + n_validation; }
};

AttentionBatch build_input_matrix(const RelDataset& data, const SplitIndex& split, BatchRole role);

/// Per-feature affine + ReLU embeddings, concatenated then projected to ed.
Matrix num_embed(const TabRelParams& params, const Matrix& x_in);

/// Head h bias = s_h · R.
std::vector<Matrix> build_rel_bias(const Matrix& r, std::span<const double> scales);

/// Disables the last `n_trial` key columns for every query row.
Mask build_trial_mask(std::size_t ns, std::size_t n_trial);
/// Disables trial-to-other-trial pairs only.
Mask build_trial_pair_mask(std::size_t ns, std::size_t n_trial);

/// Output of one relational attention layer.
struct RmhaResult {
    ad::Var output;
    /// Per-head attention weights (ns × ns), filled when requested.
    std::vector<Matrix> attention;
};

/// Where parameter values come from during a forward pass. With `bind`
/// set, leaves are bound to that store so backward fills its gradients.
struct ParamSource {
    const ParamStore* values = nullptr;
    ParamStore* bind = nullptr;

    static ParamSource constants(const ParamStore& store) { return {&store, nullptr}; }
    static ParamSource trainable(ParamStore& store) { return {&store, &store}; }

    ad::Var get(ad::Tape& tape, const std::string& name) const;
};

struct ForwardState {
    std::mt19937_64* rng = nullptr;
    bool training = false;
    bool keep_attention = false;
};

/// Records one RMHA layer: per head softmax(QₕKₕᵀ/√hd + sₕR, mask), weighted
/// sum of Vₕ, heads concatenated and projected, plus the residual input.
RmhaResult record_rmha(ad::Tape& tape, const ParamSource& source, const TabRelConfig& config, std::size_t layer,
                       ad::Var h, const Matrix& r, const Mask& mask, const ForwardState& state);

/// Constant-parameter convenience wrapper around `record_rmha`.
Matrix rmha_forward(const TabRelParams& params, std::size_t layer, const Matrix& h, const Matrix& r, const Mask& mask,
                    std::mt19937_64* rng = nullptr, bool training = false);

struct ForwardResult {
    ad::Var predictions;  // ns × 1
    std::vector<std::vector<Matrix>> attention;  // [layer][head]
};

ForwardResult record_forward(ad::Tape& tape, const ParamSource& source, const TabRelConfig& config,
                             const AttentionBatch& batch, const ForwardState& state);

/// Mask implied by `config.mask_scope` for a batch.
Mask batch_mask(const TabRelConfig& config, const AttentionBatch& batch);

/// One scalar prediction per batch row.
Vector tabrel_forward(const TabRelParams& params, const AttentionBatch& batch, bool training = false,
                      std::mt19937_64* rng = nullptr);

struct TabRelFitConfig {
    int epochs = 2000;
    double learning_rate = 1e-3;
    int patience = 200;
    double min_improvement = 1e-6;
    std::uint64_t seed = 0;
    double timeout_seconds = 0.0;
};

struct TabRelFit {
    TabRelParams params;
    Standardizer feature_scaler;
    double y_mean = 0.0;
    double y_scale = 1.0;
    std::vector<double> loss_curve;
    int epochs_run = 0;
    double trial_mse = 0.0;
    double trial_r2 = 0.0;
    double validation_mse = 0.0;
    double validation_r2 = 0.0;
    Vector trial_predictions;
    Vector validation_predictions;
};

/// Transductive training: validation rows sit in the batch as masked rows
/// with y = 0; the loss is the MSE over trial rows. Features and targets are
/// standardized with background statistics.
TabRelFit tabrel_fit(const RelDataset& data, const SplitIndex& split, const TabRelConfig& config,
                     const TabRelFitConfig& fit_config = {});

}  // namespace relreg::tabrel
