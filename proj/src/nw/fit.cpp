// SPDX-License-Identifier: Apache-2.0
#include "relreg/nw/fit.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "relreg/core/error.hpp"
#include "relreg/core/metrics.hpp"

namespace relreg::nw {

namespace {


Vector pick(const Vector& v, std::span<const std::size_t> rows) {
    Vector out;
    out.reserve(rows.size());
    for (std::size_t i : rows) out.push_back(v[i]);
    return out;
}

/// Standardized features and relation inputs for one query set.
struct QuerySet {
    Matrix x;
    Matrix r_query;
    Matrix omega;
    Vector y;
};

QuerySet make_query_set(const Matrix& xs, const RelDataset& data, const IndexList& background,
                        std::span<const std::size_t> rows, Variant variant, const Matrix* background_rows) {
    QuerySet q;
    q.x = select_rows(xs, rows);
    q.y = pick(data.y, rows);
    if (uses_relation_term(variant)) q.r_query = select(data.r, rows, background);
    if (variant == Variant::rel_features) {
        q.omega = relation_row_distance(select(data.r, rows, background), *background_rows);
    }
    return q;
}

NwVars bind(ad::Tape& tape, ParamStore& store, Variant variant, double mlp_dropout) {
    NwVars vars;
    if (store.contains("log_sigma")) vars.log_sigma = tape.param(store, "log_sigma");
    if (store.contains("gamma")) vars.gamma = tape.param(store, "gamma");
    if (store.contains("w")) vars.w = tape.param(store, "w");
    if (variant == Variant::mlp_embed) {
        MlpVars m;
        for (std::size_t l = 0; l < 3; ++l) {
            m.weights[l] = tape.param(store, "mlp.w" + std::to_string(l));
            m.biases[l] = tape.param(store, "mlp.b" + std::to_string(l));
        }
        vars.mlp = m;
        vars.mlp_dropout = mlp_dropout;
    }
    return vars;
}

NwModel model_from(const ParamStore& store, Variant variant, const Standardizer& scaler, double mlp_dropout) {
    NwModel model;
    model.variant = variant;
    model.scaler = scaler;
    if (store.contains("log_sigma")) model.log_sigma = store.scalar("log_sigma");
    if (store.contains("gamma")) model.gamma = store.scalar("gamma");
    if (store.contains("w")) model.w = store.value("w").storage();
    if (variant == Variant::mlp_embed) {
        Mlp mlp;
        for (std::size_t l = 0; l < 3; ++l) {
            mlp.weights[l] = store.value("mlp.w" + std::to_string(l));
            mlp.biases[l] = store.value("mlp.b" + std::to_string(l));
        }
        mlp.dropout = mlp_dropout;
        model.mlp = std::move(mlp);
    }
    return model;
}

}  // namespace

FitResult nw_fit(const RelDataset& data, const SplitIndex& split, Variant variant, const FitConfig& config) {
    data.validate();
    split.validate(data.size());
    if (split.trial.empty()) throw ConfigError("trial set is empty");
    if (config.epochs < 0) throw ConfigError("epochs must be nonnegative");

    const Standardizer scaler = config.standardize ? Standardizer::fit(data.x, split.background)
                                                   : Standardizer::identity(data.dims());
    const Matrix xs = scaler.apply(data.x);
    const Matrix bx = select_rows(xs, split.background);
    const Matrix by = Matrix::column(pick(data.y, split.background));
    std::optional<Matrix> background_rows;
    if (variant == Variant::rel_features) background_rows = select(data.r, split.background, split.background);
    const QuerySet trial = make_query_set(xs, data, split.background, split.trial, variant,
                                          background_rows ? &*background_rows : nullptr);
    const Matrix trial_y = Matrix::column(trial.y);

    std::mt19937_64 rng(config.seed);
    ParamStore store;
    if (variant != Variant::learnable_norm) store.add("log_sigma", Matrix::scalar(0.0));
    if (uses_relation_term(variant)) store.add("gamma", Matrix::scalar(0.0));
    if (variant == Variant::learnable_norm) store.add("w", Matrix(1, data.dims(), 1.0));
    const double mlp_dropout = config.mlp.dropout;
    if (variant == Variant::mlp_embed) {
        Mlp init = Mlp::init(data.dims(), config.mlp, rng);
        const double scale = config.learning_rate > 0.0 ? config.mlp_learning_rate / config.learning_rate : 1.0;
        for (std::size_t l = 0; l < 3; ++l) {
            store.add("mlp.w" + std::to_string(l), init.weights[l], scale);
            store.add("mlp.b" + std::to_string(l), init.biases[l], scale);
        }
    }

    NwGraphInputs in;
    in.background_x = &bx;
    in.background_y = &by;
    in.queries = &trial.x;
    in.r_query = uses_relation_term(variant) ? &trial.r_query : nullptr;
    in.omega = variant == Variant::rel_features ? &trial.omega : nullptr;

    const AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
    const auto start = std::chrono::steady_clock::now();
    FitResult result;
    ParamStore best = store;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        ad::Tape tape;
        NwGraph graph = record_nw_graph(tape, variant, bind(tape, store, variant, mlp_dropout), in, &rng, true);
        ad::Var loss = ad::mse(graph.predictions, trial_y);
        const double lv = loss.value()(0, 0);
        if (!std::isfinite(lv)) throw DivergedError("NW fit diverged at epoch " + std::to_string(epoch));
        result.loss_curve.push_back(lv);
        // With dropout the training loss is noisy; the best iterate is judged on it anyway.
        if (lv < best_loss - config.min_improvement) {
            best_loss = lv;
            best = store;
            since_improvement = 0;
        } else if (++since_improvement >= config.patience) {
            break;
        }
        compute_gradients(tape, loss, store);
        try {
            adam_step(store, adam, epoch + 1);
        } catch (const DivergedError& e) {
            throw DivergedError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
        }
        result.epochs_run = epoch + 1;
        if (config.timeout_seconds > 0.0) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            if (elapsed.count() > config.timeout_seconds) {
                throw TimeoutError("NW fit exceeded " + std::to_string(config.timeout_seconds) + " s at epoch " +
                                   std::to_string(epoch));
            }
        }
    }
    if (config.epochs == 0) best = store;

    result.model = model_from(best, variant, scaler, mlp_dropout);
    result.trial_predictions = nw_predict_rows(result.model, data, split, split.trial);
    const Vector& trial_pred = result.trial_predictions;
    result.initial_trial_mse = result.loss_curve.empty() ? mean_squared_error(trial_pred, trial.y)
                                                         : result.loss_curve.front();
    result.trial_mse = mean_squared_error(trial_pred, trial.y);
    result.trial_r2 = r_squared(trial_pred, trial.y);
    if (split.validation.empty()) {
        result.validation_mse = std::numeric_limits<double>::quiet_NaN();
        result.validation_r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        result.validation_predictions = nw_predict_rows(result.model, data, split, split.validation);
        const Vector vy = pick(data.y, split.validation);
        result.validation_mse = mean_squared_error(result.validation_predictions, vy);
        result.validation_r2 = r_squared(result.validation_predictions, vy);
    }
    return result;
}

Vector nw_predict_rows(const NwModel& model, const RelDataset& data, const SplitIndex& split,
                       std::span<const std::size_t> rows) {
    const Matrix bx = select_rows(data.x, split.background);
    const Vector by = pick(data.y, split.background);
    const Matrix qx = select_rows(data.x, rows);
    std::vector<std::ptrdiff_t> self(rows.size(), -1);
    bool any_self = false;
    for (std::size_t s = 0; s < rows.size(); ++s) {
        for (std::size_t i = 0; i < split.background.size(); ++i) {
            if (split.background[i] == rows[s]) {
                self[s] = static_cast<std::ptrdiff_t>(i);
                any_self = true;
                break;
            }
        }
    }
    std::span<const std::ptrdiff_t> self_span = any_self ? std::span<const std::ptrdiff_t>(self)
                                                         : std::span<const std::ptrdiff_t>();
    if (model.variant == Variant::rel_features) {
        const Matrix brows = select(data.r, split.background, split.background);
        const Matrix qrows = select(data.r, rows, split.background);
        Background bg{bx, by, &brows};
        return nw_predict(model, bg, qx, qrows, self_span);
    }
    Background bg{bx, by, nullptr};
    const Matrix rq = select(data.r, rows, split.background);
    return nw_predict(model, bg, qx, rq, self_span);
}

}  // namespace relreg::nw
