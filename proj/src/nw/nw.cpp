// SPDX-License-Identifier: Apache-2.0
#include "relreg/nw/nw.hpp"

#include <cmath>

#include "relreg/core/error.hpp"

namespace relreg::nw {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::vanilla: return "vanilla";
        case Variant::rel_kernel: return "rel_kernel";
        case Variant::rel_features: return "rel_features";
        case Variant::learnable_norm: return "learnable_norm";
        case Variant::mlp_embed: return "mlp_embed";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    for (Variant v : {Variant::vanilla, Variant::rel_kernel, Variant::rel_features, Variant::learnable_norm,
                      Variant::mlp_embed}) {
        if (to_string(v) == name) return v;
    }
    throw ConfigError("unknown NW variant '" + std::string(name) + "'");
}

bool uses_relation_term(Variant v) {
    return v == Variant::rel_kernel || v == Variant::learnable_norm || v == Variant::mlp_embed;
}

double NwModel::sigma() const { return std::exp(log_sigma); }

Matrix relation_row_distance(const Matrix& query_rows, const Matrix& background_rows) {
    if (query_rows.cols() != background_rows.cols()) {
        throw ShapeError("relation rows differ in width: " + query_rows.shape_string() + " vs " +
                         background_rows.shape_string());
    }
    ad::Tape tape;
    return ad::pairwise_sqdist(tape.constant(query_rows), tape.constant(background_rows)).value();
}

std::optional<Mask> self_mask(std::size_t n_queries, std::size_t n_background,
                              std::span<const std::ptrdiff_t> self_index) {
    if (self_index.empty()) return std::nullopt;
    if (self_index.size() != n_queries) throw ShapeError("self_index length must equal the number of queries");
    Mask mask(n_queries, n_background);
    bool any = false;
    for (std::size_t s = 0; s < n_queries; ++s) {
        const std::ptrdiff_t i = self_index[s];
        if (i < 0) continue;
        if (static_cast<std::size_t>(i) >= n_background) throw ShapeError("self_index entry out of range");
        mask.set(s, static_cast<std::size_t>(i), true);
        any = true;
    }
    if (!any) return std::nullopt;
    return mask;
}

NwGraph record_nw_graph(ad::Tape& tape, Variant variant, const NwVars& vars, const NwGraphInputs& in,
                        std::mt19937_64* rng, bool training) {
    const Matrix& bx = *in.background_x;
    const Matrix& q = *in.queries;
    if (bx.rows() == 0) throw ConfigError("background is empty");
    if (q.cols() != bx.cols()) {
        throw ShapeError("query dimension " + std::to_string(q.cols()) + " != background dimension " +
                         std::to_string(bx.cols()));
    }
    const std::size_t nq = q.rows(), nb = bx.rows();

    ad::Var xb = tape.constant(bx);
    ad::Var xq = tape.constant(q);
    ad::Var dist;
    switch (variant) {
        case Variant::vanilla:
        case Variant::rel_kernel:
        case Variant::rel_features:
            dist = ad::pairwise_sqdist(xq, xb);
            break;
        case Variant::learnable_norm:
            if (!vars.w) throw ConfigError("learnable_norm requires feature weights w");
            if (vars.w->cols() != bx.cols()) {
                throw ShapeError("feature weight length " + std::to_string(vars.w->cols()) + " != feature count " +
                                 std::to_string(bx.cols()));
            }
            dist = ad::pairwise_sqdist(xq, xb, ad::square(*vars.w));
            break;
        case Variant::mlp_embed: {
            if (!vars.mlp) throw ConfigError("mlp_embed requires MLP parameters");
            ad::Var eq = mlp_forward(*vars.mlp, xq, vars.mlp_dropout, rng, training);
            ad::Var eb = mlp_forward(*vars.mlp, xb, vars.mlp_dropout, rng, training);
            dist = ad::pairwise_sqdist(eq, eb);
            break;
        }
    }

    if (variant == Variant::rel_features) {
        if (in.omega == nullptr) throw ConfigError("rel_features requires relation rows");
        if (in.omega->rows() != nq || in.omega->cols() != nb) throw ShapeError("relation distance shape mismatch");
        dist = ad::add(dist, tape.constant(*in.omega));
    }

    ad::Var logits;
    if (variant == Variant::learnable_norm) {
        logits = ad::scale(dist, -1.0);
    } else {
        if (!vars.log_sigma) throw ConfigError("variant requires log_sigma");
        ad::Var neg_inv_sigma = ad::scale(ad::exp(ad::scale(*vars.log_sigma, -1.0)), -1.0);
        logits = ad::scale_by(dist, neg_inv_sigma);
    }

    if (uses_relation_term(variant)) {
        if (in.r_query == nullptr) throw ConfigError("variant requires query relations");
        if (in.r_query->rows() != nq || in.r_query->cols() != nb) {
            throw ShapeError("r_query must be " + std::to_string(nq) + "x" + std::to_string(nb) + ", got " +
                             in.r_query->shape_string());
        }
        if (!vars.gamma) throw ConfigError("variant requires gamma");
        logits = ad::add(logits, ad::scale_by(tape.constant(*in.r_query), *vars.gamma));
    }

    if (!logits.value().all_finite()) throw DivergedError("non-finite kernel exponent");
    ad::Var weights = ad::softmax_rows(logits, in.mask);
    ad::Var predictions = ad::matmul(weights, tape.constant(*in.background_y));
    return {weights, predictions};
}

namespace {

NwVars constants_of(ad::Tape& tape, const NwModel& model) {
    NwVars vars;
    vars.log_sigma = tape.constant(Matrix::scalar(model.log_sigma));
    vars.gamma = tape.constant(Matrix::scalar(model.gamma));
    if (!model.w.empty()) vars.w = tape.constant(Matrix::row(model.w));
    if (model.mlp) {
        vars.mlp = mlp_constants(tape, *model.mlp);
        vars.mlp_dropout = model.mlp->dropout;
    }
    return vars;
}

Matrix compute_weights(const NwModel& model, Variant variant, const Background& bg, const Matrix& queries,
                       const Matrix* r_query, std::span<const std::ptrdiff_t> self_index, bool want_predictions,
                       Vector* predictions) {
    if (bg.y.size() != bg.x.rows()) throw ShapeError("background targets and features differ in length");
    if (queries.cols() != bg.x.cols()) {
        throw ShapeError("query dimension " + std::to_string(queries.cols()) + " != background dimension " +
                         std::to_string(bg.x.cols()));
    }
    const Matrix bx = model.scaler.apply(bg.x);
    const Matrix qx = model.scaler.apply(queries);
    const Matrix by = Matrix::column(bg.y);
    std::optional<Matrix> omega;
    if (variant == Variant::rel_features) {
        if (bg.relation_rows == nullptr || r_query == nullptr) throw ConfigError("rel_features requires relation rows");
        if (bg.relation_rows->rows() != bx.rows()) throw ShapeError("background relation rows mismatch");
        if (r_query->rows() != qx.rows()) throw ShapeError("query relation rows mismatch");
        omega = relation_row_distance(*r_query, *bg.relation_rows);
    }
    const auto mask = self_mask(qx.rows(), bx.rows(), self_index);

    ad::Tape tape;
    NwGraphInputs in;
    in.background_x = &bx;
    in.background_y = &by;
    in.queries = &qx;
    in.r_query = variant == Variant::rel_features ? nullptr : r_query;
    in.omega = omega ? &*omega : nullptr;
    in.mask = mask ? &*mask : nullptr;
    NwGraph graph = record_nw_graph(tape, variant, constants_of(tape, model), in, nullptr, false);
    if (want_predictions) *predictions = graph.predictions.value().storage();
    return graph.weights.value();
}

Vector predict_as(const NwModel& model, Variant variant, const Background& bg, const Matrix& queries,
                  const Matrix* r_query, std::span<const std::ptrdiff_t> self_index = {}) {
    Vector out;
    compute_weights(model, variant, bg, queries, r_query, self_index, true, &out);
    return out;
}

}  // namespace

Vector nw_predict_vanilla(const NwModel& model, const Background& background, const Matrix& queries) {
    return predict_as(model, Variant::vanilla, background, queries, nullptr);
}

Vector nw_predict_rel(const NwModel& model, const Background& background, const Matrix& queries,
                      const Matrix& r_query) {
    return predict_as(model, Variant::rel_kernel, background, queries, &r_query);
}

Vector nw_predict_rel_features(const NwModel& model, const Background& background, const Matrix& queries,
                               const Matrix& r_query) {
    return predict_as(model, Variant::rel_features, background, queries, &r_query);
}

Vector nw_predict_learnable_norm(const NwModel& model, const Background& background, const Matrix& queries,
                                 const Matrix& r_query) {
    if (model.w.size() != background.x.cols()) {
        throw ShapeError("feature weight length " + std::to_string(model.w.size()) + " != feature count " +
                         std::to_string(background.x.cols()));
    }
    return predict_as(model, Variant::learnable_norm, background, queries, &r_query);
}

Vector nw_predict_mlp(const NwModel& model, const Background& background, const Matrix& queries,
                      const Matrix& r_query) {
    if (!model.mlp) throw ConfigError("mlp_embed model has no MLP parameters");
    return predict_as(model, Variant::mlp_embed, background, queries, &r_query);
}

Vector nw_predict(const NwModel& model, const Background& background, const Matrix& queries, const Matrix& r_query,
                  std::span<const std::ptrdiff_t> self_index) {
    if (model.variant == Variant::mlp_embed && !model.mlp) throw ConfigError("mlp_embed model has no MLP parameters");
    const Matrix* rq = model.variant == Variant::vanilla ? nullptr : &r_query;
    return predict_as(model, model.variant, background, queries, rq, self_index);
}

Matrix nw_weights(const NwModel& model, const Background& background, const Matrix& queries, const Matrix& r_query,
                  std::span<const std::ptrdiff_t> self_index) {
    const Matrix* rq = model.variant == Variant::vanilla ? nullptr : &r_query;
    return compute_weights(model, model.variant, background, queries, rq, self_index, false, nullptr);
}

}  // namespace relreg::nw
