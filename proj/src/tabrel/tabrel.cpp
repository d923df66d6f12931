// SPDX-License-Identifier: Apache-2.0
#include "relreg/tabrel/tabrel.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "relreg/core/error.hpp"
#include "relreg/core/metrics.hpp"

namespace relreg::tabrel {

void TabRelConfig::validate() const {
    if (embed_dim == 0 || num_heads == 0 || feature_embed_dim == 0) {
        throw ConfigError("TabRel widths and head count must be positive");
    }
    if (embed_dim % num_heads != 0) {
        throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by num_heads " +
                          std::to_string(num_heads));
    }
    if (depth < 1) throw ConfigError("TabRel depth must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("TabRel dropout must satisfy 0 <= rate < 1");
}

namespace {

Matrix uniform(std::size_t rows, std::size_t cols, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

Matrix xavier(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    return uniform(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)), rng);
}

std::string layer_key(std::size_t layer, const char* name) { return "L" + std::to_string(layer) + "." + name; }

}  // namespace

TabRelParams TabRelParams::init(const TabRelConfig& config, std::size_t input_features, std::mt19937_64& rng) {
    config.validate();
    if (input_features == 0) throw ConfigError("TabRel needs at least one input column");
    TabRelParams p;
    p.config = config;
    p.input_features = input_features;
    const std::size_t f = input_features, e = config.feature_embed_dim, ed = config.embed_dim;
    p.store.add("embed.w", uniform(f, e, 1.0, rng));
    p.store.add("embed.b", uniform(f, e, 1.0, rng));
    p.store.add("in.w", xavier(f * e, ed, rng));
    p.store.add("in.b", Matrix(1, ed));
    for (std::size_t l = 0; l < config.depth; ++l) {
        p.store.add(layer_key(l, "wq"), xavier(ed, ed, rng));
        p.store.add(layer_key(l, "wk"), xavier(ed, ed, rng));
        p.store.add(layer_key(l, "wv"), xavier(ed, ed, rng));
        p.store.add(layer_key(l, "wo"), xavier(ed, ed, rng));
        p.store.add(layer_key(l, "s"), Matrix(1, config.num_heads));
        if (config.feed_forward) {
            p.store.add(layer_key(l, "ff1.w"), xavier(ed, 2 * ed, rng));
            p.store.add(layer_key(l, "ff1.b"), Matrix(1, 2 * ed));
            p.store.add(layer_key(l, "ff2.w"), xavier(2 * ed, ed, rng));
            p.store.add(layer_key(l, "ff2.b"), Matrix(1, ed));
        }
    }
    p.store.add("head.w", Matrix(ed, 1));
    p.store.add("head.b", Matrix(1, 1));
    return p;
}

ad::Var ParamSource::get(ad::Tape& tape, const std::string& name) const {
    if (bind != nullptr) return tape.param(*bind, name);
    return tape.constant(values->value(name));
}

AttentionBatch build_input_matrix(const RelDataset& data, const SplitIndex& split, BatchRole role) {
    split.validate(data.size());
    if (split.background.empty()) throw ConfigError("background set is empty");
    AttentionBatch b;
    b.rows = split.background;
    b.rows.insert(b.rows.end(), split.trial.begin(), split.trial.end());
    b.n_background = split.background.size();
    b.n_trial = split.trial.size();
    if (role == BatchRole::validation) {
        b.rows.insert(b.rows.end(), split.validation.begin(), split.validation.end());
        b.n_validation = split.validation.size();
    }
    const std::size_t d = data.dims();
    b.x_in = Matrix(b.rows.size(), d + 1);
    for (std::size_t i = 0; i < b.rows.size(); ++i) {
        const std::size_t src = b.rows[i];
        for (std::size_t k = 0; k < d; ++k) b.x_in(i, k) = data.x(src, k);
        b.x_in(i, d) = i < b.n_background ? data.y[src] : 0.0;
    }
    b.r = select(data.r, b.rows, b.rows);
    return b;
}

namespace {

/// out(s, jE+k) = relu(x(s,j)·a(j,k) + b(j,k))
ad::Var feature_embed(ad::Tape& tape, ad::Var x, ad::Var a, ad::Var b) {
    const Matrix& xv = x.value();
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const std::size_t f = av.rows(), e = av.cols();
    if (xv.cols() != f) {
        throw ShapeError("TabRel expects " + std::to_string(f) + " input columns, got " + std::to_string(xv.cols()));
    }
    Matrix out(xv.rows(), f * e);
    for (std::size_t s = 0; s < xv.rows(); ++s)
        for (std::size_t j = 0; j < f; ++j)
            for (std::size_t k = 0; k < e; ++k) {
                const double pre = xv(s, j) * av(j, k) + bv(j, k);
                out(s, j * e + k) = pre > 0.0 ? pre : 0.0;
            }
    return tape.record(std::move(out), {x, a, b}, [x, a, b, f, e](ad::Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& y = t.value(self);
        const Matrix& xv = t.value(x.id());
        const Matrix& av = t.value(a.id());
        Matrix ga(f, e), gb(f, e), gx(xv.rows(), f);
        for (std::size_t s = 0; s < xv.rows(); ++s)
            for (std::size_t j = 0; j < f; ++j)
                for (std::size_t k = 0; k < e; ++k) {
                    if (!(y(s, j * e + k) > 0.0)) continue;
                    const double gv = g(s, j * e + k);
                    ga(j, k) += gv * xv(s, j);
                    gb(j, k) += gv;
                    gx(s, j) += gv * av(j, k);
                }
        t.accumulate(a.id(), std::move(ga));
        t.accumulate(b.id(), std::move(gb));
        t.accumulate(x.id(), std::move(gx));
    });
}

/// scores = q·kᵀ·scale + s(0, head)·rel
ad::Var attention_scores(ad::Var q, ad::Var k, ad::Var rel, ad::Var s, std::size_t head, double scale) {
    Matrix out = matmul_nt(q.value(), k.value());
    const double sh = s.value()(0, head);
    const auto rv = rel.value().data();
    auto ov = out.data();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = ov[i] * scale + sh * rv[i];
    return q.tape()->record(std::move(out), {q, k, rel, s}, [q, k, rel, s, head, scale](ad::Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(q.id())) t.accumulate(q.id(), matmul(g, t.value(k.id())) * scale);
        if (t.requires_grad(k.id())) t.accumulate(k.id(), matmul_tn(g, t.value(q.id())) * scale);
        if (t.requires_grad(s.id())) {
            const auto gv = g.data();
            const auto rv = t.value(rel.id()).data();
            double acc = 0.0;
            for (std::size_t i = 0; i < gv.size(); ++i) acc += gv[i] * rv[i];
            Matrix gs(1, t.value(s.id()).cols());
            gs(0, head) = acc;
            t.accumulate(s.id(), std::move(gs));
        }
    });
}

ad::Var record_embedding(ad::Tape& tape, const ParamSource& source, ad::Var x) {
    ad::Var e = feature_embed(tape, x, source.get(tape, "embed.w"), source.get(tape, "embed.b"));
    return ad::add_row_bias(ad::matmul(e, source.get(tape, "in.w")), source.get(tape, "in.b"));
}

}  // namespace

Matrix num_embed(const TabRelParams& params, const Matrix& x_in) {
    ad::Tape tape;
    return record_embedding(tape, ParamSource::constants(params.store), tape.constant(x_in)).value();
}

std::vector<Matrix> build_rel_bias(const Matrix& r, std::span<const double> scales) {
    if (r.rows() != r.cols()) throw ShapeError("relation matrix must be square, got " + r.shape_string());
    std::vector<Matrix> out;
    out.reserve(scales.size());
    for (double s : scales) out.push_back(r * s);
    return out;
}

Mask build_trial_mask(std::size_t ns, std::size_t n_trial) {
    if (n_trial >= ns) {
        throw ConfigError("cannot mask " + std::to_string(n_trial) + " of " + std::to_string(ns) +
                          " columns: no background key would remain");
    }
    Mask mask(ns, ns);
    for (std::size_t r = 0; r < ns; ++r)
        for (std::size_t c = ns - n_trial; c < ns; ++c) mask.set(r, c, true);
    return mask;
}

Mask build_trial_pair_mask(std::size_t ns, std::size_t n_trial) {
    if (n_trial >= ns) throw ConfigError("trial rows must leave at least one background row");
    Mask mask(ns, ns);
    const std::size_t first = ns - n_trial;
    for (std::size_t r = first; r < ns; ++r)
        for (std::size_t c = first; c < ns; ++c)
            if (r != c) mask.set(r, c, true);
    return mask;
}

Mask batch_mask(const TabRelConfig& config, const AttentionBatch& batch) {
    return config.mask_scope == MaskScope::all_rows ? build_trial_mask(batch.size(), batch.n_masked())
                                                    : build_trial_pair_mask(batch.size(), batch.n_masked());
}

RmhaResult record_rmha(ad::Tape& tape, const ParamSource& source, const TabRelConfig& config, std::size_t layer,
                       ad::Var h, const Matrix& r, const Mask& mask, const ForwardState& state) {
    const std::size_t ns = h.rows(), nh = config.num_heads, hd = config.head_dim();
    if (h.cols() != config.embed_dim) throw ShapeError("RMHA input width must equal embed_dim");
    if (r.rows() != ns || r.cols() != ns) throw ShapeError("relation matrix must be " + std::to_string(ns) + " square");
    if (mask.rows() != ns || mask.cols() != ns) throw ShapeError("attention mask must be " + std::to_string(ns) + " square");
    const bool drop = state.training && state.rng != nullptr && config.dropout > 0.0;

    ad::Var q = ad::matmul(h, source.get(tape, layer_key(layer, "wq")));
    ad::Var k = ad::matmul(h, source.get(tape, layer_key(layer, "wk")));
    ad::Var v = ad::matmul(h, source.get(tape, layer_key(layer, "wv")));
    ad::Var s = source.get(tape, layer_key(layer, "s"));

    // When the mask hides the same trailing columns from every row, attending
    // only the leading keys gives identical weights without a masked softmax.
    const std::size_t prefix = mask.enabled_prefix();
    const bool use_prefix = prefix > 0 && prefix < ns;
    const std::size_t nk = use_prefix ? prefix : ns;
    ad::Var keys = use_prefix ? ad::slice_rows(k, 0, nk) : k;
    ad::Var values = use_prefix ? ad::slice_rows(v, 0, nk) : v;
    Matrix r_keys = r;
    if (use_prefix) {
        r_keys = Matrix(ns, nk);
        for (std::size_t i = 0; i < ns; ++i)
            for (std::size_t j = 0; j < nk; ++j) r_keys(i, j) = r(i, j);
    }
    ad::Var rel = tape.constant(std::move(r_keys));
    const Mask* softmax_mask = (use_prefix || prefix == ns) ? nullptr : &mask;

    RmhaResult result;
    std::vector<ad::Var> heads;
    heads.reserve(nh);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
    for (std::size_t head = 0; head < nh; ++head) {
        ad::Var qh = ad::slice_cols(q, head * hd, (head + 1) * hd);
        ad::Var kh = ad::slice_cols(keys, head * hd, (head + 1) * hd);
        ad::Var vh = ad::slice_cols(values, head * hd, (head + 1) * hd);
        ad::Var scores = attention_scores(qh, kh, rel, s, head, inv_sqrt);
        if (!scores.value().all_finite()) {
            throw DivergedError("non-finite attention scores in layer " + std::to_string(layer));
        }
        ad::Var attn = ad::softmax_rows(scores, softmax_mask);
        if (state.keep_attention) {
            Matrix full(ns, ns);
            for (std::size_t i = 0; i < ns; ++i)
                for (std::size_t j = 0; j < nk; ++j) full(i, j) = attn.value()(i, j);
            result.attention.push_back(std::move(full));
        }
        if (drop) attn = ad::dropout(attn, config.dropout, *state.rng, true);
        heads.push_back(ad::matmul(attn, vh));
    }
    ad::Var merged = ad::matmul(ad::hconcat(heads), source.get(tape, layer_key(layer, "wo")));
    ad::Var out = ad::add(h, merged);
    if (config.layer_norm) out = ad::layer_norm_rows(out);
    if (config.feed_forward) {
        ad::Var ff = ad::relu(ad::add_row_bias(ad::matmul(out, source.get(tape, layer_key(layer, "ff1.w"))),
                                               source.get(tape, layer_key(layer, "ff1.b"))));
        ff = ad::add_row_bias(ad::matmul(ff, source.get(tape, layer_key(layer, "ff2.w"))),
                              source.get(tape, layer_key(layer, "ff2.b")));
        out = ad::add(out, ff);
        if (config.layer_norm) out = ad::layer_norm_rows(out);
    }
    result.output = out;
    return result;
}

Matrix rmha_forward(const TabRelParams& params, std::size_t layer, const Matrix& h, const Matrix& r, const Mask& mask,
                    std::mt19937_64* rng, bool training) {
    if (layer >= params.config.depth) throw ConfigError("layer index out of range");
    ad::Tape tape;
    ForwardState state{rng, training, false};
    return record_rmha(tape, ParamSource::constants(params.store), params.config, layer, tape.constant(h), r, mask,
                       state)
        .output.value();
}

ForwardResult record_forward(ad::Tape& tape, const ParamSource& source, const TabRelConfig& config,
                             const AttentionBatch& batch, const ForwardState& state) {
    const Mask mask = batch_mask(config, batch);
    ad::Var h = record_embedding(tape, source, tape.constant(batch.x_in));
    ForwardResult result;
    const bool drop = state.training && state.rng != nullptr && config.dropout > 0.0;
    for (std::size_t l = 0; l < config.depth; ++l) {
        if (drop) h = ad::dropout(h, config.dropout, *state.rng, true);
        RmhaResult layer = record_rmha(tape, source, config, l, h, batch.r, mask, state);
        h = layer.output;
        if (state.keep_attention) result.attention.push_back(std::move(layer.attention));
    }
    result.predictions = ad::add_row_bias(ad::matmul(h, source.get(tape, "head.w")), source.get(tape, "head.b"));
    return result;
}

Vector tabrel_forward(const TabRelParams& params, const AttentionBatch& batch, bool training, std::mt19937_64* rng) {
    if (batch.x_in.cols() != params.input_features) {
        throw ShapeError("batch has " + std::to_string(batch.x_in.cols()) + " columns, model expects " +
                         std::to_string(params.input_features));
    }
    ad::Tape tape;
    ForwardState state{rng, training, false};
    return record_forward(tape, ParamSource::constants(params.store), params.config, batch, state)
        .predictions.value()
        .storage();
}

TabRelFit tabrel_fit(const RelDataset& data, const SplitIndex& split, const TabRelConfig& config,
                     const TabRelFitConfig& fit_config) {
    config.validate();
    data.validate();
    split.validate(data.size());
    if (split.trial.empty()) throw ConfigError("trial set is empty");

    TabRelFit fit;
    fit.feature_scaler = Standardizer::fit(data.x, split.background);
    Vector by;
    for (std::size_t i : split.background) by.push_back(data.y[i]);
    fit.y_mean = mean(by);
    double var = 0.0;
    for (double v : by) var += (v - fit.y_mean) * (v - fit.y_mean);
    var /= static_cast<double>(by.size());
    fit.y_scale = var > 1e-24 ? std::sqrt(var) : 1.0;

    RelDataset scaled = data;
    scaled.x = fit.feature_scaler.apply(data.x);
    for (double& v : scaled.y) v = (v - fit.y_mean) / fit.y_scale;
    const AttentionBatch batch = build_input_matrix(scaled, split, BatchRole::validation);

    std::mt19937_64 rng(fit_config.seed);
    fit.params = TabRelParams::init(config, data.dims() + 1, rng);
    ParamStore& store = fit.params.store;

    const std::size_t t0 = batch.n_background, t1 = t0 + batch.n_trial;
    Matrix trial_target(batch.n_trial, 1);
    for (std::size_t i = 0; i < batch.n_trial; ++i) trial_target(i, 0) = scaled.y[batch.rows[t0 + i]];

    const AdamConfig adam{fit_config.learning_rate, 0.9, 0.999, 1e-8};
    const auto start = std::chrono::steady_clock::now();
    ParamStore best = store;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_improvement = 0;
    for (int epoch = 0; epoch < fit_config.epochs; ++epoch) {
        ad::Tape tape;
        ForwardState state{&rng, true, false};
        ForwardResult fwd = record_forward(tape, ParamSource::trainable(store), config, batch, state);
        ad::Var loss = ad::mse(ad::slice_rows(fwd.predictions, t0, t1), trial_target);
        const double lv = loss.value()(0, 0);
        if (!std::isfinite(lv)) throw DivergedError("TabRel fit diverged at epoch " + std::to_string(epoch));
        fit.loss_curve.push_back(lv);
        if (lv < best_loss - fit_config.min_improvement) {
            best_loss = lv;
            best = store;
            since_improvement = 0;
        } else if (++since_improvement >= fit_config.patience) {
            break;
        }
        compute_gradients(tape, loss, store);
        try {
            adam_step(store, adam, epoch + 1);
        } catch (const DivergedError& e) {
            throw DivergedError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
        }
        fit.epochs_run = epoch + 1;
        if (fit_config.timeout_seconds > 0.0) {
            const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
            if (elapsed.count() > fit_config.timeout_seconds) {
                throw TimeoutError("TabRel fit exceeded " + std::to_string(fit_config.timeout_seconds) +
                                   " s at epoch " + std::to_string(epoch));
            }
        }
    }
    if (fit_config.epochs > 0) store.assign_values(best);

    const Vector out = tabrel_forward(fit.params, batch, false, nullptr);
    Vector trial_y, val_y;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const double pred = out[i] * fit.y_scale + fit.y_mean;
        if (i >= t0 && i < t1) {
            fit.trial_predictions.push_back(pred);
            trial_y.push_back(data.y[batch.rows[i]]);
        } else if (i >= t1) {
            fit.validation_predictions.push_back(pred);
            val_y.push_back(data.y[batch.rows[i]]);
        }
    }
    fit.trial_mse = mean_squared_error(fit.trial_predictions, trial_y);
    fit.trial_r2 = r_squared(fit.trial_predictions, trial_y);
    if (val_y.empty()) {
        fit.validation_mse = std::numeric_limits<double>::quiet_NaN();
        fit.validation_r2 = std::numeric_limits<double>::quiet_NaN();
    } else {
        fit.validation_mse = mean_squared_error(fit.validation_predictions, val_y);
        fit.validation_r2 = r_squared(fit.validation_predictions, val_y);
    }
    return fit;
}

}  // namespace relreg::tabrel
