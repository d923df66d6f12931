// SPDX-License-Identifier: Apache-2.0
#include "relreg/meta/meta.hpp"

#include <cmath>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "relreg/core/error.hpp"
#include "relreg/datagen/datagen.hpp"

namespace relreg::meta {

void TreatmentDataset::validate() const {
    const std::size_t n = y.size();
    if (x.rows() != n || w.size() != n) {
        throw ShapeError("treatment dataset has " + std::to_string(x.rows()) + " feature rows, " +
                         std::to_string(w.size()) + " treatment flags and " + std::to_string(n) + " outcomes");
    }
    if (tau_true && tau_true->size() != n) throw ShapeError("tau_true length does not match the outcomes");
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] != 0.0 && w[i] != 1.0) throw ConfigError("treatment flag at row " + std::to_string(i) + " is not 0/1");
        treated += w[i] == 1.0;
    }
    if (treated == 0 || treated == n) throw ConfigError("both treatment groups must be nonempty");
    outcome_dataset().validate();
}

IndexList TreatmentDataset::group(bool treated) const {
    IndexList out;
    for (std::size_t i = 0; i < w.size(); ++i)
        if ((w[i] == 1.0) == treated) out.push_back(i);
    return out;
}

BaseRegressor nw_regressor(nw::Variant variant, nw::FitConfig config) {
    return {"nw-" + std::string(nw::to_string(variant)), [variant, config](const RelDataset& d, const SplitIndex& s, std::uint64_t seed) {
                nw::FitConfig c = config;
                c.seed = seed;
                nw::FitResult fit = nw::nw_fit(d, s, variant, c);
                return RegressorOutput{std::move(fit.trial_predictions), std::move(fit.validation_predictions)};
            }};
}

BaseRegressor tabrel_regressor(tabrel::TabRelConfig config, tabrel::TabRelFitConfig fit_config) {
    return {"tabrel", [config, fit_config](const RelDataset& d, const SplitIndex& s, std::uint64_t seed) {
                tabrel::TabRelFitConfig c = fit_config;
                c.seed = seed;
                tabrel::TabRelFit fit = tabrel::tabrel_fit(d, s, config, c);
                return RegressorOutput{std::move(fit.trial_predictions), std::move(fit.validation_predictions)};
            }};
}

std::string to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::s: return "S";
        case LearnerKind::t: return "T";
        case LearnerKind::x: return "X";
    }
    return "?";
}

LearnerKind parse_learner(std::string_view text) {
    if (text == "S" || text == "s") return LearnerKind::s;
    if (text == "T" || text == "t") return LearnerKind::t;
    if (text == "X" || text == "x") return LearnerKind::x;
    throw ConfigError("unknown meta-learner '" + std::string(text) + "' (expected S, T or X)");
}

Matrix restrict_relations(const Matrix& r, std::span<const std::size_t> rows) {
    for (std::size_t i : rows)
        if (i >= r.rows()) throw ConfigError("relation index " + std::to_string(i) + " out of range");
    const IndexList idx(rows.begin(), rows.end());
    return select(r, idx, idx);
}

namespace {

IndexList intersect(const IndexList& rows, const std::unordered_set<std::size_t>& keep) {
    IndexList out;
    for (std::size_t i : rows)
        if (keep.contains(i)) out.push_back(i);
    return out;
}

IndexList concat(const IndexList& a, const IndexList& b) {
    IndexList out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

/// Fits on background `bg` and trial `tr` with targets `y` (full length) and
/// returns predictions at `queries`, none of which may lie in `bg`.
Vector fit_and_query(const Matrix& x, const Matrix& r, const Vector& y, const IndexList& bg, const IndexList& tr,
                     const IndexList& queries, const BaseRegressor& base, std::uint64_t seed) {
    IndexList rows = concat(bg, tr);
    std::unordered_map<std::size_t, std::size_t> position;
    for (std::size_t k = 0; k < rows.size(); ++k) position.emplace(rows[k], k);
    std::unordered_set<std::size_t> bg_set(bg.begin(), bg.end());
    IndexList validation;
    for (std::size_t q : queries) {
        if (bg_set.contains(q)) throw ConfigError("query row " + std::to_string(q) + " is a background row");
        if (!position.contains(q)) {
            position.emplace(q, rows.size());
            validation.push_back(rows.size());
            rows.push_back(q);
        }
    }
    RelDataset sub{select_rows(x, rows), Vector(rows.size(), 0.0), restrict_relations(r, rows)};
    for (std::size_t k = 0; k < bg.size() + tr.size(); ++k) sub.y[k] = y[rows[k]];
    SplitIndex split;
    for (std::size_t k = 0; k < bg.size(); ++k) split.background.push_back(k);
    for (std::size_t k = 0; k < tr.size(); ++k) split.trial.push_back(bg.size() + k);
    split.validation = validation;

    const RegressorOutput out = base.fit_predict(sub, split, seed);
    if (out.trial.size() != tr.size() || out.validation.size() != validation.size()) {
        throw ShapeError("base regressor '" + base.tag + "' returned the wrong number of predictions");
    }
    Vector result;
    result.reserve(queries.size());
    const std::size_t first_validation = bg.size() + tr.size();
    for (std::size_t q : queries) {
        const std::size_t k = position.at(q);
        result.push_back(k < first_validation ? out.trial[k - bg.size()] : out.validation[k - first_validation]);
    }
    return result;
}

struct Groups {
    IndexList bg[2];
    IndexList tr[2];
};

Groups split_groups(const TreatmentDataset& data, const SplitIndex& split) {
    Groups g;
    for (int t = 0; t < 2; ++t) {
        const IndexList members = data.group(t == 1);
        const std::unordered_set<std::size_t> keep(members.begin(), members.end());
        g.bg[t] = intersect(split.background, keep);
        g.tr[t] = intersect(split.trial, keep);
        const char* name = t == 1 ? "treated" : "control";
        if (g.bg[t].empty()) throw ConfigError(std::string(name) + " group has no background rows in the split");
        if (g.tr[t].empty()) throw ConfigError(std::string(name) + " group has no trial rows in the split");
    }
    return g;
}

CateEstimate finish(LearnerKind kind, const BaseRegressor& base, const Vector& tau, std::size_t n_trial) {
    CateEstimate est;
    est.kind = kind;
    est.base_tag = base.tag;
    est.tau_hat_trial.assign(tau.begin(), tau.begin() + static_cast<std::ptrdiff_t>(n_trial));
    est.tau_hat.assign(tau.begin() + static_cast<std::ptrdiff_t>(n_trial), tau.end());
    for (double v : tau)
        if (!std::isfinite(v)) throw DivergedError("non-finite effect estimate from '" + base.tag + "'");
    return est;
}

void check_inputs(const TreatmentDataset& data, const SplitIndex& split) {
    data.validate();
    split.validate(data.size());
    if (split.trial.empty()) throw ConfigError("trial set is empty");
}

}  // namespace

CateEstimate s_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed) {
    check_inputs(data, split);
    const std::size_t d = data.x.cols();
    const IndexList queries = concat(split.trial, split.validation);
    IndexList src = concat(split.background, split.trial);
    const std::size_t n_fit = src.size();
    for (int copy = 0; copy < 2; ++copy) src.insert(src.end(), queries.begin(), queries.end());

    RelDataset aug{Matrix(src.size(), d + 1), Vector(src.size(), 0.0), restrict_relations(data.r, src)};
    for (std::size_t k = 0; k < src.size(); ++k) {
        for (std::size_t c = 0; c < d; ++c) aug.x(k, c) = data.x(src[k], c);
        if (k < n_fit) {
            aug.x(k, d) = data.w[src[k]];
            aug.y[k] = data.y[src[k]];
        } else {
            aug.x(k, d) = k < n_fit + queries.size() ? 1.0 : 0.0;
        }
    }
    SplitIndex aug_split;
    for (std::size_t k = 0; k < split.background.size(); ++k) aug_split.background.push_back(k);
    for (std::size_t k = split.background.size(); k < n_fit; ++k) aug_split.trial.push_back(k);
    for (std::size_t k = n_fit; k < src.size(); ++k) aug_split.validation.push_back(k);

    const RegressorOutput out = base.fit_predict(aug, aug_split, datagen::derive_seed(seed, "s-learner"));
    if (out.validation.size() != 2 * queries.size()) {
        throw ShapeError("base regressor '" + base.tag + "' returned the wrong number of predictions");
    }
    Vector tau(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) tau[i] = out.validation[i] - out.validation[queries.size() + i];
    return finish(LearnerKind::s, base, tau, split.trial.size());
}

CateEstimate t_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed) {
    check_inputs(data, split);
    const Groups g = split_groups(data, split);
    const IndexList queries = concat(split.trial, split.validation);
    const Vector mu1 = fit_and_query(data.x, data.r, data.y, g.bg[1], g.tr[1], queries, base,
                                     datagen::derive_seed(seed, "mu1"));
    const Vector mu0 = fit_and_query(data.x, data.r, data.y, g.bg[0], g.tr[0], queries, base,
                                     datagen::derive_seed(seed, "mu0"));
    Vector tau(queries.size());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = mu1[i] - mu0[i];
    return finish(LearnerKind::t, base, tau, split.trial.size());
}

CateEstimate x_learner(const TreatmentDataset& data, const SplitIndex& split, const BaseRegressor& base,
                       std::uint64_t seed) {
    check_inputs(data, split);
    const Groups g = split_groups(data, split);
    const IndexList treated = concat(g.bg[1], g.tr[1]);
    const IndexList control = concat(g.bg[0], g.tr[0]);
    const Vector mu0_on_treated = fit_and_query(data.x, data.r, data.y, g.bg[0], g.tr[0], treated, base,
                                                datagen::derive_seed(seed, "mu0"));
    const Vector mu1_on_control = fit_and_query(data.x, data.r, data.y, g.bg[1], g.tr[1], control, base,
                                                datagen::derive_seed(seed, "mu1"));
    Vector imputed(data.size(), 0.0);
    for (std::size_t k = 0; k < treated.size(); ++k) imputed[treated[k]] = data.y[treated[k]] - mu0_on_treated[k];
    for (std::size_t k = 0; k < control.size(); ++k) imputed[control[k]] = mu1_on_control[k] - data.y[control[k]];

    const IndexList queries = concat(split.trial, split.validation);
    const Vector tau1 = fit_and_query(data.x, data.r, imputed, g.bg[1], g.tr[1], queries, base,
                                      datagen::derive_seed(seed, "tau1"));
    const Vector tau0 = fit_and_query(data.x, data.r, imputed, g.bg[0], g.tr[0], queries, base,
                                      datagen::derive_seed(seed, "tau0"));
    Vector tau(queries.size());
    for (std::size_t i = 0; i < tau.size(); ++i) tau[i] = 0.5 * (tau0[i] + tau1[i]);
    return finish(LearnerKind::x, base, tau, split.trial.size());
}

CateEstimate run_learner(LearnerKind kind, const TreatmentDataset& data, const SplitIndex& split,
                         const BaseRegressor& base, std::uint64_t seed) {
    switch (kind) {
        case LearnerKind::s: return s_learner(data, split, base, seed);
        case LearnerKind::t: return t_learner(data, split, base, seed);
        case LearnerKind::x: return x_learner(data, split, base, seed);
    }
    throw ConfigError("unknown meta-learner");
}

double pehe(std::span<const double> tau_hat, std::span<const double> tau_true) {
    if (tau_hat.size() != tau_true.size()) {
        throw ShapeError("PEHE length mismatch: " + std::to_string(tau_hat.size()) + " estimates vs " +
                         std::to_string(tau_true.size()) + " true effects");
    }
    if (tau_hat.empty()) throw ShapeError("PEHE of empty vectors");
    double total = 0.0;
    for (std::size_t i = 0; i < tau_hat.size(); ++i) total += (tau_hat[i] - tau_true[i]) * (tau_hat[i] - tau_true[i]);
    return total / static_cast<double>(tau_hat.size());
}

TreatmentDataset build_ihdp_rel(const Matrix& x, Vector w, Vector y, std::optional<Vector> tau_true,
                                std::size_t category_col) {
    if (category_col >= x.cols()) {
        throw ConfigError("category column " + std::to_string(category_col) + " missing from " +
                          std::to_string(x.cols()) + " covariates");
    }
    const std::size_t n = x.rows();
    IndexList keep;
    for (std::size_t c = 0; c < x.cols(); ++c)
        if (c != category_col) keep.push_back(c);
    TreatmentDataset out;
    out.x = select_cols(x, keep);
    out.w = std::move(w);
    out.y = std::move(y);
    out.tau_true = std::move(tau_true);
    out.r = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && x(i, category_col) == x(j, category_col)) out.r(i, j) = 1.0;
    }
    return out;
}

TreatmentDataset gen_additive_effect(std::size_t n, double effect, std::uint64_t seed, double noise_std) {
    datagen::SyntheticSpec spec;
    spec.family = datagen::Family::parabolas;
    spec.n = n;
    spec.seed = seed;
    const datagen::SyntheticData base = datagen::generate(spec);
    std::mt19937_64 rng(datagen::derive_seed(seed, "treatment"));
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> noise(0.0, noise_std);
    TreatmentDataset out;
    out.x = base.data.x;
    out.r = base.data.r;
    out.w.resize(n);
    out.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.w[i] = coin(rng) ? 1.0 : 0.0;
        out.y[i] = base.data.y[i] + effect * out.w[i] + (noise_std > 0.0 ? noise(rng) : 0.0);
    }
    // A draw with an empty group is repaired deterministically.
    if (n >= 2) {
        std::size_t treated = 0;
        for (double v : out.w) treated += v == 1.0;
        if (treated == 0 || treated == n) {
            out.w[0] = 1.0 - out.w[0];
            out.y[0] += out.w[0] == 1.0 ? effect : -effect;
        }
    }
    out.tau_true = Vector(n, effect);
    return out;
}

}  // namespace relreg::meta
