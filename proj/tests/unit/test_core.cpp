// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "relreg/core/autodiff.hpp"
#include "relreg/core/dropout.hpp"
#include "relreg/core/error.hpp"
#include "relreg/core/metrics.hpp"
#include "relreg/core/param_store.hpp"
#include "relreg/dataset.hpp"
#include "support.hpp"

using namespace relreg;
using testing::max_rel_error;
using testing::numeric_gradient;
using testing::random_matrix;

TEST_CASE("softmax of equal scores is uniform") {
    const Matrix s = softmax_rows(Matrix{{0.0, 0.0, 0.0}});
    for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("softmax is shift invariant") {
    const Matrix base = softmax_rows(Matrix{{0.0, 1.0, 2.0}});
    for (double c : {-700.0, -3.5, 0.25, 42.0, 900.0}) {
        const Matrix shifted = softmax_rows(Matrix{{c, c + 1.0, c + 2.0}});
        CHECK(max_abs_diff(base, shifted) < 1e-14);
    }
}

TEST_CASE("softmax of [1,2,3] against direct exponentiation") {
    long double e[3] = {std::exp(1.0L), std::exp(2.0L), std::exp(3.0L)};
    const long double z = e[0] + e[1] + e[2];
    const Matrix s = softmax_rows(Matrix{{1.0, 2.0, 3.0}});
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
        CHECK(std::abs(s(0, k) - static_cast<double>(e[k] / z)) < 1e-15);
        total += s(0, k);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
    // 0.09003057317038046, 0.24472847105479764, 0.6652409557748219
    CHECK(std::abs(s(0, 0) - 0.09003057317038046) < 1e-15);
}

TEST_CASE("softmax rows sum to one over random inputs and masks") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> dim(1, 12);
    std::bernoulli_distribution coin(0.3);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t rows = dim(rng), cols = dim(rng);
        const Matrix m = random_matrix(rows, cols, rng, -30.0, 30.0);
        Mask mask(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 1; c < cols; ++c) mask.set(r, c, coin(rng));
        }
        const bool use_mask = trial % 2 == 1;
        const Matrix s = softmax_rows(m, use_mask ? &mask : nullptr);
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                if (use_mask && mask.masked(r, c)) CHECK(s(r, c) == 0.0);
                CHECK(s(r, c) >= 0.0);
                total += s(r, c);
            }
            REQUIRE(std::abs(total - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("fully masked softmax row names the row") {
    Mask mask(3, 2);
    mask.set(1, 0, true);
    mask.set(1, 1, true);
    try {
        (void)softmax_rows(Matrix(3, 2), &mask);
        FAIL("expected DegenerateRowError");
    } catch (const DegenerateRowError& e) {
        CHECK(e.row() == 1);
    }
}

TEST_CASE("matmul variants agree with naive products") {
    std::mt19937_64 rng(3);
    const Matrix a = random_matrix(5, 4, rng), b = random_matrix(4, 3, rng), c = random_matrix(6, 4, rng);
    Matrix naive(5, 3);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k) naive(i, j) += a(i, k) * b(k, j);
    CHECK(max_abs_diff(matmul(a, b), naive) < 1e-14);
    CHECK(max_abs_diff(matmul_nt(a, c), matmul(a, transpose(c))) < 1e-14);
    CHECK(max_abs_diff(matmul_tn(a, a), matmul(transpose(a), a)) < 1e-14);
    CHECK_THROWS_AS((void)matmul(a, c), ShapeError);
    CHECK(matmul(Matrix(2, 0), Matrix(0, 3)) == Matrix(2, 3));
}

TEST_CASE("enabled prefix detects trailing masked columns") {
    Mask m(3, 4);
    CHECK(m.enabled_prefix() == 4);
    for (std::size_t r = 0; r < 3; ++r) m.set(r, 3, true);
    CHECK(m.enabled_prefix() == 3);
    m.set(0, 1, true);
    CHECK(m.enabled_prefix() == 0);
}

TEST_CASE("gradient of theta squared") {
    ParamStore store;
    store.add("theta", Matrix::scalar(3.0));
    ad::Tape tape;
    ad::Var theta = tape.param(store, "theta");
    ad::compute_gradients(tape, ad::sum(ad::square(theta)), store);
    CHECK(store.slot("theta").grad(0, 0) == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("constant loss has zero gradients") {
    ParamStore store;
    store.add("a", Matrix{{1.0, 2.0}});
    ad::Tape tape;
    ad::Var a = tape.param(store, "a");
    ad::Var loss = ad::add(ad::sum(ad::scale(a, 0.0)), tape.constant(Matrix::scalar(5.0)));
    ad::compute_gradients(tape, loss, store);
    CHECK(store.slot("a").grad == Matrix(1, 2));
}

TEST_CASE("non-finite loss raises") {
    ad::Tape tape;
    ad::Var a = tape.variable(Matrix::scalar(std::numeric_limits<double>::infinity()));
    CHECK_THROWS_AS(tape.backward(ad::sum(a)), DivergedError);
}

namespace {

using Op = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Taped gradient of Σ C∘op(inputs) against central differences, per input.
double op_gradient_error(const Op& op, const std::vector<Matrix>& inputs, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Matrix weights;
    auto loss_at = [&](const std::vector<Matrix>& values) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        for (const auto& v : values) vars.push_back(tape.constant(v));
        const Matrix out = op(tape, vars).value();
        if (weights.empty()) weights = random_matrix(out.rows(), out.cols(), rng);
        double total = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) total += out.data()[i] * weights.data()[i];
        return total;
    };
    (void)loss_at(inputs);

    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& v : inputs) vars.push_back(tape.variable(v));
    ad::Var out = op(tape, vars);
    tape.backward(ad::sum(ad::mul(out, tape.constant(weights))));

    double worst = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto f = [&](const Matrix& x) {
            std::vector<Matrix> values = inputs;
            values[k] = x;
            return loss_at(values);
        };
        worst = std::max(worst, max_rel_error(tape.grad_of(vars[k]), numeric_gradient(f, inputs[k])));
    }
    return worst;
}

}  // namespace

TEST_CASE("every differentiable op matches finite differences") {
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng), c = random_matrix(4, 2, rng);
    const Matrix pos = random_matrix(3, 4, rng, 0.2, 1.0);
    const Matrix away = random_matrix(3, 4, rng, 0.2, 1.0) - Matrix(3, 4, 0.6);
    const Matrix s1 = Matrix::scalar(0.7), bias = random_matrix(1, 4, rng), d = random_matrix(5, 4, rng);
    Mask mask(3, 4);
    mask.set(0, 2, true);
    mask.set(2, 0, true);

    struct Case {
        const char* name;
        Op op;
        std::vector<Matrix> inputs;
    };
    const std::vector<Case> cases = {
        {"add", [](auto&, auto& v) { return ad::add(v[0], v[1]); }, {a, b}},
        {"sub", [](auto&, auto& v) { return ad::sub(v[0], v[1]); }, {a, b}},
        {"mul", [](auto&, auto& v) { return ad::mul(v[0], v[1]); }, {a, b}},
        {"scale", [](auto&, auto& v) { return ad::scale(v[0], -2.5); }, {a}},
        {"scale_by", [](auto&, auto& v) { return ad::scale_by(v[0], v[1]); }, {a, s1}},
        {"matmul", [](auto&, auto& v) { return ad::matmul(v[0], v[1]); }, {a, c}},
        {"matmul_nt", [](auto&, auto& v) { return ad::matmul_nt(v[0], v[1]); }, {a, d}},
        {"add_row_bias", [](auto&, auto& v) { return ad::add_row_bias(v[0], v[1]); }, {a, bias}},
        {"relu", [](auto&, auto& v) { return ad::relu(v[0]); }, {away}},
        {"exp", [](auto&, auto& v) { return ad::exp(v[0]); }, {a}},
        {"square", [](auto&, auto& v) { return ad::square(v[0]); }, {a}},
        {"sum", [](auto&, auto& v) { return ad::sum(v[0]); }, {a}},
        {"mean", [](auto&, auto& v) { return ad::mean(v[0]); }, {a}},
        {"mse", [b](auto&, auto& v) { return ad::mse(v[0], b); }, {a}},
        {"softmax", [](auto&, auto& v) { return ad::softmax_rows(v[0]); }, {a}},
        {"softmax_masked", [&mask](auto&, auto& v) { return ad::softmax_rows(v[0], &mask); }, {a}},
        {"slice_cols", [](auto&, auto& v) { return ad::slice_cols(v[0], 1, 3); }, {a}},
        {"slice_rows", [](auto&, auto& v) { return ad::slice_rows(v[0], 1, 3); }, {a}},
        {"select_rows",
         [](auto&, auto& v) {
             const std::vector<std::size_t> rows{2, 0, 2};
             return ad::select_rows(v[0], rows);
         },
         {a}},
        {"hconcat",
         [](auto&, auto& v) {
             const std::vector<ad::Var> parts{v[0], v[1]};
             return ad::hconcat(parts);
         },
         {a, b}},
        {"pairwise_sqdist", [](auto&, auto& v) { return ad::pairwise_sqdist(v[0], v[1]); }, {a, d}},
        {"pairwise_sqdist_weighted", [](auto&, auto& v) { return ad::pairwise_sqdist(v[0], v[1], v[2]); },
         {a, d, bias}},
        {"layer_norm", [](auto&, auto& v) { return ad::layer_norm_rows(v[0]); }, {a}},
        {"dropout_eval",
         [](auto&, auto& v) {
             std::mt19937_64 r(1);
             return ad::dropout(v[0], 0.5, r, false);
         },
         {a}},
        {"dropout_train",
         [](auto&, auto& v) {
             std::mt19937_64 r(1);
             return ad::dropout(v[0], 0.3, r, true);
         },
         {a}},
        {"exp_of_positive", [](auto&, auto& v) { return ad::exp(ad::scale(v[0], -1.0)); }, {pos}},
    };
    for (const auto& c : cases) {
        INFO(c.name);
        CHECK(op_gradient_error(c.op, c.inputs, 99) < 1e-4);
    }
}

TEST_CASE("backward of a sum of losses equals the sum of backward passes") {
    std::mt19937_64 rng(8);
    const Matrix a = random_matrix(3, 3, rng), b = random_matrix(3, 3, rng);
    auto loss1 = [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::square(ad::matmul(x, t.constant(b)))); };
    auto loss2 = [&](ad::Tape&, ad::Var x) { return ad::mean(ad::exp(x)); };
    ad::Tape t1, t2, t3;
    ad::Var x1 = t1.variable(a), x2 = t2.variable(a), x3 = t3.variable(a);
    t1.backward(loss1(t1, x1));
    t2.backward(loss2(t2, x2));
    t3.backward(ad::add(loss1(t3, x3), loss2(t3, x3)));
    CHECK(max_abs_diff(t3.grad_of(x3), t1.grad_of(x1) + t2.grad_of(x2)) < 1e-13);
}

TEST_CASE("adam leaves parameters alone on zero gradient") {
    ParamStore store;
    store.add("p", Matrix{{1.5, -2.0}});
    adam_step(store, AdamConfig{}, 1);
    CHECK(store.value("p") == Matrix{{1.5, -2.0}});
}

TEST_CASE("first bias-corrected adam step moves by the learning rate") {
    ParamStore store;
    store.add("p", Matrix::scalar(0.0));
    store.slot("p").grad = Matrix::scalar(1.0);
    adam_step(store, AdamConfig{0.1, 0.9, 0.999, 1e-8}, 1);
    // m̂ = 1, v̂ = 1, so Δ = 0.1 / (1 + 1e-8)
    CHECK(std::abs(store.scalar("p") + 0.1 / (1.0 + 1e-8)) < 1e-15);
}

TEST_CASE("adam drives theta squared to zero") {
    ParamStore store;
    store.add("theta", Matrix::scalar(1.0));
    int steps = 0;
    for (; steps < 500 && std::abs(store.scalar("theta")) >= 1e-3; ++steps) {
        ad::Tape tape;
        ad::compute_gradients(tape, ad::sum(ad::square(tape.param(store, "theta"))), store);
        adam_step(store, AdamConfig{0.05}, steps + 1);
    }
    CHECK(std::abs(store.scalar("theta")) < 1e-3);
}

TEST_CASE("adam refuses non-finite gradients and names the slot") {
    ParamStore store;
    store.add("ok", Matrix::scalar(1.0));
    store.add("bad", Matrix::scalar(1.0));
    store.slot("ok").grad = Matrix::scalar(1.0);
    store.slot("bad").grad = Matrix::scalar(std::nan(""));
    try {
        adam_step(store, AdamConfig{}, 1);
        FAIL("expected DivergedError");
    } catch (const DivergedError& e) {
        CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
    CHECK(store.scalar("ok") == 1.0);
}

TEST_CASE("dropout identities and mean preservation") {
    std::mt19937_64 rng(1);
    std::mt19937_64 untouched(1);
    const Matrix ones(100, 100, 1.0);
    CHECK(dropout_apply(ones, 0.0, rng, true) == ones);
    CHECK(dropout_apply(ones, 0.5, rng, false) == ones);
    CHECK(rng() == untouched());

    const Matrix dropped = dropout_apply(ones, 0.5, rng, true);
    CHECK(std::abs(mean(dropped.storage()) - 1.0) < 0.05);
    for (double v : dropped.data()) CHECK((v == 0.0 || v == 2.0));
    CHECK_THROWS_AS((void)dropout_apply(ones, 1.0, rng, true), ConfigError);
    CHECK_THROWS_AS((void)dropout_apply(ones, -0.1, rng, true), ConfigError);
}

TEST_CASE("regression metrics") {
    const Vector y{1.0, 2.0, 3.0, 4.0};
    CHECK(mean_squared_error(y, y) == 0.0);
    CHECK(r_squared(y, y) == 1.0);
    const Vector flat(4, 2.5);
    CHECK(r_squared(flat, y) == doctest::Approx(0.0));
    CHECK(mean_squared_error(Vector{0.0, 0.0}, Vector{1.0, 3.0}) == 5.0);
    CHECK(sample_std(Vector{2.0}) == 0.0);
    CHECK(sample_std(Vector{1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK_THROWS((void)mean_squared_error(Vector{1.0}, Vector{1.0, 2.0}));
}

TEST_CASE("standardizer uses only the fitting rows") {
    const Matrix m{{0.0, 5.0}, {2.0, 5.0}, {10.0, 5.0}};
    const std::vector<std::size_t> rows{0, 1};
    const Standardizer s = Standardizer::fit(m, rows);
    CHECK(s.mean[0] == 1.0);
    CHECK(s.scale[1] == 1.0);
    const Matrix z = s.apply(m);
    CHECK(z(0, 0) == doctest::Approx(-z(1, 0)));
}

TEST_CASE("dataset validation") {
    RelDataset d{Matrix{{0.0}, {1.0}}, Vector{0.0, 1.0}, Matrix{{0.0, 1.0}, {1.0, 0.0}}};
    CHECK_NOTHROW(d.validate());
    d.r(0, 1) = 0.5;
    CHECK_THROWS(d.validate());
    d.r(0, 1) = -1.0;
    d.r(1, 0) = -1.0;
    CHECK_THROWS(d.validate());
    SplitIndex overlap{{0}, {0}, {}};
    CHECK_THROWS_AS(overlap.validate(2), ConfigError);
    SplitIndex no_background{{}, {0}, {1}};
    CHECK_THROWS_AS(no_background.validate(2), ConfigError);
}
