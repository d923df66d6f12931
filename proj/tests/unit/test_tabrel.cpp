// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "relreg/core/autodiff.hpp"
#include "relreg/core/error.hpp"
#include "relreg/datagen/datagen.hpp"
#include "relreg/tabrel/tabrel.hpp"
#include "support.hpp"

using namespace relreg;
using namespace relreg::tabrel;
using testing::random_matrix;

namespace {

RelDataset random_dataset(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    return {random_matrix(n, d, rng), random_matrix(n, 1, rng).storage(), testing::random_binary_symmetric(n, rng)};
}

TabRelConfig tiny_config() {
    TabRelConfig c;
    c.embed_dim = 4;
    c.num_heads = 2;
    c.depth = 1;
    c.dropout = 0.0;
    c.feature_embed_dim = 3;
    return c;
}

void randomize(TabRelParams& p, std::mt19937_64& rng, double scale = 0.5) {
    for (auto& slot : p.store) {
        for (double& v : slot.value.data()) v = std::uniform_real_distribution<double>(-scale, scale)(rng);
    }
}

/// Plain multi-head self-attention with a residual connection.
Matrix plain_attention(const Matrix& h, const Matrix& wq, const Matrix& wk, const Matrix& wv, const Matrix& wo,
                       std::size_t heads, const Mask& mask) {
    const std::size_t ns = h.rows(), ed = h.cols(), hd = ed / heads;
    auto mul = [](const Matrix& a, const Matrix& b) {
        Matrix out(a.rows(), b.cols());
        for (std::size_t i = 0; i < a.rows(); ++i)
            for (std::size_t j = 0; j < b.cols(); ++j)
                for (std::size_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
        return out;
    };
    const Matrix q = mul(h, wq), k = mul(h, wk), v = mul(h, wv);
    Matrix concat(ns, ed);
    for (std::size_t head = 0; head < heads; ++head) {
        for (std::size_t i = 0; i < ns; ++i) {
            std::vector<double> score(ns, -std::numeric_limits<double>::infinity());
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < ns; ++j) {
                if (mask.masked(i, j)) continue;
                double dot = 0.0;
                for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) dot += q(i, c) * k(j, c);
                score[j] = dot / std::sqrt(static_cast<double>(hd));
                peak = std::max(peak, score[j]);
            }
            double total = 0.0;
            for (double& s : score) total += (s = std::exp(s - peak));
            for (std::size_t j = 0; j < ns; ++j)
                for (std::size_t c = head * hd; c < (head + 1) * hd; ++c) concat(i, c) += score[j] / total * v(j, c);
        }
    }
    return h + mul(concat, wo);
}

}  // namespace

TEST_CASE("config validation") {
    TabRelConfig c;
    CHECK_NOTHROW(c.validate());
    c.depth = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = TabRelConfig{};
    c.embed_dim = 30;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    std::mt19937_64 rng(0);
    c = TabRelConfig{};
    c.depth = 0;
    CHECK_THROWS_AS((void)TabRelParams::init(c, 2, rng), ConfigError);
}

TEST_CASE("input matrix layout") {
    std::mt19937_64 rng(1);
    const RelDataset d = random_dataset(6, 2, rng);
    const AttentionBatch all = build_input_matrix(d, SplitIndex{{0, 1, 2, 3, 4, 5}, {}, {}}, BatchRole::trial);
    for (std::size_t i = 0; i < 6; ++i) CHECK(all.x_in(i, 2) == d.y[i]);

    const SplitIndex one{{0, 2, 3}, {5}, {1}};
    const AttentionBatch b = build_input_matrix(d, one, BatchRole::validation);
    CHECK(b.size() == 5);
    CHECK(b.rows == IndexList{0, 2, 3, 5, 1});
    const AttentionBatch t = build_input_matrix(d, one, BatchRole::trial);
    int zeros = 0;
    for (std::size_t i = 0; i < t.size(); ++i) zeros += t.x_in(i, 2) == 0.0;
    CHECK(zeros == 1);
    CHECK(t.x_in(3, 2) == 0.0);
    CHECK(b.r(0, 4) == d.r(0, 1));

    CHECK_THROWS_AS((void)build_input_matrix(d, SplitIndex{{}, {0}, {1}}, BatchRole::trial), ConfigError);
}

TEST_CASE("permuted dataset gives the same batch") {
    std::mt19937_64 rng(2);
    const RelDataset d = random_dataset(8, 3, rng);
    std::vector<std::size_t> perm(8);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::size_t> where(8);
    for (std::size_t i = 0; i < 8; ++i) where[perm[i]] = i;
    const RelDataset p = d.subset(perm);
    const SplitIndex split{{0, 1, 2, 3}, {4, 5}, {6, 7}};
    SplitIndex mapped;
    for (std::size_t i : split.background) mapped.background.push_back(where[i]);
    for (std::size_t i : split.trial) mapped.trial.push_back(where[i]);
    for (std::size_t i : split.validation) mapped.validation.push_back(where[i]);
    const AttentionBatch a = build_input_matrix(d, split, BatchRole::validation);
    const AttentionBatch b = build_input_matrix(p, mapped, BatchRole::validation);
    CHECK(a.x_in == b.x_in);
    CHECK(a.r == b.r);
}

TEST_CASE("numeric embedding") {
    std::mt19937_64 rng(3);
    TabRelConfig c = tiny_config();
    TabRelParams p = TabRelParams::init(c, 2, rng);
    const Matrix x = random_matrix(5, 2, rng);
    p.store.value("embed.w").fill(0.0);
    p.store.value("embed.b").fill(0.0);
    CHECK(num_embed(p, x) == Matrix(5, 4));

    TabRelConfig one = c;
    one.embed_dim = 1;
    one.num_heads = 1;
    one.feature_embed_dim = 1;
    TabRelParams q = TabRelParams::init(one, 1, rng);
    q.store.value("embed.w") = Matrix::scalar(1.0);
    q.store.value("embed.b") = Matrix::scalar(0.0);
    q.store.value("in.w") = Matrix::scalar(1.0);
    const Matrix col{{-2.0}, {0.0}, {1.5}};
    CHECK(num_embed(q, col) == Matrix{{0.0}, {0.0}, {1.5}});

    randomize(p, rng);
    const Matrix& w = p.store.value("embed.w");
    const Matrix& b = p.store.value("embed.b");
    const Matrix& iw = p.store.value("in.w");
    const Matrix& ib = p.store.value("in.b");
    Matrix expected(5, 4);
    for (std::size_t s = 0; s < 5; ++s) {
        for (std::size_t o = 0; o < 4; ++o) {
            double acc = ib(0, o);
            for (std::size_t f = 0; f < 2; ++f)
                for (std::size_t e = 0; e < 3; ++e) acc += std::max(0.0, x(s, f) * w(f, e) + b(f, e)) * iw(f * 3 + e, o);
            expected(s, o) = acc;
        }
    }
    CHECK(max_abs_diff(num_embed(p, x), expected) < 1e-14);
    CHECK_THROWS_AS((void)num_embed(p, Matrix(2, 3)), ShapeError);
}

TEST_CASE("relation bias") {
    std::mt19937_64 rng(4);
    const Matrix r = testing::random_binary_symmetric(5, rng);
    const std::vector<double> zero{0.0, 0.0};
    for (const auto& m : build_rel_bias(r, zero)) CHECK(m == Matrix(5, 5));
    const std::vector<double> two{2.0};
    const auto scaled = build_rel_bias(r, two);
    for (double v : scaled[0].data()) CHECK((v == 0.0 || v == 2.0));
    const Matrix rr = random_matrix(4, 4, rng, 0.0, 1.0);
    const std::vector<double> s{0.3, -1.7, 4.0};
    const auto bias = build_rel_bias(rr, s);
    REQUIRE(bias.size() == 3);
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) CHECK(bias[h](i, j) == s[h] * rr(i, j));
    CHECK_THROWS_AS((void)build_rel_bias(Matrix(2, 3), s), ShapeError);
}

TEST_CASE("trial masks") {
    CHECK(build_trial_mask(4, 0) == Mask(4, 4));
    const Mask m = build_trial_mask(3, 1);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(m.masked(r, 2));
        CHECK(!m.masked(r, 0));
        CHECK(!m.masked(r, 1));
    }
    CHECK_THROWS_AS((void)build_trial_mask(3, 3), ConfigError);
    for (std::size_t ns = 1; ns < 8; ++ns)
        for (std::size_t t = 0; t < ns; ++t) {
            for (const Mask& mask : {build_trial_mask(ns, t), build_trial_pair_mask(ns, t)}) {
                for (std::size_t r = 0; r < ns; ++r) {
                    bool open = false;
                    for (std::size_t c = 0; c < ns; ++c) open = open || !mask.masked(r, c);
                    CHECK(open);
                }
            }
        }
    const Mask pair = build_trial_pair_mask(4, 2);
    CHECK(!pair.masked(2, 2));
    CHECK(pair.masked(2, 3));
    CHECK(!pair.masked(0, 3));
}

TEST_CASE("attention without relation scales equals plain attention") {
    std::mt19937_64 rng(5);
    TabRelConfig c;
    c.embed_dim = 8;
    c.num_heads = 2;
    c.depth = 1;
    TabRelParams p = TabRelParams::init(c, 2, rng);
    const Matrix h = random_matrix(7, 8, rng);
    const Matrix r = testing::random_binary_symmetric(7, rng);
    for (const Mask& mask : {build_trial_mask(7, 3), build_trial_pair_mask(7, 3), Mask(7, 7)}) {
        const Matrix got = rmha_forward(p, 0, h, r, mask);
        const Matrix want = plain_attention(h, p.store.value("L0.wq"), p.store.value("L0.wk"), p.store.value("L0.wv"),
                                            p.store.value("L0.wo"), 2, mask);
        CHECK(max_abs_diff(got, want) < 1e-10);
    }
}

TEST_CASE("a single allowed key passes its projected value through") {
    std::mt19937_64 rng(6);
    TabRelConfig c;
    c.embed_dim = 4;
    c.num_heads = 2;
    c.depth = 1;
    TabRelParams p = TabRelParams::init(c, 1, rng);
    p.store.value("L0.s") = Matrix{{0.7, -0.4}};
    const Matrix h = random_matrix(3, 4, rng);
    const Mask mask = build_trial_mask(3, 2);
    const Matrix out = rmha_forward(p, 0, h, testing::random_binary_symmetric(3, rng), mask);
    const Matrix v0 = matmul(matmul(select_rows(h, std::vector<std::size_t>{0}), p.store.value("L0.wv")),
                             p.store.value("L0.wo"));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(out(i, k) - (h(i, k) + v0(0, k))) < 1e-12);
}

TEST_CASE("a large relation scale saturates attention on the related key") {
    std::mt19937_64 rng(7);
    TabRelConfig c;
    c.embed_dim = 4;
    c.num_heads = 1;
    c.depth = 1;
    TabRelParams p = TabRelParams::init(c, 1, rng);
    p.store.value("L0.s") = Matrix::scalar(50.0);
    const Matrix h = random_matrix(5, 4, rng, -0.5, 0.5);
    Matrix r(5, 5);
    r(0, 3) = r(3, 0) = 1.0;
    ad::Tape tape;
    const ForwardState state{nullptr, false, true};
    const RmhaResult res =
        record_rmha(tape, ParamSource::constants(p.store), c, 0, tape.constant(h), r, Mask(5, 5), state);
    CHECK(res.attention[0](0, 3) > 1.0 - 1e-9);
    CHECK(res.attention[0](3, 0) > 1.0 - 1e-9);
}

TEST_CASE("forward pass properties") {
    std::mt19937_64 rng(8);
    const RelDataset d = random_dataset(12, 2, rng);
    const SplitIndex split{{0, 1, 2, 3, 4, 5}, {6, 7, 8}, {9, 10, 11}};
    const AttentionBatch batch = build_input_matrix(d, split, BatchRole::validation);
    TabRelConfig c;
    c.embed_dim = 8;
    c.num_heads = 2;
    TabRelParams p = TabRelParams::init(c, 3, rng);
    for (double v : tabrel_forward(p, batch)) CHECK(v == 0.0);

    randomize(p, rng);
    const Vector a = tabrel_forward(p, batch);
    const Vector b = tabrel_forward(p, batch);
    CHECK(a == b);

    ad::Tape tape;
    const ForwardResult res = record_forward(tape, ParamSource::constants(p.store), c, batch, {nullptr, false, true});
    for (const auto& layer : res.attention)
        for (const auto& head : layer)
            for (std::size_t i = 0; i < batch.size(); ++i) {
                double total = 0.0;
                for (std::size_t j = 0; j < batch.n_background; ++j) total += head(i, j);
                CHECK(std::abs(total - 1.0) < 1e-9);
            }
}

TEST_CASE("trial rows cannot influence predictions through their labels or other rows' features") {
    std::mt19937_64 rng(9);
    const RelDataset d = random_dataset(14, 2, rng);
    const SplitIndex split{{0, 1, 2, 3, 4, 5, 6}, {7, 8, 9, 10}, {11, 12, 13}};
    for (std::size_t depth : {1u, 2u, 3u}) {
        TabRelConfig c;
        c.embed_dim = 8;
        c.num_heads = 2;
        c.depth = depth;
        TabRelParams p = TabRelParams::init(c, 3, rng);
        randomize(p, rng);
        const Vector base = tabrel_forward(p, build_input_matrix(d, split, BatchRole::validation));

        RelDataset labels = d;
        for (std::size_t i : split.trial) labels.y[i] += 100.0;
        for (std::size_t i : split.validation) labels.y[i] -= 50.0;
        CHECK(tabrel_forward(p, build_input_matrix(labels, split, BatchRole::validation)) == base);

        for (std::size_t j = 7; j < 14; ++j) {
            RelDataset feat = d;
            feat.x(j, 0) += 3.0;
            feat.x(j, 1) -= 2.0;
            const Vector moved = tabrel_forward(p, build_input_matrix(feat, split, BatchRole::validation));
            for (std::size_t k = 0; k < base.size(); ++k) {
                if (k == j) continue;
                CHECK(moved[k] == base[k]);
            }
        }
    }
}

TEST_CASE("parameter gradients on a tiny config") {
    std::mt19937_64 rng(10);
    const RelDataset d = random_dataset(6, 1, rng);
    const SplitIndex split{{0, 1, 2}, {3, 4}, {5}};
    const AttentionBatch batch = build_input_matrix(d, split, BatchRole::validation);
    REQUIRE(batch.size() == 6);
    const TabRelConfig c = tiny_config();
    TabRelParams p = TabRelParams::init(c, 2, rng);
    randomize(p, rng, 0.8);
    Matrix target(2, 1);
    target(0, 0) = d.y[3];
    target(1, 0) = d.y[4];

    auto loss_value = [&](const ParamStore& store) {
        ad::Tape tape;
        const ForwardResult res = record_forward(tape, ParamSource::constants(store), c, batch, {});
        return ad::mse(ad::slice_rows(res.predictions, 3, 5), target).value()(0, 0);
    };
    ad::Tape tape;
    const ForwardResult res = record_forward(tape, ParamSource::trainable(p.store), c, batch, {});
    ad::compute_gradients(tape, ad::mse(ad::slice_rows(res.predictions, 3, 5), target), p.store);

    for (const auto& slot : p.store) {
        INFO(slot.name);
        auto f = [&](const Matrix& x) {
            ParamStore copy;
            copy.assign_values(p.store);
            for (const auto& s : p.store) copy.add(s.name, s.name == slot.name ? x : s.value);
            return loss_value(copy);
        };
        CHECK(testing::max_rel_error(slot.grad, testing::numeric_gradient(f, slot.value)) < 1e-3);
    }
}

TEST_CASE("constant targets are learned exactly") {
    std::mt19937_64 rng(11);
    RelDataset d = random_dataset(30, 2, rng);
    std::fill(d.y.begin(), d.y.end(), 3.5);
    const SplitIndex split = datagen::split_dataset(30, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0);
    TabRelFitConfig fc;
    fc.epochs = 20;
    const TabRelFit fit = tabrel_fit(d, split, tiny_config(), fc);
    CHECK(fit.trial_mse < 1e-20);
    for (double v : fit.validation_predictions) CHECK(std::abs(v - 3.5) < 1e-9);
}

TEST_CASE("fit is deterministic and learns the clusters") {
    datagen::SyntheticSpec spec;
    spec.n = 90;
    spec.seed = 2;
    const auto gen = datagen::generate(spec);
    const SplitIndex split = datagen::split_dataset(90, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 2);
    TabRelConfig c;
    c.embed_dim = 16;
    TabRelFitConfig fc;
    fc.epochs = 300;
    fc.learning_rate = 3e-3;
    fc.seed = 5;
    const TabRelFit a = tabrel_fit(gen.data, split, c, fc);
    const TabRelFit b = tabrel_fit(gen.data, split, c, fc);
    CHECK(a.validation_predictions == b.validation_predictions);
    CHECK(a.loss_curve.back() < a.loss_curve.front());
    CHECK(a.validation_r2 > 0.5);

    TabRelFitConfig quick = fc;
    quick.timeout_seconds = 1e-9;
    CHECK_THROWS_AS((void)tabrel_fit(gen.data, split, c, quick), TimeoutError);
}
