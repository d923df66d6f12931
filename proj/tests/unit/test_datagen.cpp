// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>

#include "doctest.h"
#include "relreg/core/error.hpp"
#include "relreg/datagen/datagen.hpp"

using namespace relreg;
using namespace relreg::datagen;

namespace {

SyntheticData make(Family f, std::size_t n, std::uint64_t seed, RelationMode mode = RelationMode::deterministic,
                   std::optional<double> scale = std::nullopt) {
    SyntheticSpec s;
    s.family = f;
    s.n = n;
    s.seed = seed;
    s.r_mode = mode;
    s.cluster_scale = scale.value_or(default_cluster_scale(f));
    return generate(s);
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

TEST_CASE("family and mode names round trip") {
    for (Family f : {Family::parabolas, Family::step, Family::linear2d, Family::square2d, Family::sin2d,
                     Family::noisy7d}) {
        CHECK(parse_family(to_string(f)) == f);
    }
    CHECK(parse_relation_mode("random_half") == RelationMode::random_half);
    CHECK_THROWS_AS((void)parse_family("cubic"), ConfigError);
}

TEST_CASE("generators are pure functions of spec and seed") {
    for (Family f : {Family::parabolas, Family::step, Family::linear2d, Family::square2d, Family::sin2d,
                     Family::noisy7d}) {
        for (RelationMode m : {RelationMode::deterministic, RelationMode::random_half}) {
            const auto a = make(f, 120, 9, m);
            const auto b = make(f, 120, 9, m);
            CHECK(a.data.x == b.data.x);
            CHECK(a.data.y == b.data.y);
            CHECK(a.data.r == b.data.r);
            CHECK(a.clusters == b.clusters);
            CHECK(make(f, 120, 10, m).data.y != a.data.y);
        }
    }
}

TEST_CASE("relation matrices are symmetric, zero-diagonal and within clusters") {
    for (Family f : {Family::parabolas, Family::sin2d, Family::noisy7d}) {
        for (RelationMode m : {RelationMode::deterministic, RelationMode::random_half}) {
            const auto g = make(f, 150, 3, m);
            const Matrix& r = g.data.r;
            for (std::size_t i = 0; i < 150; ++i) {
                CHECK(r(i, i) == 0.0);
                for (std::size_t j = 0; j < 150; ++j) {
                    CHECK(r(i, j) == r(j, i));
                    if (g.clusters[i] != g.clusters[j]) CHECK(r(i, j) == 0.0);
                    if (m == RelationMode::deterministic && i != j && g.clusters[i] == g.clusters[j])
                        CHECK(r(i, j) == 1.0);
                }
            }
        }
    }
}

TEST_CASE("one-dimensional families follow their formulas") {
    const auto flat = make(Family::parabolas, 200, 1, RelationMode::deterministic, 0.0);
    for (std::size_t i = 0; i < 200; ++i) CHECK(flat.data.y[i] == flat.data.x(i, 0) * flat.data.x(i, 0));
    const auto step = make(Family::step, 200, 1, RelationMode::deterministic, 0.0);
    for (std::size_t i = 0; i < 200; ++i) CHECK(step.data.y[i] == sign(step.data.x(i, 0)));

    const auto p = make(Family::parabolas, 500, 2);
    const double scale = default_cluster_scale(Family::parabolas);
    for (std::size_t i = 0; i < 500; ++i) {
        CHECK(p.data.y[i] >= 0.0);
        CHECK(p.data.y[i] <= 1.0 + 2.0 * scale);
        CHECK(std::abs(p.data.y[i] - (p.data.x(i, 0) * p.data.x(i, 0) + scale * p.clusters[i])) < 1e-15);
    }
}

TEST_CASE("cluster proportions are close to a third") {
    const auto g = make(Family::parabolas, 3000, 4);
    const double sd = std::sqrt(3000.0 * (1.0 / 3.0) * (2.0 / 3.0));
    for (int c = 0; c < 3; ++c) {
        const auto count = std::count(g.clusters.begin(), g.clusters.end(), c);
        CHECK(std::abs(static_cast<double>(count) - 1000.0) < 3.0 * sd);
    }
}

TEST_CASE("relation matrix from cluster labels") {
    const std::vector<int> same(6, 2);
    const Matrix r = gen_rel_matrix(same, RelationMode::deterministic, 0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(r(i, j) == (i == j ? 0.0 : 1.0));

    const std::vector<int> sorted{0, 0, 1, 1, 1, 2};
    const Matrix b = gen_rel_matrix(sorted, RelationMode::deterministic, 0);
    const Matrix expected{{0, 1, 0, 0, 0, 0}, {1, 0, 0, 0, 0, 0}, {0, 0, 0, 1, 1, 0},
                          {0, 0, 1, 0, 1, 0}, {0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 0, 0}};
    CHECK(b == expected);

    const std::vector<int> block(400, 0);
    const Matrix h = gen_rel_matrix(block, RelationMode::random_half, 11);
    double ones = 0.0;
    const double pairs = 400.0 * 399.0 / 2.0;
    for (std::size_t i = 0; i < 400; ++i)
        for (std::size_t j = i + 1; j < 400; ++j) ones += h(i, j);
    CHECK(std::abs(ones / pairs - 0.5) < 3.0 * std::sqrt(0.25 / pairs));
}

TEST_CASE("two-dimensional families follow their formulas") {
    const auto lin = make(Family::linear2d, 300, 5, RelationMode::deterministic, 0.5);
    for (std::size_t i = 0; i < 300; ++i) {
        const double x1 = lin.data.x(i, 0), x2 = lin.data.x(i, 1);
        CHECK(std::abs(lin.data.y[i] - (x1 + 2.0 * x2 + 0.5 * lin.clusters[i])) < 1e-15);
    }
    const auto sq = make(Family::square2d, 300, 5);
    for (std::size_t i = 0; i < 300; ++i) {
        const double x1 = sq.data.x(i, 0), x2 = sq.data.x(i, 1);
        CHECK(std::abs(sq.data.y[i] - (x1 + 0.5 * x2 * x2 + 0.5 * sq.clusters[i])) < 1e-15);
    }
    const auto sn = make(Family::sin2d, 300, 5, RelationMode::deterministic, 0.0);
    for (std::size_t i = 0; i < 300; ++i) {
        CHECK(std::abs(sn.data.y[i]) <= 3.0);
        CHECK(std::abs(sn.data.y[i] - (sn.data.x(i, 0) + std::sin(sn.data.x(i, 1)))) < 1e-15);
    }
}

TEST_CASE("noisy seven-dimensional family") {
    const auto g = make(Family::noisy7d, 300, 6);
    CHECK(g.data.dims() == 7);
    for (std::size_t i = 0; i < 300; ++i) {
        const auto x = g.data.x.row_span(i);
        const double base = std::cos(x[0]) + std::cos(x[1]) + x[3];
        CHECK(std::abs(g.data.y[i] - (base + g.clusters[i])) < 1e-15);
        CHECK(base >= 2.0 * std::cos(1.0) - 1.0);
        CHECK(base <= 3.0);
    }
}

TEST_CASE("split sizes and disjointness") {
    const SplitIndex s = split_dataset(300, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0);
    CHECK(s.background.size() == 100);
    CHECK(s.trial.size() == 100);
    CHECK(s.validation.size() == 100);
    const SplitIndex tiny = split_dataset(3, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0);
    CHECK(tiny.background.size() == 1);
    CHECK(tiny.trial.size() == 1);
    CHECK(tiny.validation.size() == 1);
    CHECK(split_dataset(200, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0).background.size() +
              split_dataset(200, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0).trial.size() +
              split_dataset(200, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0).validation.size() ==
          200);

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> size(3, 500);
    std::uniform_real_distribution<double> frac(0.1, 0.33);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size(rng);
        const std::array<double, 3> f{frac(rng), frac(rng), frac(rng)};
        SplitIndex sp;
        try {
            sp = split_dataset(n, f, trial);
        } catch (const ConfigError&) {
            continue;
        }
        std::set<std::size_t> seen;
        for (const auto* part : {&sp.background, &sp.trial, &sp.validation})
            for (std::size_t i : *part) {
                REQUIRE(i < n);
                REQUIRE(seen.insert(i).second);
            }
        CHECK(seen.size() <= n);
    }
    CHECK_THROWS_AS((void)split_dataset(2, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 0), ConfigError);
    CHECK_THROWS_AS((void)split_dataset(10, {0.5, 0.5, 0.5}, 0), ConfigError);
    CHECK_THROWS_AS((void)split_counts(10, 5, 5, 1, 0), ConfigError);
}

TEST_CASE("derived seeds separate streams") {
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}
