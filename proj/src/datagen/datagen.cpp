// SPDX-License-Identifier: Apache-2.0
#include "relreg/datagen/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "relreg/core/error.hpp"

namespace relreg::datagen {

std::string_view to_string(Family f) {
    switch (f) {
        case Family::parabolas: return "parabolas";
        case Family::step: return "step";
        case Family::linear2d: return "linear2d";
        case Family::square2d: return "square2d";
        case Family::sin2d: return "sin2d";
        case Family::noisy7d: return "noisy7d";
    }
    return "unknown";
}

std::string_view to_string(RelationMode m) {
    return m == RelationMode::deterministic ? "deterministic" : "random_half";
}

Family parse_family(std::string_view name) {
    for (Family f : {Family::parabolas, Family::step, Family::linear2d, Family::square2d, Family::sin2d,
                     Family::noisy7d}) {
        if (to_string(f) == name) return f;
    }
    throw ConfigError("unknown synthetic family '" + std::string(name) + "'");
}

RelationMode parse_relation_mode(std::string_view name) {
    if (name == "deterministic") return RelationMode::deterministic;
    if (name == "random_half") return RelationMode::random_half;
    throw ConfigError("unknown relation mode '" + std::string(name) + "'");
}

double default_cluster_scale(Family f) { return f == Family::noisy7d ? 1.0 : 0.5; }

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    // FNV-1a over the tag, mixed with the base through splitmix64.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

void check_n(const SyntheticSpec& spec) {
    if (spec.n < 3) throw ConfigError("synthetic datasets need n >= 3");
}

struct Draws {
    Matrix x;
    std::vector<int> clusters;
};

Draws draw(std::size_t n, std::size_t dims, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_int_distribution<int> cluster(0, 2);
    Draws d{Matrix(n, dims), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < dims; ++k) d.x(i, k) = unit(rng);
        d.clusters[i] = cluster(rng);
    }
    return d;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

SyntheticData assemble(Draws d, Vector y, const SyntheticSpec& spec) {
    SyntheticData out;
    out.data.r = gen_rel_matrix(d.clusters, spec.r_mode, derive_seed(spec.seed, "relations"));
    out.data.x = std::move(d.x);
    out.data.y = std::move(y);
    out.clusters = std::move(d.clusters);
    return out;
}

}  // namespace

SyntheticData gen_clusters_1d(const SyntheticSpec& spec) {
    check_n(spec);
    if (spec.family != Family::parabolas && spec.family != Family::step) {
        throw ConfigError("gen_clusters_1d handles parabolas and step only");
    }
    std::mt19937_64 rng(derive_seed(spec.seed, "features"));
    Draws d = draw(spec.n, 1, rng);
    Vector y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = d.x(i, 0);
        const double base = spec.family == Family::parabolas ? x * x : sign(x);
        y[i] = base + spec.cluster_scale * d.clusters[i];
    }
    return assemble(std::move(d), std::move(y), spec);
}

Matrix gen_rel_matrix(std::span<const int> clusters, RelationMode mode, std::uint64_t seed) {
    const std::size_t n = clusters.size();
    Matrix r(n, n);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (clusters[i] != clusters[j]) continue;
            const double v = mode == RelationMode::deterministic ? 1.0 : (coin(rng) ? 1.0 : 0.0);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

SyntheticData gen_2d(const SyntheticSpec& spec) {
    check_n(spec);
    std::mt19937_64 rng(derive_seed(spec.seed, "features"));
    Draws d = draw(spec.n, 2, rng);
    Vector y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x1 = d.x(i, 0), x2 = d.x(i, 1);
        double base = 0.0;
        switch (spec.family) {
            case Family::linear2d: base = x1 + 2.0 * x2; break;
            case Family::square2d: base = x1 + 0.5 * x2 * x2; break;
            case Family::sin2d: base = x1 + std::sin(x2); break;
            default: throw ConfigError("gen_2d handles linear2d, square2d and sin2d only");
        }
        y[i] = base + spec.cluster_scale * d.clusters[i];
    }
    return assemble(std::move(d), std::move(y), spec);
}

SyntheticData gen_7d_noisy(const SyntheticSpec& spec) {
    check_n(spec);
    if (spec.family != Family::noisy7d) throw ConfigError("gen_7d_noisy handles noisy7d only");
    std::mt19937_64 rng(derive_seed(spec.seed, "features"));
    Draws d = draw(spec.n, 7, rng);
    Vector y(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        y[i] = std::cos(d.x(i, 0)) + std::cos(d.x(i, 1)) + d.x(i, 3) + spec.cluster_scale * d.clusters[i];
    }
    return assemble(std::move(d), std::move(y), spec);
}

SyntheticData generate(const SyntheticSpec& spec) {
    switch (spec.family) {
        case Family::parabolas:
        case Family::step: return gen_clusters_1d(spec);
        case Family::linear2d:
        case Family::square2d:
        case Family::sin2d: return gen_2d(spec);
        case Family::noisy7d: return gen_7d_noisy(spec);
    }
    throw ConfigError("unknown synthetic family");
}

SplitIndex split_dataset(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
    double total = 0.0;
    for (double f : fractions) {
        if (!(f >= 0.0)) throw ConfigError("split fractions must be nonnegative");
        total += f;
    }
    if (total > 1.0 + 1e-9) throw ConfigError("split fractions sum to more than 1");
    std::array<std::size_t, 3> sizes{};
    for (std::size_t k = 0; k < 3; ++k) sizes[k] = static_cast<std::size_t>(std::llround(fractions[k] * n));
    // Rounding all three parts up can overshoot n by one or two rows.
    while (sizes[0] + sizes[1] + sizes[2] > n) {
        std::size_t worst = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (sizes[k] - fractions[k] * n > sizes[worst] - fractions[worst] * n) worst = k;
        }
        if (sizes[worst] == 0) break;
        --sizes[worst];
    }
    return split_counts(n, sizes[0], sizes[1], sizes[2], seed);
}

SplitIndex split_counts(std::size_t n, std::size_t background, std::size_t trial, std::size_t validation,
                        std::uint64_t seed) {
    if (background == 0 || trial == 0 || validation == 0) {
        throw ConfigError("infeasible split: every part needs at least one row (n=" + std::to_string(n) + ")");
    }
    if (background + trial + validation > n) {
        throw ConfigError("infeasible split: " + std::to_string(background + trial + validation) +
                          " rows requested from " + std::to_string(n));
    }
    IndexList perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, "split"));
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitIndex split;
    auto it = perm.begin();
    split.background.assign(it, it + static_cast<std::ptrdiff_t>(background));
    it += static_cast<std::ptrdiff_t>(background);
    split.trial.assign(it, it + static_cast<std::ptrdiff_t>(trial));
    it += static_cast<std::ptrdiff_t>(trial);
    split.validation.assign(it, it + static_cast<std::ptrdiff_t>(validation));
    for (IndexList* part : {&split.background, &split.trial, &split.validation}) std::sort(part->begin(), part->end());
    return split;
}

}  // namespace relreg::datagen
