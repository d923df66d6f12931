// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "relreg/dataset.hpp"

namespace relreg::datagen {

enum class Family { parabolas, step, linear2d, square2d, sin2d, noisy7d };
enum class RelationMode { deterministic, random_half };

std::string_view to_string(Family f);
std::string_view to_string(RelationMode m);
Family parse_family(std::string_view name);
RelationMode parse_relation_mode(std::string_view name);

struct SyntheticSpec {
    Family family = Family::parabolas;
    std::size_t n = 300;
    /// Multiplier of the cluster label added to the target.
    double cluster_scale = 0.5;
    RelationMode r_mode = RelationMode::deterministic;
    std::uint64_t seed = 0;
};

/// Generated dataset plus the hidden cluster labels behind R.
struct SyntheticData {
    RelDataset data;
    std::vector<int> clusters;
};

/// Default cluster scale of a family: 1 for noisy7d, 0.5 otherwise.
double default_cluster_scale(Family f);

/// x ~ U[−1,1]; parabolas y = x² + scale·c, step y = sign(x) + scale·c.
SyntheticData gen_clusters_1d(const SyntheticSpec& spec);

/// deterministic: r_ij = 1[c_i = c_j]; random_half: same-cluster entries are
/// symmetric Bernoulli(0.5) draws. Cross-cluster entries and the diagonal are 0.
Matrix gen_rel_matrix(std::span<const int> clusters, RelationMode mode, std::uint64_t seed);

/// x₁, x₂ ~ U[−1,1]; linear x₁+2x₂, square x₁+0.5x₂², sin x₁+sin(x₂); plus scale·c.
SyntheticData gen_2d(const SyntheticSpec& spec);

/// x ∈ U[−1,1]⁷; y = cos(x₀) + cos(x₁) + x₃ + scale·c.
SyntheticData gen_7d_noisy(const SyntheticSpec& spec);

/// Dispatches on `spec.family`.
SyntheticData generate(const SyntheticSpec& spec);

/// Uniformly random disjoint background/trial/validation sets with sizes
/// round(n·fraction). Throws ConfigError if any part would be empty or the
/// fractions exceed 1.
SplitIndex split_dataset(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Same with explicit sizes.
SplitIndex split_counts(std::size_t n, std::size_t background, std::size_t trial, std::size_t validation,
                        std::uint64_t seed);

/// Derives an independent stream seed from a base seed and a tag.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace relreg::datagen
