// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <random>

#include "relreg/core/autodiff.hpp"
#include "relreg/core/matrix.hpp"

namespace relreg::nw {

struct MlpConfig {
    std::size_t hidden1 = 32;
    std::size_t hidden2 = 32;
    std::size_t output = 16;
    double dropout = 0.1;
};

/// Three affine layers, ReLU after the first two, linear output.
struct Mlp {
    std::array<Matrix, 3> weights;  // in×h1, h1×h2, h2×out
    std::array<Matrix, 3> biases;   // 1×h1, 1×h2, 1×out
    double dropout = 0.0;

    [[nodiscard]] std::size_t input_dim() const { return weights[0].rows(); }
    [[nodiscard]] std::size_t output_dim() const { return weights[2].cols(); }

    /// He-uniform weights, zero biases.
    static Mlp init(std::size_t input_dim, const MlpConfig& config, std::mt19937_64& rng);
};

/// Tape handles for the six MLP tensors.
struct MlpVars {
    std::array<ad::Var, 3> weights;
    std::array<ad::Var, 3> biases;
};

MlpVars mlp_constants(ad::Tape& tape, const Mlp& mlp);

/// Dropout (when training) sits between the hidden layers.
ad::Var mlp_forward(const MlpVars& vars, ad::Var x, double dropout, std::mt19937_64* rng, bool training);

/// Eval-mode forward pass of a fixed network. Throws ShapeError when x has
/// the wrong number of columns.
Matrix mlp_embed_forward(const Mlp& mlp, const Matrix& x);

}  // namespace relreg::nw
