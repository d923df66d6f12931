// SPDX-License-Identifier: Apache-2.0
#include "relreg/nw/mlp.hpp"

#include <cmath>

#include "relreg/core/error.hpp"

namespace relreg::nw {

Mlp Mlp::init(std::size_t input_dim, const MlpConfig& config, std::mt19937_64& rng) {
    if (input_dim == 0) throw ConfigError("mlp input dimension must be positive");
    const std::array<std::size_t, 4> dims{input_dim, config.hidden1, config.hidden2, config.output};
    Mlp mlp;
    mlp.dropout = config.dropout;
    for (std::size_t l = 0; l < 3; ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Matrix w(dims[l], dims[l + 1]);
        for (double& v : w.data()) v = dist(rng);
        mlp.weights[l] = std::move(w);
        mlp.biases[l] = Matrix(1, dims[l + 1]);
    }
    return mlp;
}

MlpVars mlp_constants(ad::Tape& tape, const Mlp& mlp) {
    MlpVars vars;
    for (std::size_t l = 0; l < 3; ++l) {
        vars.weights[l] = tape.constant(mlp.weights[l]);
        vars.biases[l] = tape.constant(mlp.biases[l]);
    }
    return vars;
}

ad::Var mlp_forward(const MlpVars& vars, ad::Var x, double dropout, std::mt19937_64* rng, bool training) {
    if (x.cols() != vars.weights[0].rows()) {
        throw ShapeError("mlp expects " + std::to_string(vars.weights[0].rows()) + " input columns, got " +
                         std::to_string(x.cols()));
    }
    const bool drop = training && dropout > 0.0 && rng != nullptr;
    ad::Var h = ad::relu(ad::add_row_bias(ad::matmul(x, vars.weights[0]), vars.biases[0]));
    if (drop) h = ad::dropout(h, dropout, *rng, true);
    h = ad::relu(ad::add_row_bias(ad::matmul(h, vars.weights[1]), vars.biases[1]));
    if (drop) h = ad::dropout(h, dropout, *rng, true);
    return ad::add_row_bias(ad::matmul(h, vars.weights[2]), vars.biases[2]);
}

Matrix mlp_embed_forward(const Mlp& mlp, const Matrix& x) {
    ad::Tape tape;
    return mlp_forward(mlp_constants(tape, mlp), tape.constant(x), 0.0, nullptr, false).value();
}

}  // namespace relreg::nw
