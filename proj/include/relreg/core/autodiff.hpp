// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relreg/core/matrix.hpp"
#include "relreg/core/param_store.hpp"

namespace relreg::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    [[nodiscard]] const Matrix& value() const;
    [[nodiscard]] std::size_t id() const noexcept { return id_; }
    [[nodiscard]] Tape* tape() const noexcept { return tape_; }
    [[nodiscard]] std::size_t rows() const { return value().rows(); }
    [[nodiscard]] std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Records matrix-valued operations in execution order and replays them in
/// reverse to accumulate gradients. Node ids grow monotonically, so reverse
/// id order is a reverse topological order.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    Var constant(Matrix value);
    /// Free leaf that accumulates a gradient readable with `grad_of`.
    Var variable(Matrix value);
    /// Leaf bound to a ParamStore slot; `backward` adds its gradient to the slot.
    Var param(ParamStore& store, std::string_view name);

    Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
    Var record(Matrix value, std::span<const Var> parents, Backward backward);

    /// Reverse sweep from a 1x1 loss. Throws DivergedError on a non-finite loss.
    void backward(Var loss);

    [[nodiscard]] const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    [[nodiscard]] const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    [[nodiscard]] Matrix grad_of(Var v) const;
    /// Adds `g` into the gradient of node `id` when that node requires one.
    void accumulate(std::size_t id, const Matrix& g);
    void accumulate(std::size_t id, Matrix&& g);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        bool requires_grad = false;
        bool has_grad = false;
    };
    struct Binding {
        std::size_t node;
        ParamStore* store;
        std::string name;
    };

    std::vector<Node> nodes_;
    std::vector<Binding> bindings_;
};

/// Zeroes the store's gradients, then back-propagates `loss` into it.
void compute_gradients(Tape& tape, Var loss, ParamStore& params);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// `s` must be 1x1.
Var scale_by(Var a, Var s);
Var matmul(Var a, Var b);
/// a · bᵀ
Var matmul_nt(Var a, Var b);
/// Adds a 1xC row to every row of a.
Var add_row_bias(Var a, Var bias);
Var relu(Var a);
Var exp(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
/// Mean squared error against a constant target of the same shape.
Var mse(Var prediction, const Matrix& target);
Var softmax_rows(Var a, const Mask* mask = nullptr);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var select_rows(Var a, std::span<const std::size_t> rows);
Var hconcat(std::span<const Var> parts);
/// out(s,i) = Σ_k w_k (a(s,k) − b(i,k))²; unit weights when `weights` is empty.
Var pairwise_sqdist(Var a, Var b, std::optional<Var> weights = std::nullopt);
/// Inverted dropout: survivors scaled by 1/(1−rate). Identity when not training.
Var dropout(Var a, double rate, std::mt19937_64& rng, bool training);
/// Per-row standardization without affine parameters.
Var layer_norm_rows(Var a, double epsilon = 1e-5);

}  // namespace relreg::ad
