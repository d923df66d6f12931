// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/autodiff.hpp"

#include <cmath>

#include "relreg/core/dropout.hpp"
#include "relreg/core/error.hpp"

namespace relreg::ad {

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, false});
    return {this, nodes_.size() - 1};
}

Var Tape::variable(Matrix value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, true, false});
    return {this, nodes_.size() - 1};
}

Var Tape::param(ParamStore& store, std::string_view name) {
    Var v = variable(store.value(name));
    bindings_.push_back(Binding{v.id(), &store, std::string(name)});
    return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
    bool needs = false;
    for (const Var& p : parents) {
        if (p.tape() != this) throw ConfigError("operands recorded on different tapes");
        needs = needs || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : nullptr, needs, false});
    return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = g;
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

void Tape::accumulate(std::size_t id, Matrix&& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (!n.has_grad) {
        n.grad = std::move(g);
        n.has_grad = true;
    } else {
        n.grad += g;
    }
}

Matrix Tape::grad_of(Var v) const {
    const Node& n = nodes_[v.id()];
    if (!n.has_grad) return Matrix(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var loss) {
    const Matrix& lv = value(loss.id());
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward requires a 1x1 loss, got " + lv.shape_string());
    if (!std::isfinite(lv(0, 0))) throw DivergedError("loss is not finite");
    for (auto& n : nodes_) {
        n.has_grad = false;
        n.grad = Matrix();
    }
    accumulate(loss.id(), Matrix::scalar(1.0));
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
        if (!nodes_[id].has_grad || !nodes_[id].backward) continue;
        nodes_[id].backward(*this, id);
    }
    for (const auto& b : bindings_) {
        const Node& n = nodes_[b.node];
        if (n.has_grad) b.store->slot(b.name).grad += n.grad;
    }
}

void compute_gradients(Tape& tape, Var loss, ParamStore& params) {
    params.zero_grad();
    tape.backward(loss);
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + " shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    }
}

Tape& tape_of(Var a) { return *a.tape(); }

}  // namespace

Var add(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "add");
    return tape_of(a).record(a.value() + b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a.id(), t.grad(self));
        t.accumulate(b.id(), t.grad(self));
    });
}

Var sub(Var a, Var b) {
    require_same_shape(a.value(), b.value(), "sub");
    return tape_of(a).record(a.value() - b.value(), {a, b}, [a, b](Tape& t, std::size_t self) {
        t.accumulate(a.id(), t.grad(self));
        if (t.requires_grad(b.id())) t.accumulate(b.id(), t.grad(self) * -1.0);
    });
}

Var mul(Var a, Var b) {
    return tape_of(a).record(hadamard(a.value(), b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
        if (t.requires_grad(a.id())) t.accumulate(a.id(), hadamard(t.grad(self), t.value(b.id())));
        if (t.requires_grad(b.id())) t.accumulate(b.id(), hadamard(t.grad(self), t.value(a.id())));
    });
}

Var scale(Var a, double s) {
    return tape_of(a).record(a.value() * s, {a}, [a, s](Tape& t, std::size_t self) {
        t.accumulate(a.id(), t.grad(self) * s);
    });
}

Var scale_by(Var a, Var s) {
    if (s.value().rows() != 1 || s.value().cols() != 1) throw ShapeError("scale_by expects a 1x1 scale");
    return tape_of(a).record(a.value() * s.value()(0, 0), {a, s}, [a, s](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(a.id())) t.accumulate(a.id(), g * t.value(s.id())(0, 0));
        if (t.requires_grad(s.id())) {
            double acc = 0.0;
            const auto gd = g.data();
            const auto ad = t.value(a.id()).data();
            for (std::size_t i = 0; i < gd.size(); ++i) acc += gd[i] * ad[i];
            t.accumulate(s.id(), Matrix::scalar(acc));
        }
    });
}

Var matmul(Var a, Var b) {
    return tape_of(a).record(relreg::matmul(a.value(), b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
        if (t.requires_grad(a.id())) t.accumulate(a.id(), relreg::matmul_nt(t.grad(self), t.value(b.id())));
        if (t.requires_grad(b.id())) t.accumulate(b.id(), relreg::matmul_tn(t.value(a.id()), t.grad(self)));
    });
}

Var matmul_nt(Var a, Var b) {
    return tape_of(a).record(relreg::matmul_nt(a.value(), b.value()), {a, b}, [a, b](Tape& t, std::size_t self) {
        if (t.requires_grad(a.id())) t.accumulate(a.id(), relreg::matmul(t.grad(self), t.value(b.id())));
        if (t.requires_grad(b.id())) t.accumulate(b.id(), relreg::matmul_tn(t.grad(self), t.value(a.id())));
    });
}

Var add_row_bias(Var a, Var bias) {
    const Matrix& av = a.value();
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != av.cols()) {
        throw ShapeError("add_row_bias expects 1x" + std::to_string(av.cols()) + " bias, got " + bv.shape_string());
    }
    Matrix out = av;
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row_span(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
    }
    return tape_of(a).record(std::move(out), {a, bias}, [a, bias](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        t.accumulate(a.id(), g);
        if (t.requires_grad(bias.id())) {
            Matrix gb(1, g.cols());
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
            t.accumulate(bias.id(), std::move(gb));
        }
    });
}

Var relu(Var a) {
    Matrix out = a.value();
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return tape_of(a).record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        Matrix g = t.grad(self);
        const auto in = t.value(a.id()).data();
        auto gd = g.data();
        for (std::size_t i = 0; i < gd.size(); ++i)
            if (!(in[i] > 0.0)) gd[i] = 0.0;
        t.accumulate(a.id(), std::move(g));
    });
}

Var exp(Var a) {
    Matrix out = a.value();
    for (double& v : out.data()) v = std::exp(v);
    return tape_of(a).record(std::move(out), {a}, [a](Tape& t, std::size_t self) {
        t.accumulate(a.id(), hadamard(t.grad(self), t.value(self)));
    });
}

Var square(Var a) {
    return tape_of(a).record(hadamard(a.value(), a.value()), {a}, [a](Tape& t, std::size_t self) {
        t.accumulate(a.id(), hadamard(t.grad(self), t.value(a.id())) * 2.0);
    });
}

Var sum(Var a) {
    double total = 0.0;
    for (double v : a.value().data()) total += v;
    return tape_of(a).record(Matrix::scalar(total), {a}, [a](Tape& t, std::size_t self) {
        const Matrix& av = t.value(a.id());
        t.accumulate(a.id(), Matrix(av.rows(), av.cols(), t.grad(self)(0, 0)));
    });
}

Var mean(Var a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var mse(Var prediction, const Matrix& target) {
    require_same_shape(prediction.value(), target, "mse");
    if (target.empty()) throw ShapeError("mse of an empty prediction");
    Matrix diff = prediction.value() - target;
    double total = 0.0;
    for (double v : diff.data()) total += v * v;
    const double n = static_cast<double>(diff.size());
    return tape_of(prediction).record(
        Matrix::scalar(total / n), {prediction}, [prediction, diff = std::move(diff), n](Tape& t, std::size_t self) {
            t.accumulate(prediction.id(), diff * (2.0 * t.grad(self)(0, 0) / n));
        });
}

Var softmax_rows(Var a, const Mask* mask) {
    return tape_of(a).record(relreg::softmax_rows(a.value(), mask), {a}, [a](Tape& t, std::size_t self) {
        const Matrix& p = t.value(self);
        const Matrix& g = t.grad(self);
        Matrix ga(p.rows(), p.cols());
        for (std::size_t r = 0; r < p.rows(); ++r) {
            auto pr = p.row_span(r);
            auto gr = g.row_span(r);
            double dot = 0.0;
            for (std::size_t c = 0; c < pr.size(); ++c) dot += pr[c] * gr[c];
            auto out = ga.row_span(r);
            for (std::size_t c = 0; c < pr.size(); ++c) out[c] = pr[c] * (gr[c] - dot);
        }
        t.accumulate(a.id(), std::move(ga));
    });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
    const Matrix& av = a.value();
    if (begin > end || end > av.cols()) throw ShapeError("slice_cols range out of bounds");
    const std::size_t width = end - begin;
    Matrix out(av.rows(), width);
    for (std::size_t r = 0; r < av.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) out(r, c) = av(r, begin + c);
    return tape_of(a).record(std::move(out), {a}, [a, begin, width](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(a.id());
        Matrix ga(av.rows(), av.cols());
        for (std::size_t r = 0; r < g.rows(); ++r)
            for (std::size_t c = 0; c < width; ++c) ga(r, begin + c) = g(r, c);
        t.accumulate(a.id(), std::move(ga));
    });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
    const Matrix& av = a.value();
    if (begin > end || end > av.rows()) throw ShapeError("slice_rows range out of bounds");
    std::vector<double> data(av.storage().begin() + static_cast<std::ptrdiff_t>(begin * av.cols()),
                             av.storage().begin() + static_cast<std::ptrdiff_t>(end * av.cols()));
    Matrix out(end - begin, av.cols(), std::move(data));
    return tape_of(a).record(std::move(out), {a}, [a, begin](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(a.id());
        Matrix ga(av.rows(), av.cols());
        std::copy(g.storage().begin(), g.storage().end(),
                  ga.data().begin() + static_cast<std::ptrdiff_t>(begin * av.cols()));
        t.accumulate(a.id(), std::move(ga));
    });
}

Var select_rows(Var a, std::span<const std::size_t> rows) {
    IndexList idx(rows.begin(), rows.end());
    return tape_of(a).record(relreg::select_rows(a.value(), idx), {a}, [a, idx](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(a.id());
        Matrix ga(av.rows(), av.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = g.row_span(i);
            auto dst = ga.row_span(idx[i]);
            for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
        }
        t.accumulate(a.id(), std::move(ga));
    });
}

Var hconcat(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("hconcat of zero parts");
    const std::size_t rows = parts.front().value().rows();
    std::size_t cols = 0;
    for (const Var& p : parts) {
        if (p.value().rows() != rows) throw ShapeError("hconcat row mismatch");
        cols += p.value().cols();
    }
    Matrix out(rows, cols);
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const Matrix& pv = p.value();
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pv.cols(); ++c) out(r, offset + c) = pv(r, c);
        offsets.push_back(offset);
        offset += pv.cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return tape_of(parts.front())
        .record(std::move(out), parts, [inputs, offsets](Tape& t, std::size_t self) {
            const Matrix& g = t.grad(self);
            for (std::size_t k = 0; k < inputs.size(); ++k) {
                if (!t.requires_grad(inputs[k].id())) continue;
                const Matrix& pv = t.value(inputs[k].id());
                Matrix gp(pv.rows(), pv.cols());
                for (std::size_t r = 0; r < pv.rows(); ++r)
                    for (std::size_t c = 0; c < pv.cols(); ++c) gp(r, c) = g(r, offsets[k] + c);
                t.accumulate(inputs[k].id(), std::move(gp));
            }
        });
}

Var pairwise_sqdist(Var a, Var b, std::optional<Var> weights) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    const std::size_t d = av.cols();
    if (bv.cols() != d) throw ShapeError("pairwise_sqdist dimension mismatch " + av.shape_string() + " vs " + bv.shape_string());
    if (weights && (weights->value().rows() != 1 || weights->value().cols() != d)) {
        throw ShapeError("pairwise_sqdist weights must be 1x" + std::to_string(d));
    }
    std::vector<double> w(d, 1.0);
    if (weights) w.assign(weights->value().storage().begin(), weights->value().storage().end());

    Matrix out(av.rows(), bv.rows());
    for (std::size_t s = 0; s < av.rows(); ++s) {
        auto as = av.row_span(s);
        auto orow = out.row_span(s);
        for (std::size_t i = 0; i < bv.rows(); ++i) {
            auto bi = bv.row_span(i);
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = as[k] - bi[k];
                acc += w[k] * diff * diff;
            }
            orow[i] = acc;
        }
    }

    std::vector<Var> parents{a, b};
    if (weights) parents.push_back(*weights);
    const bool weighted = weights.has_value();
    const std::size_t wid = weighted ? weights->id() : 0;
    return tape_of(a).record(std::move(out), parents, [a, b, w, weighted, wid](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& av = t.value(a.id());
        const Matrix& bv = t.value(b.id());
        const std::size_t d = av.cols();
        if (t.requires_grad(a.id())) {
            // 2 w_k (a_sk Σ_i G_si − (G b)_sk)
            Matrix gb = relreg::matmul(g, bv);
            Matrix ga(av.rows(), d);
            for (std::size_t s = 0; s < av.rows(); ++s) {
                double rowsum = 0.0;
                for (double v : g.row_span(s)) rowsum += v;
                for (std::size_t k = 0; k < d; ++k) ga(s, k) = 2.0 * w[k] * (av(s, k) * rowsum - gb(s, k));
            }
            t.accumulate(a.id(), std::move(ga));
        }
        if (t.requires_grad(b.id())) {
            Matrix gta = relreg::matmul_tn(g, av);
            Matrix colsum(1, bv.rows());
            for (std::size_t s = 0; s < g.rows(); ++s)
                for (std::size_t i = 0; i < g.cols(); ++i) colsum(0, i) += g(s, i);
            Matrix gbv(bv.rows(), d);
            for (std::size_t i = 0; i < bv.rows(); ++i)
                for (std::size_t k = 0; k < d; ++k) gbv(i, k) = -2.0 * w[k] * (gta(i, k) - bv(i, k) * colsum(0, i));
            t.accumulate(b.id(), std::move(gbv));
        }
        if (weighted && t.requires_grad(wid)) {
            Matrix gw(1, d);
            for (std::size_t s = 0; s < av.rows(); ++s) {
                auto as = av.row_span(s);
                for (std::size_t i = 0; i < bv.rows(); ++i) {
                    const double gsi = g(s, i);
                    if (gsi == 0.0) continue;
                    auto bi = bv.row_span(i);
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = as[k] - bi[k];
                        gw(0, k) += gsi * diff * diff;
                    }
                }
            }
            t.accumulate(wid, std::move(gw));
        }
    });
}

Var dropout(Var a, double rate, std::mt19937_64& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must satisfy 0 <= rate < 1, got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return a;
    Matrix keep = dropout_mask(a.value().rows(), a.value().cols(), rate, rng);
    Matrix out = hadamard(a.value(), keep);
    return tape_of(a).record(std::move(out), {a}, [a, keep = std::move(keep)](Tape& t, std::size_t self) {
        t.accumulate(a.id(), hadamard(t.grad(self), keep));
    });
}

Var layer_norm_rows(Var a, double epsilon) {
    const Matrix& av = a.value();
    const std::size_t n = av.cols();
    Matrix out(av.rows(), n);
    std::vector<double> inv_std(av.rows());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        auto row = av.row_span(r);
        double mu = 0.0;
        for (double v : row) mu += v;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double v : row) var += (v - mu) * (v - mu);
        var /= static_cast<double>(n);
        inv_std[r] = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t c = 0; c < n; ++c) out(r, c) = (row[c] - mu) * inv_std[r];
    }
    return tape_of(a).record(std::move(out), {a}, [a, inv_std](Tape& t, std::size_t self) {
        const Matrix& y = t.value(self);
        const Matrix& g = t.grad(self);
        const std::size_t n = y.cols();
        Matrix ga(y.rows(), n);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double gmean = 0.0, gymean = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                gmean += g(r, c);
                gymean += g(r, c) * y(r, c);
            }
            gmean /= static_cast<double>(n);
            gymean /= static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c) ga(r, c) = inv_std[r] * (g(r, c) - gmean - y(r, c) * gymean);
        }
        t.accumulate(a.id(), std::move(ga));
    });
}

}  // namespace relreg::ad
