// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/param_store.hpp"

#include <cmath>

#include "relreg/core/error.hpp"

namespace relreg {

ParamSlot& ParamStore::add(std::string name, Matrix value, double lr_scale) {
    if (contains(name)) throw ConfigError("duplicate parameter slot '" + name + "'");
    ParamSlot slot;
    slot.grad = Matrix(value.rows(), value.cols());
    slot.first_moment = Matrix(value.rows(), value.cols());
    slot.second_moment = Matrix(value.rows(), value.cols());
    slot.value = std::move(value);
    slot.lr_scale = lr_scale;
    slot.name = name;
    index_.emplace(std::move(name), slots_.size());
    slots_.push_back(std::move(slot));
    return slots_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

ParamSlot& ParamStore::slot(std::string_view name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter slot '" + std::string(name) + "'");
    return slots_[it->second];
}

const ParamSlot& ParamStore::slot(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter slot '" + std::string(name) + "'");
    return slots_[it->second];
}

void ParamStore::zero_grad() {
    for (auto& s : slots_) s.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& s : slots_) n += s.value.size();
    return n;
}

void ParamStore::assign_values(const ParamStore& other) {
    for (auto& s : slots_) s.value = other.slot(s.name).value;
}

void adam_step(ParamStore& params, const AdamConfig& config, long step) {
    if (step < 1) throw ConfigError("adam step count must be >= 1");
    for (const auto& s : params) {
        if (!s.grad.all_finite()) throw DivergedError("non-finite gradient in parameter '" + s.name + "'");
    }
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    for (auto& s : params) {
        const double lr = config.learning_rate * s.lr_scale;
        auto value = s.value.data();
        auto grad = s.grad.data();
        auto m = s.first_moment.data();
        auto v = s.second_moment.data();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

}  // namespace relreg
