// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "relreg/core/matrix.hpp"

namespace relreg {

/// One learnable tensor with its gradient accumulator and Adam moments.
struct ParamSlot {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
    double lr_scale = 1.0;
};

/// Named parameter slots kept in insertion order, so iteration (and thus
/// every optimizer update) is deterministic.
class ParamStore {
public:
    ParamSlot& add(std::string name, Matrix value, double lr_scale = 1.0);

    [[nodiscard]] bool contains(std::string_view name) const;
    ParamSlot& slot(std::string_view name);
    [[nodiscard]] const ParamSlot& slot(std::string_view name) const;
    Matrix& value(std::string_view name) { return slot(name).value; }
    [[nodiscard]] const Matrix& value(std::string_view name) const { return slot(name).value; }
    [[nodiscard]] double scalar(std::string_view name) const { return slot(name).value(0, 0); }

    void zero_grad();

    [[nodiscard]] std::size_t size() const noexcept { return slots_.size(); }
    [[nodiscard]] std::size_t parameter_count() const;
    auto begin() { return slots_.begin(); }
    auto end() { return slots_.end(); }
    [[nodiscard]] auto begin() const { return slots_.begin(); }
    [[nodiscard]] auto end() const { return slots_.end(); }

    /// Copies parameter values (not moments) from `other`, slot by slot.
    void assign_values(const ParamStore& other);

private:
    std::vector<ParamSlot> slots_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

struct AdamConfig {
    double learning_rate = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update using the gradients stored in `params`.
/// `step` counts from 1. Throws DivergedError naming the first slot whose
/// gradient is non-finite; no slot is modified in that case.
void adam_step(ParamStore& params, const AdamConfig& config, long step);

}  // namespace relreg
