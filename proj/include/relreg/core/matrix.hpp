// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace relreg {

using Vector = std::vector<double>;
using IndexList = std::vector<std::size_t>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix column(std::span<const double> values);
    static Matrix row(std::span<const double> values);
    static Matrix scalar(double value) { return Matrix(1, 1, value); }
    static Matrix identity(std::size_t n);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row_span(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] const std::vector<double>& storage() const noexcept { return data_; }

    /// Column `c` copied out as a vector.
    [[nodiscard]] Vector col_vector(std::size_t c) const;

    [[nodiscard]] bool same_shape(const Matrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    [[nodiscard]] bool all_finite() const noexcept;
    [[nodiscard]] std::string shape_string() const;

    void fill(double value);
    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(Matrix a, double s);

/// A · B
Matrix matmul(const Matrix& a, const Matrix& b);
/// A · Bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);
/// Aᵀ · B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix hadamard(const Matrix& a, const Matrix& b);

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Matrix select_cols(const Matrix& m, std::span<const std::size_t> cols);
Matrix select(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
Matrix hconcat(const Matrix& a, const Matrix& b);
Matrix vconcat(const Matrix& a, const Matrix& b);

double max_abs_diff(const Matrix& a, const Matrix& b);

/// Boolean matrix of masked (disabled) positions. Masked entries of a
/// softmax row receive exactly zero weight.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t rows, std::size_t cols, bool masked = false)
        : rows_(rows), cols_(cols), bits_(rows * cols, masked ? 1 : 0) {}

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] bool masked(std::size_t r, std::size_t c) const { return bits_[r * cols_ + c] != 0; }
    void set(std::size_t r, std::size_t c, bool masked) { bits_[r * cols_ + c] = masked ? 1 : 0; }

    /// Number of leading columns that are unmasked in every row, provided
    /// every other column is masked in every row; 0 otherwise.
    [[nodiscard]] std::size_t enabled_prefix() const;

    bool operator==(const Mask& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<unsigned char> bits_;
};

/// Row-wise softmax; masked positions get exactly zero. Throws
/// DegenerateRowError when a row has no unmasked entry.
Matrix softmax_rows(const Matrix& m, const Mask* mask = nullptr);

}  // namespace relreg
