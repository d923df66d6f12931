// SPDX-License-Identifier: Apache-2.0
#include "relreg/core/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "relreg/core/error.hpp"

namespace relreg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged matrix initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::column(std::span<const double> values) {
    return {values.size(), 1, std::vector<double>(values.begin(), values.end())};
}

Matrix Matrix::row(std::span<const double> values) {
    return {1, values.size(), std::vector<double>(values.begin(), values.end())};
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Vector Matrix::col_vector(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix& Matrix::operator+=(const Matrix& other) {
    if (!same_shape(other)) throw ShapeError("+= shape mismatch " + shape_string() + " vs " + other.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (!same_shape(other)) throw ShapeError("-= shape mismatch " + shape_string() + " vs " + other.shape_string());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(Matrix a, double s) { return a *= s; }

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) { return {m.data().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }
Eigen::Map<RowMajor> view(Matrix& m) { return {m.data().data(), Eigen::Index(m.rows()), Eigen::Index(m.cols())}; }

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul shape mismatch " + a.shape_string() + " * " + b.shape_string());
    }
    Matrix c(a.rows(), b.cols());
    if (a.cols() > 0) view(c).noalias() = view(a) * view(b);
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt shape mismatch " + a.shape_string() + " * " + b.shape_string() + "^T");
    }
    Matrix c(a.rows(), b.rows());
    if (a.cols() > 0) view(c).noalias() = view(a) * view(b).transpose();
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn shape mismatch " + a.shape_string() + "^T * " + b.shape_string());
    }
    Matrix c(a.cols(), b.cols());
    if (a.rows() > 0) view(c).noalias() = view(a).transpose() * view(b);
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("hadamard shape mismatch " + a.shape_string() + " vs " + b.shape_string());
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
    return c;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows()) throw ShapeError("row index " + std::to_string(rows[i]) + " out of range");
        auto src = m.row_span(rows[i]);
        std::copy(src.begin(), src.end(), out.row_span(i).begin());
    }
    return out;
}

Matrix select_cols(const Matrix& m, std::span<const std::size_t> cols) {
    Matrix out(m.rows(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (cols[j] >= m.cols()) throw ShapeError("column index " + std::to_string(cols[j]) + " out of range");
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t j = 0; j < cols.size(); ++j) out(r, j) = m(r, cols[j]);
    return out;
}

Matrix select(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    return select_cols(select_rows(m, rows), cols);
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("hconcat row mismatch " + a.shape_string() + " | " + b.shape_string());
    Matrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        auto dst = out.row_span(r);
        auto ra = a.row_span(r);
        auto rb = b.row_span(r);
        std::copy(ra.begin(), ra.end(), dst.begin());
        std::copy(rb.begin(), rb.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return out;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("vconcat column mismatch " + a.shape_string() + " / " + b.shape_string());
    std::vector<double> data(a.storage());
    data.insert(data.end(), b.storage().begin(), b.storage().end());
    return {a.rows() + b.rows(), a.cols(), std::move(data)};
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

std::size_t Mask::enabled_prefix() const {
    if (rows_ == 0) return 0;
    std::size_t prefix = 0;
    while (prefix < cols_ && !masked(0, prefix)) ++prefix;
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            if (masked(r, c) != (c >= prefix)) return 0;
        }
    }
    return prefix;
}

Matrix softmax_rows(const Matrix& m, const Mask* mask) {
    if (mask != nullptr && (mask->rows() != m.rows() || mask->cols() != m.cols())) {
        throw ShapeError("softmax mask shape " + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols()) +
                         " does not match " + m.shape_string());
    }
    Matrix out(m.rows(), m.cols());
    if (mask == nullptr && m.cols() > 0) {
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::Map<const RowMajor> in(m.data().data(), m.rows(), m.cols());
        Eigen::Map<RowMajor> o(out.data().data(), m.rows(), m.cols());
        o = (in.colwise() - in.rowwise().maxCoeff()).array().exp().matrix();
        o.array().colwise() /= o.rowwise().sum().array();
        return out;
    }
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto in = m.row_span(r);
        auto o = out.row_span(r);
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < in.size(); ++c) {
            if (mask != nullptr && mask->masked(r, c)) continue;
            peak = std::max(peak, in[c]);
        }
        if (peak == -std::numeric_limits<double>::infinity()) {
            throw DegenerateRowError(r, "softmax row " + std::to_string(r) + " is fully masked");
        }
        double total = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            if (mask != nullptr && mask->masked(r, c)) continue;
            o[c] = std::exp(in[c] - peak);
            total += o[c];
        }
        for (double& v : o) v /= total;
    }
    return out;
}

}  // namespace relreg
