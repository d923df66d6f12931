// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relreg {

/// Base class for every error raised by the toolkit. `kind()` is a stable
/// machine-readable tag used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Non-finite loss, gradient or attention score.
class DivergedError : public Error {
public:
    explicit DivergedError(const std::string& message) : Error("diverged", message) {}
};

class DegenerateRowError : public Error {
public:
    DegenerateRowError(std::size_t row, const std::string& message)
        : Error("degenerate_row", message), row_(row) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

class ParseError : public Error {
public:
    ParseError(std::size_t row, std::size_t col, const std::string& message)
        : Error("parse", "row " + std::to_string(row) + ", column " + std::to_string(col) + ": " + message),
          row_(row),
          col_(col) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

/// Raised when a statistic cannot be computed from the data at hand.
class UndefinedError : public Error {
public:
    explicit UndefinedError(const std::string& message) : Error("undefined", message) {}
};

class TimeoutError : public Error {
public:
    explicit TimeoutError(const std::string& message) : Error("timeout", message) {}
};

}  // namespace relreg
