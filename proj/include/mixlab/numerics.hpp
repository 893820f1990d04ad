// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrix kernel in double precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixlab {

/// Raised when operand shapes do not agree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a distribution or algorithm parameter is outside its domain.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match shape " +
                             std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (auto const& r : rows) {
            if (r.size() != cols_) {
                throw ShapeError("ragged matrix literal");
            }
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static auto identity(std::size_t n) -> Matrix
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    [[nodiscard]] auto rows() const noexcept -> std::size_t { return rows_; }
    [[nodiscard]] auto cols() const noexcept -> std::size_t { return cols_; }
    [[nodiscard]] auto size() const noexcept -> std::size_t { return data_.size(); }
    [[nodiscard]] auto empty() const noexcept -> bool { return data_.empty(); }

    auto operator()(std::size_t r, std::size_t c) noexcept -> double& { return data_[r * cols_ + c]; }
    auto operator()(std::size_t r, std::size_t c) const noexcept -> double { return data_[r * cols_ + c]; }

    auto row(std::size_t r) noexcept -> std::span<double> { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] auto row(std::size_t r) const noexcept -> std::span<double const>
    {
        return {data_.data() + r * cols_, cols_};
    }

    auto data() noexcept -> std::span<double> { return data_; }
    [[nodiscard]] auto data() const noexcept -> std::span<double const> { return data_; }
    [[nodiscard]] auto values() const noexcept -> std::vector<double> const& { return data_; }

    [[nodiscard]] auto shape_string() const -> std::string
    {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend auto operator==(Matrix const&, Matrix const&) -> bool = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline auto all_finite(std::span<double const> values) noexcept -> bool
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

inline auto matmul(Matrix const& a, Matrix const& b) -> Matrix
{
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + a.shape_string() + " * " + b.shape_string() + ")");
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto orow = out.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double const aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aik * brow[j];
            }
        }
    }
    return out;
}

/// Aᵀ B without materializing the transpose.
inline auto matmul_tn(Matrix const& a, Matrix const& b) -> Matrix
{
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: row counts differ (" + a.shape_string() + "^T * " + b.shape_string() + ")");
    }
    Matrix out(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            double const aki = arow[i];
            if (aki == 0.0) {
                continue;
            }
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                orow[j] += aki * brow[j];
            }
        }
    }
    return out;
}

/// A Bᵀ without materializing the transpose.
inline auto matmul_nt(Matrix const& a, Matrix const& b) -> Matrix
{
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: column counts differ (" + a.shape_string() + " * " + b.shape_string() + "^T)");
    }
    Matrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto brow = b.row(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) {
                acc += arow[k] * brow[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

inline auto matvec(Matrix const& a, std::span<double const> x) -> Vector
{
    if (a.cols() != x.size()) {
        throw ShapeError("matvec: matrix " + a.shape_string() + " with vector of length " + std::to_string(x.size()));
    }
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            acc += arow[k] * x[k];
        }
        out[i] = acc;
    }
    return out;
}

inline auto transpose(Matrix const& a) -> Matrix
{
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

/// Column-wise concatenation of matrices with equal row counts.
inline auto hconcat(std::span<Matrix const> blocks) -> Matrix
{
    if (blocks.empty()) {
        return {};
    }
    std::size_t const rows = blocks.front().rows();
    std::size_t cols = 0;
    for (auto const& b : blocks) {
        if (b.rows() != rows) {
            throw ShapeError("hconcat: row counts differ (" + blocks.front().shape_string() + " vs " +
                             b.shape_string() + ")");
        }
        cols += b.cols();
    }
    Matrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto dst = out.row(i).begin();
        for (auto const& b : blocks) {
            auto src = b.row(i);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

/// Solves S x = rhs for symmetric positive definite S by Cholesky factorization.
/// `rhs` may hold several right-hand sides as columns.
inline auto solve_spd(Matrix s, Matrix rhs) -> Matrix
{
    std::size_t const n = s.rows();
    if (s.cols() != n || rhs.rows() != n) {
        throw ShapeError("solve_spd: system " + s.shape_string() + " with rhs " + rhs.shape_string());
    }
    for (std::size_t j = 0; j < n; ++j) {
        double d = s(j, j);
        for (std::size_t k = 0; k < j; ++k) {
            d -= s(j, k) * s(j, k);
        }
        if (!(d > 0.0)) {
            throw ParameterError("solve_spd: matrix is not positive definite");
        }
        d = std::sqrt(d);
        s(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                v -= s(i, k) * s(j, k);
            }
            s(i, j) = v / d;
        }
    }
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = rhs(i, c);
            for (std::size_t k = 0; k < i; ++k) {
                v -= s(i, k) * rhs(k, c);
            }
            rhs(i, c) = v / s(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double v = rhs(i, c);
            for (std::size_t k = i + 1; k < n; ++k) {
                v -= s(k, i) * rhs(k, c);
            }
            rhs(i, c) = v / s(i, i);
        }
    }
    return rhs;
}

inline auto mean(std::span<double const> v) -> double
{
    if (v.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (double x : v) {
        acc += x;
    }
    return acc / static_cast<double>(v.size());
}

} // namespace mixlab
