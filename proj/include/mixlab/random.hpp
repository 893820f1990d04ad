// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seedable, splittable random stream and the distribution samplers used by
// the mixing algorithms. Samplers are hand-rolled on top of the raw 64-bit
// generator so that a seed reproduces the same sequence on every platform
// (the <random> distributions are implementation-defined).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>

#include "mixlab/numerics.hpp"

namespace mixlab {

namespace detail {

inline auto splitmix64(std::uint64_t& state) noexcept -> std::uint64_t
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline auto fnv1a64(std::string_view text, std::uint64_t h = 0xCBF29CE484222325ULL) noexcept -> std::uint64_t
{
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline auto rotl(std::uint64_t x, int k) noexcept -> std::uint64_t { return (x << k) | (x >> (64 - k)); }

} // namespace detail

/// xoshiro256** seeded through SplitMix64.
///
/// `split(tag)` draws one word from this stream and mixes it with a hash of
/// the tag, so successive splits (and splits with different tags) give
/// distinct children while the parent remains reproducible.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed)
    {
        std::uint64_t sm = seed;
        for (auto& w : state_) {
            w = detail::splitmix64(sm);
        }
    }

    [[nodiscard]] auto seed() const noexcept -> std::uint64_t { return seed_; }

    auto next_u64() noexcept -> std::uint64_t
    {
        std::uint64_t const result = detail::rotl(state_[1] * 5, 7) * 9;
        std::uint64_t const t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    auto uniform01() noexcept -> double { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1]; safe as a log argument.
    auto uniform01_open_low() noexcept -> double
    {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Unbiased integer in [0, n).
    auto uniform_index(std::uint64_t n) noexcept -> std::uint64_t
    {
        std::uint64_t const threshold = (0 - n) % n;
        std::uint64_t x = next_u64();
        while (x < threshold) {
            x = next_u64();
        }
        return x % n;
    }

    auto normal() noexcept -> double
    {
        double const u1 = uniform01_open_low();
        double const u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    auto split(std::string_view tag) -> RngStream
    {
        std::uint64_t const word = next_u64();
        return RngStream(detail::fnv1a64(tag, word ^ 0x6A09E667F3BCC909ULL));
    }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

inline auto sample_uniform(double lo, double hi, std::size_t n, RngStream& rng) -> Vector
{
    if (!(lo < hi)) {
        throw ParameterError("sample_uniform: need lo < hi, got lo=" + std::to_string(lo) +
                             " hi=" + std::to_string(hi));
    }
    Vector out(n);
    for (auto& v : out) {
        v = lo + (hi - lo) * rng.uniform01();
        // rounding can land exactly on hi
        if (v >= hi) {
            v = std::nextafter(hi, lo);
        }
    }
    return out;
}

/// One Gamma(k, 1) draw. Marsaglia-Tsang squeeze; for k < 1 draws
/// Gamma(k + 1) and scales by U^(1/k).
inline auto sample_gamma(double shape_k, RngStream& rng) -> double
{
    if (!(shape_k > 0.0) || !std::isfinite(shape_k)) {
        throw ParameterError("sample_gamma: shape must be positive, got " + std::to_string(shape_k));
    }
    double boost = 1.0;
    double k = shape_k;
    if (k < 1.0) {
        boost = std::pow(rng.uniform01_open_low(), 1.0 / k);
        k += 1.0;
    }
    double const d = k - 1.0 / 3.0;
    double const c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = rng.normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double const u = rng.uniform01_open_low();
        double const x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) {
            return boost * d * v;
        }
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) {
            return boost * d * v;
        }
    }
}

inline auto sample_beta(double a, double b, RngStream& rng) -> double
{
    if (!(a > 0.0) || !(b > 0.0)) {
        throw ParameterError("sample_beta: parameters must be positive, got a=" + std::to_string(a) +
                             " b=" + std::to_string(b));
    }
    double const x = sample_gamma(a, rng);
    double const y = sample_gamma(b, rng);
    double const s = x + y;
    // both draws can underflow to zero for tiny shapes
    if (s == 0.0) {
        return rng.uniform01() < a / (a + b) ? 1.0 : 0.0;
    }
    return x / s;
}

/// Symmetric Dirichlet draw on the (dim-1)-simplex.
inline auto sample_dirichlet_symmetric(double alpha, std::size_t dim, RngStream& rng) -> Vector
{
    if (!(alpha > 0.0)) {
        throw ParameterError("sample_dirichlet_symmetric: alpha must be positive, got " + std::to_string(alpha));
    }
    if (dim == 0) {
        throw ParameterError("sample_dirichlet_symmetric: dimension must be at least 1");
    }
    Vector out(dim);
    if (dim == 1) {
        out[0] = 1.0;
        return out;
    }
    double total = 0.0;
    for (auto& v : out) {
        v = sample_gamma(alpha, rng);
        total += v;
    }
    if (total == 0.0) {
        out.assign(dim, 0.0);
        out[rng.uniform_index(dim)] = 1.0;
        return out;
    }
    for (auto& v : out) {
        v /= total;
    }
    return out;
}

/// Entrywise independent Bernoulli draws; returns a 0/1 matrix.
inline auto sample_bernoulli_matrix(Matrix const& prob, RngStream& rng) -> Matrix
{
    for (double p : prob.data()) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ParameterError("sample_bernoulli_matrix: probability " + std::to_string(p) + " outside [0, 1]");
        }
    }
    Matrix mask(prob.rows(), prob.cols());
    auto src = prob.data();
    auto dst = mask.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = rng.uniform01() < src[i] ? 1.0 : 0.0;
    }
    return mask;
}

} // namespace mixlab
