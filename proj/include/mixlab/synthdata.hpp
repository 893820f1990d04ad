// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic multimodal regression data: a latent sentiment score observed
// through one informative modality and weaker noisy ones.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "mixlab/numerics.hpp"
#include "mixlab/random.hpp"

namespace mixlab {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Split : unsigned char { train, val, test };

inline auto to_string(Split s) -> std::string_view
{
    switch (s) {
    case Split::train:
        return "train";
    case Split::val:
        return "val";
    case Split::test:
        return "test";
    }
    return "train";
}

struct DataGenConfig {
    std::size_t n_examples = 2000;
    std::vector<std::size_t> dims{16, 8, 8};
    std::vector<double> informativeness{0.9, 0.4, 0.4};
    double label_lo = -3.0;
    double label_hi = 3.0;
    double label_noise = 0.1;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (n_examples == 0) {
            throw ParameterError("DataGenConfig: n_examples must be at least 1");
        }
        if (dims.empty()) {
            throw ParameterError("DataGenConfig: at least one modality is required");
        }
        if (informativeness.size() != dims.size()) {
            throw ParameterError("DataGenConfig: informativeness has " + std::to_string(informativeness.size()) +
                                 " entries for " + std::to_string(dims.size()) + " modalities");
        }
        for (auto d : dims) {
            if (d == 0) {
                throw ParameterError("DataGenConfig: modality dimensions must be at least 1");
            }
        }
        for (auto rho : informativeness) {
            if (!(rho > 0.0 && rho <= 1.0)) {
                throw ParameterError("DataGenConfig: informativeness must lie in (0, 1]");
            }
        }
        if (!(label_lo < label_hi)) {
            throw ParameterError("DataGenConfig: label range must satisfy lo < hi");
        }
        if (!(label_noise >= 0.0)) {
            throw ParameterError("DataGenConfig: label noise must be nonnegative");
        }
    }
};

struct Dataset {
    std::vector<Matrix> features; // N x d_m per modality
    Vector labels;
    std::vector<Split> splits;
    double label_lo = -3.0;
    double label_hi = 3.0;

    [[nodiscard]] auto size() const noexcept -> std::size_t { return labels.size(); }
    [[nodiscard]] auto modality_count() const noexcept -> std::size_t { return features.size(); }

    [[nodiscard]] auto indices(Split s) const -> std::vector<std::size_t>
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < splits.size(); ++i) {
            if (splits[i] == s) {
                out.push_back(i);
            }
        }
        return out;
    }

    void validate() const
    {
        if (features.empty()) {
            throw ShapeError("Dataset: no modalities");
        }
        for (auto const& f : features) {
            if (f.rows() != labels.size()) {
                throw ShapeError("Dataset: feature matrix " + f.shape_string() + " for " +
                                 std::to_string(labels.size()) + " labels");
            }
        }
        if (splits.size() != labels.size()) {
            throw ShapeError("Dataset: split tags do not cover every example");
        }
    }

    friend auto operator==(Dataset const&, Dataset const&) -> bool = default;
};

/// Gathers the rows `idx` of every modality.
inline auto gather_rows(std::vector<Matrix> const& features, std::span<std::size_t const> idx) -> std::vector<Matrix>
{
    std::vector<Matrix> out;
    out.reserve(features.size());
    for (auto const& f : features) {
        Matrix g(idx.size(), f.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            auto src = f.row(idx[r]);
            std::copy(src.begin(), src.end(), g.row(r).begin());
        }
        out.push_back(std::move(g));
    }
    return out;
}

inline auto gather(Vector const& v, std::span<std::size_t const> idx) -> Vector
{
    Vector out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out[r] = v[idx[r]];
    }
    return out;
}

/// 70/10/20 assignment after a seeded shuffle.
inline auto assign_splits(std::size_t n, std::uint64_t seed) -> std::vector<Split>
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream rng = RngStream(seed).split("split");
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.uniform_index(i)]);
    }
    std::size_t const n_train = n * 7 / 10;
    std::size_t const n_val = n / 10;
    std::vector<Split> splits(n, Split::test);
    for (std::size_t k = 0; k < n; ++k) {
        splits[order[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
    }
    return splits;
}

/// Features are tanh(z w_m + b_m) + sigma_m eps with sigma_m = (1 - rho_m) / rho_m.
inline auto generate(DataGenConfig const& cfg) -> Dataset
{
    cfg.validate();
    RngStream root(cfg.seed);
    RngStream proj_rng = root.split("projection");
    RngStream latent_rng = root.split("latent");
    RngStream noise_rng = root.split("noise");

    std::size_t const M = cfg.dims.size();
    std::vector<Vector> weights(M);
    std::vector<Vector> biases(M);
    for (std::size_t m = 0; m < M; ++m) {
        // slopes in +-[0.15, 0.6] keep tanh out of saturation over [-3, 3]
        weights[m].resize(cfg.dims[m]);
        biases[m].resize(cfg.dims[m]);
        for (std::size_t j = 0; j < cfg.dims[m]; ++j) {
            double const mag = 0.15 + 0.45 * proj_rng.uniform01();
            weights[m][j] = proj_rng.uniform01() < 0.5 ? -mag : mag;
            biases[m][j] = -0.5 + proj_rng.uniform01();
        }
    }

    Dataset ds;
    ds.label_lo = cfg.label_lo;
    ds.label_hi = cfg.label_hi;
    ds.labels.resize(cfg.n_examples);
    for (std::size_t m = 0; m < M; ++m) {
        ds.features.emplace_back(cfg.n_examples, cfg.dims[m]);
    }
    for (std::size_t i = 0; i < cfg.n_examples; ++i) {
        double const z = cfg.label_lo + (cfg.label_hi - cfg.label_lo) * latent_rng.uniform01();
        for (std::size_t m = 0; m < M; ++m) {
            double const sigma = (1.0 - cfg.informativeness[m]) / cfg.informativeness[m];
            auto row = ds.features[m].row(i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                double const eps = noise_rng.normal();
                row[j] = std::tanh(z * weights[m][j] + biases[m][j]) + sigma * eps;
            }
        }
        ds.labels[i] = z + cfg.label_noise * noise_rng.normal();
    }
    ds.splits = assign_splits(cfg.n_examples, cfg.seed);
    return ds;
}

namespace detail {

inline auto format_double(double v) -> std::string
{
    char buf[32];
    int const n = std::snprintf(buf, sizeof buf, "%.17g", v);
    return {buf, static_cast<std::size_t>(n)};
}

inline auto split_fields(std::string_view line, char sep) -> std::vector<std::string_view>
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t const pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline auto parse_double(std::string_view text, std::string const& where) -> double
{
    double v = 0.0;
    auto const* first = text.data();
    auto const* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || !std::isfinite(v)) {
        throw ParseError(where + ": cannot parse '" + std::string(text) + "' as a finite number");
    }
    return v;
}

inline auto parse_count(std::string_view text, std::string const& where) -> std::size_t
{
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(where + ": cannot parse '" + std::string(text) + "' as a count");
    }
    return v;
}

} // namespace detail

/// CSV layout: header `modality_dims=16;8;8,label_range=-3;3`, then one row per
/// example with all features, the label and the split tag.
inline void write_dataset(Dataset const& ds, std::ostream& os)
{
    ds.validate();
    os << "modality_dims=";
    for (std::size_t m = 0; m < ds.features.size(); ++m) {
        os << (m ? ";" : "") << ds.features[m].cols();
    }
    os << ",label_range=" << detail::format_double(ds.label_lo) << ';' << detail::format_double(ds.label_hi) << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (auto const& f : ds.features) {
            for (double v : f.row(i)) {
                os << detail::format_double(v) << ',';
            }
        }
        os << detail::format_double(ds.labels[i]) << ',' << to_string(ds.splits[i]) << '\n';
    }
}

inline auto read_dataset(std::istream& is) -> Dataset
{
    std::string line;
    if (!std::getline(is, line)) {
        throw ParseError("line 1: missing header");
    }
    auto header = detail::split_fields(line, ',');
    if (header.size() != 2 || !header[0].starts_with("modality_dims=") || !header[1].starts_with("label_range=")) {
        throw ParseError("line 1: expected 'modality_dims=...,label_range=lo;hi'");
    }
    std::vector<std::size_t> dims;
    for (auto f : detail::split_fields(header[0].substr(14), ';')) {
        dims.push_back(detail::parse_count(f, "line 1, modality_dims"));
        if (dims.back() == 0) {
            throw ParseError("line 1, modality_dims: zero-width modality");
        }
    }
    auto range = detail::split_fields(header[1].substr(12), ';');
    if (range.size() != 2) {
        throw ParseError("line 1, label_range: expected two values");
    }
    Dataset ds;
    ds.label_lo = detail::parse_double(range[0], "line 1, label_range");
    ds.label_hi = detail::parse_double(range[1], "line 1, label_range");

    std::size_t const width = std::accumulate(dims.begin(), dims.end(), std::size_t{0});
    std::vector<std::vector<double>> columns(dims.size());
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (is.eof() && !line.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": truncated row (no line terminator)");
        }
        if (line.empty()) {
            continue;
        }
        auto fields = detail::split_fields(line, ',');
        std::string const where = "line " + std::to_string(line_no);
        if (fields.size() != width + 2) {
            throw ParseError(where + ": expected " + std::to_string(width + 2) + " fields for modality_dims, found " +
                             std::to_string(fields.size()));
        }
        std::size_t f = 0;
        for (std::size_t m = 0; m < dims.size(); ++m) {
            for (std::size_t j = 0; j < dims[m]; ++j, ++f) {
                columns[m].push_back(detail::parse_double(fields[f], where + ", field " + std::to_string(f + 1)));
            }
        }
        ds.labels.push_back(detail::parse_double(fields[width], where + ", label"));
        auto tag = fields[width + 1];
        if (tag == "train") {
            ds.splits.push_back(Split::train);
        } else if (tag == "val") {
            ds.splits.push_back(Split::val);
        } else if (tag == "test") {
            ds.splits.push_back(Split::test);
        } else {
            throw ParseError(where + ", split: unknown tag '" + std::string(tag) + "'");
        }
    }
    if (!is.eof()) {
        throw ParseError("line " + std::to_string(line_no) + ": read error");
    }
    for (std::size_t m = 0; m < dims.size(); ++m) {
        ds.features.emplace_back(ds.labels.size(), dims[m], std::move(columns[m]));
    }
    return ds;
}

inline void save_dataset(Dataset const& ds, std::string const& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write_dataset(ds, os);
    if (!os) {
        throw std::runtime_error("failed writing '" + path + "'");
    }
}

inline auto load_dataset(std::string const& path) -> Dataset
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    return read_dataset(is);
}

} // namespace mixlab
