// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Toy multimodal regressor: one MLP encoder per modality followed by a
// concatenation + MLP fusion head, with exact reverse-mode gradients.
//
//   late fusion : encoder m sees X_m only
//   early fusion: encoder m sees [X_m, sum_{k != m} X_k C_k], where the
//                 cross projections C_k are shared by every receiving encoder
//
// Mixing sits between the encoders and the fusion head; during backward the
// mixing matrices are constants, so dH_m = L_m^T dH~_m.

#pragma once

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mixlab/numerics.hpp"
#include "mixlab/random.hpp"
#include "mixlab/synthdata.hpp"

namespace mixlab {

enum class FusionMode { late, early };

inline auto to_string(FusionMode f) -> std::string_view { return f == FusionMode::late ? "late" : "early"; }

inline auto parse_fusion_mode(std::string_view s) -> FusionMode
{
    if (s == "late") {
        return FusionMode::late;
    }
    if (s == "early") {
        return FusionMode::early;
    }
    throw ParameterError("unknown fusion mode '" + std::string(s) + "'");
}

struct ModelShape {
    std::vector<std::size_t> input_dims{16, 8, 8};
    std::size_t hidden = 32;
    std::size_t embed = 16;
    std::size_t fusion_hidden = 32;
    std::size_t cross = 8; // width of the early-fusion context projection
    FusionMode mode = FusionMode::late;

    friend auto operator==(ModelShape const&, ModelShape const&) -> bool = default;
};

struct EncoderParams {
    Matrix w1; // (d_m [+ cross]) x hidden
    Matrix b1; // 1 x hidden
    Matrix w2; // hidden x embed
    Matrix b2; // 1 x embed

    friend auto operator==(EncoderParams const&, EncoderParams const&) -> bool = default;
};

struct ModelParams {
    ModelShape shape;
    std::vector<EncoderParams> encoders;
    std::vector<Matrix> cross; // d_m x cross, early fusion only
    Matrix wf;                 // (M * embed) x fusion_hidden
    Matrix bf;                 // 1 x fusion_hidden
    Matrix wout;               // fusion_hidden x 1
    Matrix bout;               // 1 x 1

    friend auto operator==(ModelParams const&, ModelParams const&) -> bool = default;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

/// Visits every tensor in a fixed order with a stable name.
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn)
{
    for (std::size_t m = 0; m < p.encoders.size(); ++m) {
        std::string const pre = "enc" + std::to_string(m) + ".";
        fn(pre + "w1", p.encoders[m].w1);
        fn(pre + "b1", p.encoders[m].b1);
        fn(pre + "w2", p.encoders[m].w2);
        fn(pre + "b2", p.encoders[m].b2);
    }
    for (std::size_t m = 0; m < p.cross.size(); ++m) {
        fn("cross" + std::to_string(m), p.cross[m]);
    }
    fn(std::string("fusion.w"), p.wf);
    fn(std::string("fusion.b"), p.bf);
    fn(std::string("out.w"), p.wout);
    fn(std::string("out.b"), p.bout);
}

inline auto parameter_count(ModelParams const& p) -> std::size_t
{
    std::size_t n = 0;
    for_each_tensor(p, [&](std::string const&, Matrix const& t) { n += t.size(); });
    return n;
}

/// Zero tensors with the layout implied by `shape`.
inline auto zero_params(ModelShape const& shape) -> ModelParams
{
    if (shape.input_dims.empty()) {
        throw ParameterError("ModelShape: at least one modality is required");
    }
    std::size_t const M = shape.input_dims.size();
    bool const early = shape.mode == FusionMode::early && M > 1;
    ModelParams p;
    p.shape = shape;
    for (std::size_t m = 0; m < M; ++m) {
        std::size_t const in = shape.input_dims[m] + (early ? shape.cross : 0);
        p.encoders.push_back({Matrix(in, shape.hidden), Matrix(1, shape.hidden), Matrix(shape.hidden, shape.embed),
                              Matrix(1, shape.embed)});
        if (early) {
            p.cross.emplace_back(shape.input_dims[m], shape.cross);
        }
    }
    p.wf = Matrix(M * shape.embed, shape.fusion_hidden);
    p.bf = Matrix(1, shape.fusion_hidden);
    p.wout = Matrix(shape.fusion_hidden, 1);
    p.bout = Matrix(1, 1);
    return p;
}

inline auto zeros_like(ModelParams const& p) -> Gradients { return zero_params(p.shape); }

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases alike.
inline auto init_params(ModelShape const& shape, RngStream& rng) -> ModelParams
{
    ModelParams p = zero_params(shape);
    auto init = [&](Matrix& t, std::size_t fan_in) {
        double const bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t.data()) {
            v = -bound + 2.0 * bound * rng.uniform01();
        }
    };
    for (auto& e : p.encoders) {
        init(e.w1, e.w1.rows());
        init(e.b1, e.w1.rows());
        init(e.w2, e.w2.rows());
        init(e.b2, e.w2.rows());
    }
    for (auto& c : p.cross) {
        init(c, c.rows());
    }
    init(p.wf, p.wf.rows());
    init(p.bf, p.wf.rows());
    init(p.wout, p.wout.rows());
    init(p.bout, p.wout.rows());
    return p;
}

namespace detail {

inline void add_row_bias(Matrix& z, Matrix const& bias)
{
    for (std::size_t i = 0; i < z.rows(); ++i) {
        auto r = z.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            r[j] += bias(0, j);
        }
    }
}

inline auto relu(Matrix z) -> Matrix
{
    for (auto& v : z.data()) {
        v = v > 0.0 ? v : 0.0;
    }
    return z;
}

inline auto column_sums(Matrix const& g) -> Matrix
{
    Matrix out(1, g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
        auto r = g.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) {
            out(0, j) += r[j];
        }
    }
    return out;
}

inline void mask_by_positive(Matrix& grad, Matrix const& pre)
{
    auto g = grad.data();
    auto z = pre.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(z[i] > 0.0)) {
            g[i] = 0.0;
        }
    }
}

inline void check_inputs(ModelParams const& params, std::vector<Matrix> const& inputs)
{
    auto const& dims = params.shape.input_dims;
    if (inputs.size() != dims.size()) {
        throw ShapeError("model: expected " + std::to_string(dims.size()) + " modalities, got " +
                         std::to_string(inputs.size()));
    }
    for (std::size_t m = 0; m < inputs.size(); ++m) {
        if (inputs[m].cols() != dims[m]) {
            throw ShapeError("model: modality " + std::to_string(m) + " input " + inputs[m].shape_string() +
                             " but the encoder expects " + std::to_string(dims[m]) + " features");
        }
        if (inputs[m].rows() != inputs.front().rows()) {
            throw ShapeError("model: modality " + std::to_string(m) + " has " + std::to_string(inputs[m].rows()) +
                             " rows, modality 0 has " + std::to_string(inputs.front().rows()));
        }
    }
}

} // namespace detail

/// Intermediate values of the encoder forward pass, kept for backward.
struct EncoderCache {
    std::vector<Matrix> raw;    // modality features as given
    std::vector<Matrix> inputs; // encoder inputs (with context columns in early mode)
    std::vector<Matrix> pre;    // first-layer pre-activations
    std::vector<Matrix> act;    // first-layer activations
    std::vector<Matrix> hidden; // encoder outputs H_m
};

inline auto encode_cached(ModelParams const& params, std::vector<Matrix> const& inputs) -> EncoderCache
{
    detail::check_inputs(params, inputs);
    std::size_t const M = inputs.size();
    EncoderCache cache;
    cache.raw = inputs;
    if (params.cross.empty()) {
        cache.inputs = inputs;
    } else {
        std::vector<Matrix> projected;
        projected.reserve(M);
        for (std::size_t m = 0; m < M; ++m) {
            projected.push_back(matmul(inputs[m], params.cross[m]));
        }
        for (std::size_t m = 0; m < M; ++m) {
            Matrix ctx(inputs[m].rows(), params.shape.cross);
            for (std::size_t k = 0; k < M; ++k) {
                if (k == m) {
                    continue;
                }
                auto src = projected[k].data();
                auto dst = ctx.data();
                for (std::size_t i = 0; i < dst.size(); ++i) {
                    dst[i] += src[i];
                }
            }
            Matrix const blocks[] = {inputs[m], ctx};
            cache.inputs.push_back(hconcat(blocks));
        }
    }
    for (std::size_t m = 0; m < M; ++m) {
        auto const& enc = params.encoders[m];
        Matrix z1 = matmul(cache.inputs[m], enc.w1);
        detail::add_row_bias(z1, enc.b1);
        Matrix a1 = detail::relu(z1);
        Matrix h = matmul(a1, enc.w2);
        detail::add_row_bias(h, enc.b2);
        cache.pre.push_back(std::move(z1));
        cache.act.push_back(std::move(a1));
        cache.hidden.push_back(std::move(h));
    }
    return cache;
}

inline auto encode(ModelParams const& params, std::vector<Matrix> const& inputs) -> std::vector<Matrix>
{
    return encode_cached(params, inputs).hidden;
}

struct FusionCache {
    Matrix concat;
    Matrix pre;
    Matrix act;
    Vector pred;
};

inline auto fuse_cached(ModelParams const& params, std::vector<Matrix> const& hidden) -> FusionCache
{
    if (hidden.size() != params.encoders.size()) {
        throw ShapeError("fuse_predict: expected " + std::to_string(params.encoders.size()) +
                         " hidden matrices, got " + std::to_string(hidden.size()));
    }
    FusionCache c;
    c.concat = hconcat(hidden);
    if (c.concat.cols() != params.wf.rows()) {
        throw ShapeError("fuse_predict: concatenated hidden " + c.concat.shape_string() + " vs fusion weights " +
                         params.wf.shape_string());
    }
    c.pre = matmul(c.concat, params.wf);
    detail::add_row_bias(c.pre, params.bf);
    c.act = detail::relu(c.pre);
    Matrix out = matmul(c.act, params.wout);
    c.pred.resize(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        c.pred[i] = out(i, 0) + params.bout(0, 0);
    }
    return c;
}

inline auto fuse_predict(ModelParams const& params, std::vector<Matrix> const& hidden) -> Vector
{
    return fuse_cached(params, hidden).pred;
}

inline auto predict(ModelParams const& params, std::vector<Matrix> const& inputs) -> Vector
{
    return fuse_predict(params, encode(params, inputs));
}

inline auto mse_loss(std::span<double const> pred, std::span<double const> target) -> double
{
    if (pred.size() != target.size()) {
        throw ShapeError("mse_loss: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(target.size()) + " targets");
    }
    if (pred.empty()) {
        return 0.0;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double const d = pred[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

struct LossAndGradients {
    double loss = 0.0;
    Gradients grads;
};

/// Loss and gradients given a cached encoder pass. `mixing` is either empty
/// (no mixing) or one n x B matrix per modality applied to the encoder outputs.
inline auto loss_and_gradients(ModelParams const& params, EncoderCache const& cache, std::vector<Matrix> const& mixing,
                               std::span<double const> targets) -> LossAndGradients
{
    std::size_t const M = params.encoders.size();
    if (!mixing.empty() && mixing.size() != M) {
        throw ShapeError("backward: " + std::to_string(mixing.size()) + " mixing matrices for " + std::to_string(M) +
                         " modalities");
    }
    std::vector<Matrix> mixed;
    if (!mixing.empty()) {
        mixed.reserve(M);
        for (std::size_t m = 0; m < M; ++m) {
            mixed.push_back(matmul(mixing[m], cache.hidden[m]));
        }
    }
    auto const& fused_input = mixing.empty() ? cache.hidden : mixed;
    FusionCache fc = fuse_cached(params, fused_input);

    LossAndGradients out;
    out.loss = mse_loss(fc.pred, targets);
    Gradients& g = out.grads;
    g = zeros_like(params);

    std::size_t const n = fc.pred.size();
    Matrix dpred(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        dpred(i, 0) = 2.0 * (fc.pred[i] - targets[i]) / static_cast<double>(n);
    }
    g.wout = matmul_tn(fc.act, dpred);
    g.bout = detail::column_sums(dpred);
    Matrix dz = matmul_nt(dpred, params.wout);
    detail::mask_by_positive(dz, fc.pre);
    g.wf = matmul_tn(fc.concat, dz);
    g.bf = detail::column_sums(dz);
    Matrix dconcat = matmul_nt(dz, params.wf);

    std::size_t const e = params.shape.embed;
    std::vector<Matrix> dinputs;
    dinputs.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        Matrix dmixed(n, e);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < e; ++j) {
                dmixed(i, j) = dconcat(i, m * e + j);
            }
        }
        Matrix dh = mixing.empty() ? std::move(dmixed) : matmul_tn(mixing[m], dmixed);

        auto const& enc = params.encoders[m];
        auto& genc = g.encoders[m];
        genc.w2 = matmul_tn(cache.act[m], dh);
        genc.b2 = detail::column_sums(dh);
        Matrix da = matmul_nt(dh, enc.w2);
        detail::mask_by_positive(da, cache.pre[m]);
        genc.w1 = matmul_tn(cache.inputs[m], da);
        genc.b1 = detail::column_sums(da);
        if (!params.cross.empty()) {
            dinputs.push_back(matmul_nt(da, enc.w1));
        }
    }

    if (!params.cross.empty()) {
        // context of encoder m is sum_{k != m} X_k C_k, so dC_k = X_k^T sum_{m != k} dctx_m
        std::size_t const c = params.shape.cross;
        std::size_t const rows = cache.raw.front().rows();
        Matrix dctx_total(rows, c);
        std::vector<Matrix> dctx;
        dctx.reserve(M);
        for (std::size_t m = 0; m < M; ++m) {
            std::size_t const d = params.shape.input_dims[m];
            Matrix block(rows, c);
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < c; ++j) {
                    block(i, j) = dinputs[m](i, d + j);
                    dctx_total(i, j) += block(i, j);
                }
            }
            dctx.push_back(std::move(block));
        }
        for (std::size_t k = 0; k < M; ++k) {
            Matrix others = dctx_total;
            auto dst = others.data();
            auto own = dctx[k].data();
            for (std::size_t i = 0; i < dst.size(); ++i) {
                dst[i] -= own[i];
            }
            g.cross[k] = matmul_tn(cache.raw[k], others);
        }
    }
    return out;
}

inline auto backward(ModelParams const& params, std::vector<Matrix> const& inputs, std::vector<Matrix> const& mixing,
                     std::span<double const> targets) -> LossAndGradients
{
    return loss_and_gradients(params, encode_cached(params, inputs), mixing, targets);
}

/// Checkpoint text format:
///
///   mixlab-checkpoint 1
///   fusion=late,dims=16;8;8,hidden=32,embed=16,fusion_hidden=32,cross=8
///   manifest=enc0.w1:16x32;enc0.b1:1x32;...
///   <name>,<v0>,<v1>,...          (one line per tensor, row-major, %.17g)
inline void write_checkpoint(ModelParams const& params, std::ostream& os)
{
    auto const& s = params.shape;
    os << "mixlab-checkpoint 1\n";
    os << "fusion=" << to_string(s.mode) << ",dims=";
    for (std::size_t m = 0; m < s.input_dims.size(); ++m) {
        os << (m ? ";" : "") << s.input_dims[m];
    }
    os << ",hidden=" << s.hidden << ",embed=" << s.embed << ",fusion_hidden=" << s.fusion_hidden
       << ",cross=" << s.cross << '\n';
    os << "manifest=";
    bool first = true;
    for_each_tensor(params, [&](std::string const& name, Matrix const& t) {
        os << (first ? "" : ";") << name << ':' << t.rows() << 'x' << t.cols();
        first = false;
    });
    os << '\n';
    for_each_tensor(params, [&](std::string const& name, Matrix const& t) {
        os << name;
        for (double v : t.data()) {
            os << ',' << detail::format_double(v);
        }
        os << '\n';
    });
}

inline auto read_checkpoint(std::istream& is) -> ModelParams
{
    std::string line;
    if (!std::getline(is, line) || line != "mixlab-checkpoint 1") {
        throw ParseError("checkpoint line 1: expected 'mixlab-checkpoint 1'");
    }
    if (!std::getline(is, line)) {
        throw ParseError("checkpoint line 2: missing shape header");
    }
    ModelShape shape;
    for (auto field : detail::split_fields(line, ',')) {
        auto const eq = field.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError("checkpoint line 2: malformed field '" + std::string(field) + "'");
        }
        auto key = field.substr(0, eq);
        auto val = field.substr(eq + 1);
        std::string const where = "checkpoint line 2, " + std::string(key);
        if (key == "fusion") {
            shape.mode = parse_fusion_mode(val);
        } else if (key == "dims") {
            shape.input_dims.clear();
            for (auto d : detail::split_fields(val, ';')) {
                shape.input_dims.push_back(detail::parse_count(d, where));
            }
        } else if (key == "hidden") {
            shape.hidden = detail::parse_count(val, where);
        } else if (key == "embed") {
            shape.embed = detail::parse_count(val, where);
        } else if (key == "fusion_hidden") {
            shape.fusion_hidden = detail::parse_count(val, where);
        } else if (key == "cross") {
            shape.cross = detail::parse_count(val, where);
        } else {
            throw ParseError("checkpoint line 2: unknown key '" + std::string(key) + "'");
        }
    }
    ModelParams params = zero_params(shape);
    if (!std::getline(is, line) || !line.starts_with("manifest=")) {
        throw ParseError("checkpoint line 3: missing manifest");
    }
    std::string expected;
    for_each_tensor(params, [&](std::string const& name, Matrix const& t) {
        expected += (expected.empty() ? "" : ";") + name + ":" + std::to_string(t.rows()) + "x" +
                    std::to_string(t.cols());
    });
    if (line.substr(9) != expected) {
        throw ParseError("checkpoint line 3: manifest does not match the declared shape");
    }
    std::size_t line_no = 3;
    for_each_tensor(params, [&](std::string const& name, Matrix& t) {
        ++line_no;
        std::string const where = "checkpoint line " + std::to_string(line_no);
        if (!std::getline(is, line)) {
            throw ParseError(where + ": missing tensor '" + name + "'");
        }
        auto fields = detail::split_fields(line, ',');
        if (fields.front() != name) {
            throw ParseError(where + ": expected tensor '" + name + "', found '" + std::string(fields.front()) + "'");
        }
        if (fields.size() != t.size() + 1) {
            throw ParseError(where + ": tensor '" + name + "' needs " + std::to_string(t.size()) + " values, found " +
                             std::to_string(fields.size() - 1));
        }
        auto dst = t.data();
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = detail::parse_double(fields[i + 1], where);
        }
    });
    return params;
}

inline void save_checkpoint(ModelParams const& params, std::string const& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write_checkpoint(params, os);
}

inline auto load_checkpoint(std::string const& path) -> ModelParams
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    return read_checkpoint(is);
}

} // namespace mixlab
