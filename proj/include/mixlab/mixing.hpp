// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Batch-level latent-space mixing: PowMix, MultiMix and Manifold MixUp.
//
// Every algorithm produces, per modality m, a row-stochastic matrix L_m of
// shape n_out x B and returns mixed hidden states L_m H_m together with mixed
// labels. The matrices are kept in the result so that the backward pass (and
// the tests) can use them.

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixlab/numerics.hpp"
#include "mixlab/random.hpp"

namespace mixlab {

struct ModalBatch {
    std::vector<Matrix> hidden; // one B x d_m matrix per modality
    Vector labels;              // length B
    std::vector<std::string> names;

    [[nodiscard]] auto batch_size() const noexcept -> std::size_t { return labels.size(); }
    [[nodiscard]] auto modality_count() const noexcept -> std::size_t { return hidden.size(); }

    void validate() const
    {
        if (hidden.empty()) {
            throw ShapeError("ModalBatch: at least one modality is required");
        }
        if (labels.empty()) {
            throw ShapeError("ModalBatch: batch must hold at least one example");
        }
        for (std::size_t m = 0; m < hidden.size(); ++m) {
            if (hidden[m].rows() != labels.size()) {
                throw ShapeError("ModalBatch: modality " + std::to_string(m) + " has shape " +
                                 hidden[m].shape_string() + " but there are " + std::to_string(labels.size()) +
                                 " labels");
            }
        }
        if (!names.empty() && names.size() != hidden.size()) {
            throw ShapeError("ModalBatch: " + std::to_string(names.size()) + " names for " +
                             std::to_string(hidden.size()) + " modalities");
        }
    }
};

struct MixConfig {
    std::size_t n_out = 256;
    double p_mix = 1.0;
    double alpha_lo = 0.5;
    double alpha_hi = 2.0;
    double p_lo = 2.0;
    double p_hi = 4.0;
    bool anisotropic = true;
    bool reweight = true;
    bool mask_share = true;
    bool dynamic_mix = true;
    std::size_t warmup_epochs = 0;
    double manifold_alpha = 1.0;

    void validate() const
    {
        if (!(p_mix >= 0.0 && p_mix <= 1.0)) {
            throw ParameterError("MixConfig: p_mix must lie in [0, 1]");
        }
        if (!(alpha_lo > 0.0 && alpha_lo <= alpha_hi)) {
            throw ParameterError("MixConfig: need 0 < alpha_lo <= alpha_hi");
        }
        if (!(p_lo > 0.0 && p_lo <= p_hi)) {
            throw ParameterError("MixConfig: need 0 < p_lo <= p_hi");
        }
        if (n_out == 0) {
            throw ParameterError("MixConfig: n_out must be at least 1");
        }
        if (!(manifold_alpha > 0.0)) {
            throw ParameterError("MixConfig: manifold_alpha must be positive");
        }
    }

    /// Bitmask of the four component toggles: aniso, reweight, mask share, dynamic.
    [[nodiscard]] auto toggle_bits() const noexcept -> unsigned
    {
        return (anisotropic ? 1U : 0U) | (reweight ? 2U : 0U) | (mask_share ? 4U : 0U) | (dynamic_mix ? 8U : 0U);
    }
};

struct MixedBatch {
    std::vector<Matrix> hidden;      // n_out x d_m per modality
    Vector labels;                   // unified labels, length n_out
    std::vector<Vector> modal_labels; // per-modality mixed labels
    std::vector<Matrix> mixing;      // n_out x B per modality
    bool mixed = false;              // false for pass-through

    [[nodiscard]] auto output_count() const noexcept -> std::size_t { return labels.size(); }
};

struct AttentionWeights {
    std::vector<Vector> weights; // one length-B vector per modality
};

enum class MixAlgorithm { none, powmix, multimix, manifold };

inline auto to_string(MixAlgorithm a) -> std::string_view
{
    switch (a) {
    case MixAlgorithm::none:
        return "none";
    case MixAlgorithm::powmix:
        return "powmix";
    case MixAlgorithm::multimix:
        return "multimix";
    case MixAlgorithm::manifold:
        return "manifold";
    }
    return "none";
}

inline auto parse_algorithm(std::string_view s) -> MixAlgorithm
{
    if (s == "none") {
        return MixAlgorithm::none;
    }
    if (s == "powmix") {
        return MixAlgorithm::powmix;
    }
    if (s == "multimix") {
        return MixAlgorithm::multimix;
    }
    if (s == "manifold") {
        return MixAlgorithm::manifold;
    }
    throw ParameterError("unknown mixing algorithm '" + std::string(s) + "'");
}

/// Row-mean pooling, ReLU, then normalization across modalities. Examples
/// whose pooled values all clip to zero get uniform 1/M weights.
inline auto attention_weights(ModalBatch const& batch) -> AttentionWeights
{
    batch.validate();
    std::size_t const B = batch.batch_size();
    std::size_t const M = batch.modality_count();
    AttentionWeights out;
    out.weights.assign(M, Vector(B, 0.0));
    for (std::size_t m = 0; m < M; ++m) {
        auto const& h = batch.hidden[m];
        for (std::size_t i = 0; i < B; ++i) {
            double const pooled = mean(h.row(i));
            out.weights[m][i] = pooled > 0.0 ? pooled : 0.0;
        }
    }
    for (std::size_t i = 0; i < B; ++i) {
        double denom = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            denom += out.weights[m][i];
        }
        for (std::size_t m = 0; m < M; ++m) {
            out.weights[m][i] = denom > 0.0 ? out.weights[m][i] / denom : 1.0 / static_cast<double>(M);
        }
    }
    return out;
}

namespace detail {

inline auto sample_dirichlet_rows(std::size_t n_out, std::size_t B, double alpha_lo, double alpha_hi,
                                  RngStream& rng) -> Matrix
{
    Matrix lambda(n_out, B);
    for (std::size_t r = 0; r < n_out; ++r) {
        double const alpha = alpha_lo < alpha_hi ? sample_uniform(alpha_lo, alpha_hi, 1, rng)[0] : alpha_lo;
        auto row = sample_dirichlet_symmetric(alpha, B, rng);
        std::copy(row.begin(), row.end(), lambda.row(r).begin());
    }
    return lambda;
}

inline void repair_empty_rows(Matrix& mask, RngStream& rng)
{
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        auto row = mask.row(r);
        bool any = false;
        for (double v : row) {
            any = any || v != 0.0;
        }
        if (!any) {
            row[rng.uniform_index(row.size())] = 1.0;
        }
    }
}

inline auto sample_one_mask(MixConfig const& cfg, std::size_t B, RngStream& rng) -> Matrix
{
    Matrix prob(cfg.n_out, B);
    double const scale = 1.0 / static_cast<double>(B);
    for (auto& p : prob.data()) {
        double const intensity = cfg.p_lo < cfg.p_hi ? sample_uniform(cfg.p_lo, cfg.p_hi, 1, rng)[0] : cfg.p_lo;
        p = std::clamp(intensity * scale, 0.0, 1.0);
    }
    Matrix mask = sample_bernoulli_matrix(prob, rng);
    repair_empty_rows(mask, rng);
    return mask;
}

inline auto mix_rows(Matrix const& lambda, ModalBatch const& batch, std::size_t m) -> Matrix
{
    return matmul(lambda, batch.hidden[m]);
}

} // namespace detail

/// One n_out x B Dirichlet mixing matrix per modality. Rows are Dir(alpha_i 1_B)
/// with alpha_i ~ U(alpha_lo, alpha_hi). Without anisotropy the first matrix is
/// replicated.
inline auto sample_mixing_matrices(MixConfig const& cfg, std::size_t B, std::size_t M, RngStream& rng)
    -> std::vector<Matrix>
{
    if (B == 0) {
        throw ParameterError("sample_mixing_matrices: batch size must be at least 1");
    }
    std::vector<Matrix> out;
    out.reserve(M);
    out.push_back(detail::sample_dirichlet_rows(cfg.n_out, B, cfg.alpha_lo, cfg.alpha_hi, rng));
    for (std::size_t m = 1; m < M; ++m) {
        out.push_back(cfg.anisotropic ? detail::sample_dirichlet_rows(cfg.n_out, B, cfg.alpha_lo, cfg.alpha_hi, rng)
                                      : out.front());
    }
    return out;
}

/// Binary masks selecting a small subset of the batch per generated row.
/// Success probabilities are P/B with P ~ U(p_lo, p_hi) entrywise. Rows that
/// come out empty get one uniformly chosen entry.
inline auto sample_dynamic_mask(MixConfig const& cfg, std::size_t B, std::size_t M, RngStream& rng)
    -> std::vector<Matrix>
{
    if (B == 0) {
        throw ParameterError("sample_dynamic_mask: batch size must be at least 1");
    }
    if (!cfg.dynamic_mix) {
        return std::vector<Matrix>(M, Matrix(cfg.n_out, B, 1.0));
    }
    std::vector<Matrix> out;
    out.reserve(M);
    out.push_back(detail::sample_one_mask(cfg, B, rng));
    for (std::size_t m = 1; m < M; ++m) {
        out.push_back(cfg.mask_share ? out.front() : detail::sample_one_mask(cfg, B, rng));
    }
    return out;
}

/// Row-l1-normalized (a^T .* mask .* lambda). A row whose weighted sum is zero
/// falls back to (mask .* lambda); if that is zero too the row selects one
/// batch element drawn from `rng`.
inline auto reweighted_mixing_matrix(Matrix const& lambda, std::span<double const> attention, Matrix const& mask,
                                     RngStream& rng) -> Matrix
{
    if (lambda.cols() != attention.size() || mask.rows() != lambda.rows() || mask.cols() != lambda.cols()) {
        throw ShapeError("reweighted_mixing_matrix: lambda " + lambda.shape_string() + ", attention of length " +
                         std::to_string(attention.size()) + ", mask " + mask.shape_string());
    }
    Matrix out(lambda.rows(), lambda.cols());
    for (std::size_t r = 0; r < lambda.rows(); ++r) {
        auto dst = out.row(r);
        auto lam = lambda.row(r);
        auto msk = mask.row(r);
        double total = 0.0;
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] = attention[j] * msk[j] * lam[j];
            total += dst[j];
        }
        if (total <= 0.0) {
            total = 0.0;
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] = msk[j] * lam[j];
                total += dst[j];
            }
        }
        if (total <= 0.0) {
            std::fill(dst.begin(), dst.end(), 0.0);
            dst[rng.uniform_index(dst.size())] = 1.0;
            continue;
        }
        for (auto& v : dst) {
            v /= total;
        }
    }
    return out;
}

/// PowMix with every component individually switchable through `cfg`.
inline auto powmix(ModalBatch const& batch, MixConfig const& cfg, RngStream& rng) -> MixedBatch
{
    batch.validate();
    std::size_t const B = batch.batch_size();
    std::size_t const M = batch.modality_count();

    // Purpose-specific child streams; "lambda" must be split first so that
    // the component-free configuration consumes randomness exactly like multimix.
    RngStream lambda_rng = rng.split("lambda");
    RngStream mask_rng = rng.split("mask");
    RngStream fallback_rng = rng.split("fallback");

    auto lambdas = sample_mixing_matrices(cfg, B, M, lambda_rng);
    auto masks = sample_dynamic_mask(cfg, B, M, mask_rng);

    std::optional<AttentionWeights> attention;
    if (cfg.reweight) {
        attention = attention_weights(batch);
    }

    MixedBatch out;
    out.mixed = true;
    out.mixing.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        if (!cfg.reweight && !cfg.dynamic_mix) {
            // uniform attention and an all-ones mask leave the Dirichlet rows unchanged
            out.mixing.push_back(lambdas[m]);
            continue;
        }
        Vector uniform;
        std::span<double const> a;
        if (attention) {
            a = attention->weights[m];
        } else {
            uniform.assign(B, 1.0 / static_cast<double>(M));
            a = uniform;
        }
        out.mixing.push_back(reweighted_mixing_matrix(lambdas[m], a, masks[m], fallback_rng));
    }

    out.hidden.reserve(M);
    out.modal_labels.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
        out.hidden.push_back(detail::mix_rows(out.mixing[m], batch, m));
        out.modal_labels.push_back(matvec(out.mixing[m], batch.labels));
    }

    // Cross-modal label mixing is skipped when every modality used the same
    // matrix: the labels coincide and averaging would only add rounding.
    bool const shared = std::all_of(out.mixing.begin(), out.mixing.end(),
                                    [&](Matrix const& t) { return t == out.mixing.front(); });
    if (!shared) {
        out.labels.assign(cfg.n_out, 0.0);
        for (auto const& ym : out.modal_labels) {
            for (std::size_t i = 0; i < cfg.n_out; ++i) {
                out.labels[i] += ym[i];
            }
        }
        for (auto& v : out.labels) {
            v /= static_cast<double>(M);
        }
    } else {
        out.labels = out.modal_labels.front();
    }
    return out;
}

/// MultiMix lifted to several modalities: one Dirichlet matrix shared by all.
inline auto multimix(ModalBatch const& batch, std::size_t n_out, RngStream& rng, double alpha_lo = 0.5,
                     double alpha_hi = 2.0) -> MixedBatch
{
    batch.validate();
    if (n_out == 0) {
        throw ParameterError("multimix: n_out must be at least 1");
    }
    std::size_t const M = batch.modality_count();
    RngStream lambda_rng = rng.split("lambda");
    Matrix lambda = detail::sample_dirichlet_rows(n_out, batch.batch_size(), alpha_lo, alpha_hi, lambda_rng);

    MixedBatch out;
    out.mixed = true;
    out.mixing.assign(M, lambda);
    for (std::size_t m = 0; m < M; ++m) {
        out.hidden.push_back(detail::mix_rows(lambda, batch, m));
    }
    out.labels = matvec(lambda, batch.labels);
    out.modal_labels.assign(M, out.labels);
    return out;
}

/// Manifold MixUp between the two halves of the batch with explicit
/// interpolation factors, one per pair, shared across modalities.
inline auto manifold_mixup_with(ModalBatch const& batch, std::span<double const> lambdas) -> MixedBatch
{
    batch.validate();
    std::size_t const B = batch.batch_size();
    if (B % 2 != 0) {
        throw ParameterError("manifold_mixup: batch size must be even, got " + std::to_string(B));
    }
    std::size_t const half = B / 2;
    if (lambdas.size() != half) {
        throw ShapeError("manifold_mixup: expected " + std::to_string(half) + " factors, got " +
                         std::to_string(lambdas.size()));
    }
    Matrix lambda(half, B);
    for (std::size_t i = 0; i < half; ++i) {
        lambda(i, i) = lambdas[i];
        lambda(i, i + half) = 1.0 - lambdas[i];
    }

    std::size_t const M = batch.modality_count();
    MixedBatch out;
    out.mixed = true;
    out.mixing.assign(M, lambda);
    for (std::size_t m = 0; m < M; ++m) {
        auto const& h = batch.hidden[m];
        Matrix mixed(half, h.cols());
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t j = 0; j < h.cols(); ++j) {
                mixed(i, j) = lambdas[i] * h(i, j) + (1.0 - lambdas[i]) * h(i + half, j);
            }
        }
        out.hidden.push_back(std::move(mixed));
    }
    out.labels.resize(half);
    for (std::size_t i = 0; i < half; ++i) {
        out.labels[i] = lambdas[i] * batch.labels[i] + (1.0 - lambdas[i]) * batch.labels[i + half];
    }
    out.modal_labels.assign(M, out.labels);
    return out;
}

inline auto manifold_mixup(ModalBatch const& batch, double alpha, RngStream& rng) -> MixedBatch
{
    if (batch.batch_size() % 2 != 0) {
        throw ParameterError("manifold_mixup: batch size must be even, got " + std::to_string(batch.batch_size()));
    }
    Vector lambdas(batch.batch_size() / 2);
    for (auto& l : lambdas) {
        l = sample_beta(alpha, alpha, rng);
    }
    return manifold_mixup_with(batch, lambdas);
}

/// The unmixed batch dressed as a MixedBatch with identity mixing matrices.
inline auto pass_through(ModalBatch const& batch) -> MixedBatch
{
    batch.validate();
    std::size_t const M = batch.modality_count();
    MixedBatch out;
    out.hidden = batch.hidden;
    out.labels = batch.labels;
    out.modal_labels.assign(M, batch.labels);
    out.mixing.assign(M, Matrix::identity(batch.batch_size()));
    return out;
}

/// Training-time dispatch honoring warmup and the per-batch p_mix coin.
inline auto maybe_mix(ModalBatch const& batch, MixConfig const& cfg, MixAlgorithm algorithm, std::size_t epoch,
                      RngStream& rng) -> MixedBatch
{
    if (algorithm == MixAlgorithm::none || epoch < cfg.warmup_epochs) {
        return pass_through(batch);
    }
    if (!(rng.uniform01() < cfg.p_mix)) {
        return pass_through(batch);
    }
    switch (algorithm) {
    case MixAlgorithm::powmix:
        return powmix(batch, cfg, rng);
    case MixAlgorithm::multimix:
        return multimix(batch, cfg.n_out, rng, cfg.alpha_lo, cfg.alpha_hi);
    case MixAlgorithm::manifold:
        return manifold_mixup(batch, cfg.manifold_alpha, rng);
    case MixAlgorithm::none:
        break;
    }
    return pass_through(batch);
}

} // namespace mixlab
