// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Straight-line reference implementations used by the unit and acceptance
// tests. They share only the scalar samplers with the library and recompute
// every matrix product with explicit loops.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixlab/mixing.hpp"
#include "mixlab/random.hpp"

namespace oracle {

using mixlab::Matrix;
using mixlab::MixConfig;
using mixlab::ModalBatch;
using mixlab::RngStream;
using mixlab::Vector;

struct Mixed {
    std::vector<Matrix> mixing;
    std::vector<Matrix> hidden;
    std::vector<Vector> modal_labels;
    Vector labels;
};

inline auto dirichlet_matrix(std::size_t n_out, std::size_t B, double lo, double hi, RngStream& rng) -> Matrix
{
    Matrix lam(n_out, B);
    for (std::size_t r = 0; r < n_out; ++r) {
        double alpha = lo;
        if (lo < hi) {
            alpha = mixlab::sample_uniform(lo, hi, 1, rng)[0];
        }
        Vector row = mixlab::sample_dirichlet_symmetric(alpha, B, rng);
        for (std::size_t j = 0; j < B; ++j) {
            lam(r, j) = row[j];
        }
    }
    return lam;
}

inline auto mask_matrix(MixConfig const& cfg, std::size_t B, RngStream& rng) -> Matrix
{
    Matrix prob(cfg.n_out, B);
    for (std::size_t r = 0; r < cfg.n_out; ++r) {
        for (std::size_t j = 0; j < B; ++j) {
            double p = cfg.p_lo;
            if (cfg.p_lo < cfg.p_hi) {
                p = mixlab::sample_uniform(cfg.p_lo, cfg.p_hi, 1, rng)[0];
            }
            prob(r, j) = std::min(1.0, std::max(0.0, p / static_cast<double>(B)));
        }
    }
    Matrix mask = mixlab::sample_bernoulli_matrix(prob, rng);
    for (std::size_t r = 0; r < cfg.n_out; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < B; ++j) {
            s += mask(r, j);
        }
        if (s == 0.0) {
            mask(r, rng.uniform_index(B)) = 1.0;
        }
    }
    return mask;
}

inline auto mix_apply(Matrix const& lam, Matrix const& h) -> Matrix
{
    Matrix out(lam.rows(), h.cols());
    for (std::size_t i = 0; i < lam.rows(); ++i) {
        for (std::size_t c = 0; c < h.cols(); ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < lam.cols(); ++j) {
                s += lam(i, j) * h(j, c);
            }
            out(i, c) = s;
        }
    }
    return out;
}

inline auto mix_apply(Matrix const& lam, Vector const& y) -> Vector
{
    Vector out(lam.rows(), 0.0);
    for (std::size_t i = 0; i < lam.rows(); ++i) {
        for (std::size_t j = 0; j < lam.cols(); ++j) {
            out[i] += lam(i, j) * y[j];
        }
    }
    return out;
}

/// a[m][i] = relu(mean_c H_m[i, c]) normalized over m; uniform if all clip.
inline auto attention(ModalBatch const& b) -> std::vector<Vector>
{
    std::size_t const M = b.hidden.size();
    std::size_t const B = b.labels.size();
    std::vector<Vector> a(M, Vector(B, 0.0));
    for (std::size_t i = 0; i < B; ++i) {
        double total = 0.0;
        for (std::size_t m = 0; m < M; ++m) {
            double s = 0.0;
            for (std::size_t c = 0; c < b.hidden[m].cols(); ++c) {
                s += b.hidden[m](i, c);
            }
            s /= static_cast<double>(b.hidden[m].cols());
            a[m][i] = s > 0.0 ? s : 0.0;
            total += a[m][i];
        }
        for (std::size_t m = 0; m < M; ++m) {
            a[m][i] = total > 0.0 ? a[m][i] / total : 1.0 / static_cast<double>(M);
        }
    }
    return a;
}

inline auto powmix(ModalBatch const& b, MixConfig const& cfg, RngStream rng) -> Mixed
{
    std::size_t const M = b.hidden.size();
    std::size_t const B = b.labels.size();
    RngStream lam_rng = rng.split("lambda");
    RngStream mask_rng = rng.split("mask");
    RngStream fb_rng = rng.split("fallback");

    std::vector<Matrix> lams;
    for (std::size_t m = 0; m < M; ++m) {
        if (m == 0 || cfg.anisotropic) {
            lams.push_back(dirichlet_matrix(cfg.n_out, B, cfg.alpha_lo, cfg.alpha_hi, lam_rng));
        } else {
            lams.push_back(lams[0]);
        }
    }
    std::vector<Matrix> masks;
    for (std::size_t m = 0; m < M; ++m) {
        if (!cfg.dynamic_mix) {
            masks.emplace_back(cfg.n_out, B, 1.0);
        } else if (m == 0 || !cfg.mask_share) {
            masks.push_back(mask_matrix(cfg, B, mask_rng));
        } else {
            masks.push_back(masks[0]);
        }
    }
    std::vector<Vector> a = cfg.reweight ? attention(b) : std::vector<Vector>(M, Vector(B, 1.0 / static_cast<double>(M)));

    Mixed out;
    for (std::size_t m = 0; m < M; ++m) {
        Matrix t(cfg.n_out, B);
        for (std::size_t i = 0; i < cfg.n_out; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < B; ++j) {
                t(i, j) = a[m][j] * masks[m](i, j) * lams[m](i, j);
                s += t(i, j);
            }
            if (!(s > 0.0)) {
                s = 0.0;
                for (std::size_t j = 0; j < B; ++j) {
                    t(i, j) = masks[m](i, j) * lams[m](i, j);
                    s += t(i, j);
                }
            }
            if (!(s > 0.0)) {
                for (std::size_t j = 0; j < B; ++j) {
                    t(i, j) = 0.0;
                }
                t(i, fb_rng.uniform_index(B)) = 1.0;
                continue;
            }
            for (std::size_t j = 0; j < B; ++j) {
                t(i, j) /= s;
            }
        }
        out.mixing.push_back(t);
        out.hidden.push_back(mix_apply(t, b.hidden[m]));
        out.modal_labels.push_back(mix_apply(t, b.labels));
    }
    out.labels.assign(cfg.n_out, 0.0);
    for (std::size_t i = 0; i < cfg.n_out; ++i) {
        for (std::size_t m = 0; m < M; ++m) {
            out.labels[i] += out.modal_labels[m][i];
        }
        out.labels[i] /= static_cast<double>(M);
    }
    return out;
}

inline auto multimix(ModalBatch const& b, std::size_t n_out, RngStream rng) -> Mixed
{
    RngStream lam_rng = rng.split("lambda");
    Matrix lam = dirichlet_matrix(n_out, b.labels.size(), 0.5, 2.0, lam_rng);
    Mixed out;
    for (auto const& h : b.hidden) {
        out.mixing.push_back(lam);
        out.hidden.push_back(mix_apply(lam, h));
        out.modal_labels.push_back(mix_apply(lam, b.labels));
    }
    out.labels = out.modal_labels[0];
    return out;
}

inline auto manifold(ModalBatch const& b, double alpha, RngStream rng) -> Mixed
{
    std::size_t const half = b.labels.size() / 2;
    Vector lam(half);
    for (auto& l : lam) {
        l = mixlab::sample_beta(alpha, alpha, rng);
    }
    Mixed out;
    for (auto const& h : b.hidden) {
        Matrix mixed(half, h.cols());
        for (std::size_t i = 0; i < half; ++i) {
            for (std::size_t c = 0; c < h.cols(); ++c) {
                mixed(i, c) = lam[i] * h(i, c) + (1.0 - lam[i]) * h(i + half, c);
            }
        }
        out.hidden.push_back(mixed);
    }
    out.labels.resize(half);
    for (std::size_t i = 0; i < half; ++i) {
        out.labels[i] = lam[i] * b.labels[i] + (1.0 - lam[i]) * b.labels[i + half];
    }
    out.modal_labels.assign(b.hidden.size(), out.labels);
    return out;
}

inline auto max_abs_diff(Matrix const& a, Matrix const& b) -> double
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        return INFINITY;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

inline auto max_abs_diff(Vector const& a, Vector const& b) -> double
{
    if (a.size() != b.size()) {
        return INFINITY;
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

/// Largest deviation between library output and oracle; the mixing matrices
/// are compared only when the oracle materialized them.
inline auto deviation(mixlab::MixedBatch const& got, Mixed const& want) -> double
{
    double worst = max_abs_diff(got.labels, want.labels);
    if (got.hidden.size() != want.hidden.size()) {
        return INFINITY;
    }
    for (std::size_t m = 0; m < want.hidden.size(); ++m) {
        worst = std::max(worst, max_abs_diff(got.hidden[m], want.hidden[m]));
        worst = std::max(worst, max_abs_diff(got.modal_labels[m], want.modal_labels[m]));
        if (!want.mixing.empty()) {
            worst = std::max(worst, max_abs_diff(got.mixing[m], want.mixing[m]));
        }
    }
    return worst;
}

inline auto random_batch(std::size_t B, std::size_t M, std::size_t max_dim, RngStream& rng) -> ModalBatch
{
    ModalBatch b;
    for (std::size_t m = 0; m < M; ++m) {
        std::size_t const d = 1 + rng.uniform_index(max_dim);
        Matrix h(B, d);
        for (auto& v : h.data()) {
            v = rng.normal();
        }
        b.hidden.push_back(h);
    }
    b.labels.resize(B);
    for (auto& y : b.labels) {
        y = 6.0 * rng.uniform01() - 3.0;
    }
    return b;
}

inline auto config_from_bits(unsigned bits, std::size_t n_out) -> MixConfig
{
    MixConfig c;
    c.n_out = n_out;
    c.anisotropic = (bits & 1U) != 0;
    c.reweight = (bits & 2U) != 0;
    c.mask_share = (bits & 4U) != 0;
    c.dynamic_mix = (bits & 8U) != 0;
    return c;
}

/// Worst violation of row-stochasticity and of per-column hull membership.
struct InvariantReport {
    double row_sum_error = 0.0;
    double negative = 0.0;
    double hull_excess = 0.0;
    double label_excess = 0.0;
};

inline auto check_invariants(ModalBatch const& b, mixlab::MixedBatch const& out) -> InvariantReport
{
    InvariantReport r;
    for (std::size_t m = 0; m < out.mixing.size(); ++m) {
        auto const& t = out.mixing[m];
        for (std::size_t i = 0; i < t.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < t.cols(); ++j) {
                r.negative = std::max(r.negative, -t(i, j));
                s += t(i, j);
            }
            r.row_sum_error = std::max(r.row_sum_error, std::abs(s - 1.0));
        }
        auto const& h = b.hidden[m];
        for (std::size_t c = 0; c < h.cols(); ++c) {
            double lo = INFINITY;
            double hi = -INFINITY;
            for (std::size_t j = 0; j < h.rows(); ++j) {
                lo = std::min(lo, h(j, c));
                hi = std::max(hi, h(j, c));
            }
            for (std::size_t i = 0; i < out.hidden[m].rows(); ++i) {
                double const v = out.hidden[m](i, c);
                r.hull_excess = std::max({r.hull_excess, lo - v, v - hi});
            }
        }
    }
    double const ylo = *std::min_element(b.labels.begin(), b.labels.end());
    double const yhi = *std::max_element(b.labels.begin(), b.labels.end());
    for (double y : out.labels) {
        r.label_excess = std::max({r.label_excess, ylo - y, y - yhi});
    }
    return r;
}

} // namespace oracle
