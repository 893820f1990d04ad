// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Sentiment-regression metrics: MAE, Pearson correlation, binary accuracy/F1
// with neutral exclusion, and 5/7-class accuracy after clamp-and-round binning.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "mixlab/numerics.hpp"

namespace mixlab {

struct MetricOptions {
    /// Exclude examples whose prediction (instead of target) is zero from Acc-2/F1.
    bool exclude_zero_predictions = false;
    /// Support-weighted F1 over both classes instead of positive-class F1.
    bool weighted_f1 = false;
};

struct MetricReport {
    double mae = 0.0;
    std::optional<double> corr; // empty when either vector has zero variance
    double acc2 = 0.0;
    double f1 = 0.0;
    double acc5 = 0.0;
    double acc7 = 0.0;
    std::size_t binary_count = 0;
    std::size_t excluded_count = 0;
};

inline auto pearson_correlation(std::span<double const> x, std::span<double const> y) -> std::optional<double>
{
    if (x.size() != y.size()) {
        throw ShapeError("pearson_correlation: lengths " + std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
    }
    if (x.size() < 2) {
        return std::nullopt;
    }
    double const mx = mean(x);
    double const my = mean(y);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double const dx = x[i] - mx;
        double const dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;
    }
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Nearest integer bin after clamping to [-limit, limit].
inline auto sentiment_class(double v, double limit) -> long { return std::lround(std::clamp(v, -limit, limit)); }

inline auto compute_metrics(std::span<double const> pred, std::span<double const> target, MetricOptions opts = {})
    -> MetricReport
{
    if (pred.size() != target.size()) {
        throw ShapeError("compute_metrics: " + std::to_string(pred.size()) + " predictions for " +
                         std::to_string(target.size()) + " targets");
    }
    if (pred.size() < 2) {
        throw ShapeError("compute_metrics: need at least two examples");
    }
    std::size_t const n = pred.size();
    MetricReport r;
    std::size_t hit5 = 0;
    std::size_t hit7 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        r.mae += std::abs(pred[i] - target[i]);
        hit5 += sentiment_class(pred[i], 2.0) == sentiment_class(target[i], 2.0) ? 1 : 0;
        hit7 += sentiment_class(pred[i], 3.0) == sentiment_class(target[i], 3.0) ? 1 : 0;
    }
    r.mae /= static_cast<double>(n);
    r.acc5 = static_cast<double>(hit5) / static_cast<double>(n);
    r.acc7 = static_cast<double>(hit7) / static_cast<double>(n);
    r.corr = pearson_correlation(pred, target);

    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double const key = opts.exclude_zero_predictions ? pred[i] : target[i];
        if (key == 0.0) {
            ++r.excluded_count;
            continue;
        }
        bool const p = pred[i] > 0.0;
        bool const t = target[i] > 0.0;
        tp += (p && t) ? 1 : 0;
        tn += (!p && !t) ? 1 : 0;
        fp += (p && !t) ? 1 : 0;
        fn += (!p && t) ? 1 : 0;
    }
    r.binary_count = n - r.excluded_count;
    if (r.binary_count > 0) {
        r.acc2 = static_cast<double>(tp + tn) / static_cast<double>(r.binary_count);
        auto f1_of = [](std::size_t tp_, std::size_t fp_, std::size_t fn_) {
            std::size_t const denom = 2 * tp_ + fp_ + fn_;
            return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp_) / static_cast<double>(denom);
        };
        double const f1_pos = f1_of(tp, fp, fn);
        if (opts.weighted_f1) {
            double const f1_neg = f1_of(tn, fn, fp);
            double const support_pos = static_cast<double>(tp + fn);
            double const support_neg = static_cast<double>(tn + fp);
            r.f1 = (support_pos * f1_pos + support_neg * f1_neg) / static_cast<double>(r.binary_count);
        } else {
            r.f1 = f1_pos;
        }
    }
    return r;
}

} // namespace mixlab
