// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Analysis harnesses: input-noise robustness, text dominance, frozen-encoder
// linear probes and limited-data sweeps.

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixlab/metrics.hpp"
#include "mixlab/training.hpp"

namespace mixlab {

enum class NoiseKind { feature_drop_aligned, feature_drop_independent, text_drop, text_mean_replace };

inline auto to_string(NoiseKind k) -> std::string_view
{
    switch (k) {
    case NoiseKind::feature_drop_aligned:
        return "feature_drop_aligned";
    case NoiseKind::feature_drop_independent:
        return "feature_drop_independent";
    case NoiseKind::text_drop:
        return "text_drop";
    case NoiseKind::text_mean_replace:
        return "text_mean_replace";
    }
    return "feature_drop_aligned";
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::feature_drop_aligned;
    double p = 0.0;
};

/// Per-modality column means of the train split.
inline auto train_means(Dataset const& ds) -> std::vector<Vector>
{
    auto idx = ds.indices(Split::train);
    std::vector<Vector> out;
    for (auto const& f : ds.features) {
        Vector mu(f.cols(), 0.0);
        for (auto i : idx) {
            for (std::size_t j = 0; j < f.cols(); ++j) {
                mu[j] += f(i, j);
            }
        }
        for (auto& v : mu) {
            v /= static_cast<double>(std::max<std::size_t>(1, idx.size()));
        }
        out.push_back(std::move(mu));
    }
    return out;
}

/// Corrupted copy of `features`. Modality 0 plays the role of text.
///
/// The feature-drop kinds zero single coordinates. In aligned mode one
/// uniform draw per coordinate index is shared by every modality, so
/// coordinate j is dropped in all modalities that have it or in none.
inline auto apply_noise(std::vector<Matrix> features, NoiseSpec const& spec, std::vector<Vector> const& means,
                        RngStream& rng) -> std::vector<Matrix>
{
    if (!(spec.p >= 0.0 && spec.p <= 1.0)) {
        throw ParameterError("apply_noise: intensity must lie in [0, 1]");
    }
    if (features.empty() || spec.p == 0.0) {
        return features;
    }
    std::size_t const n = features.front().rows();
    switch (spec.kind) {
    case NoiseKind::feature_drop_aligned: {
        std::size_t width = 0;
        for (auto const& f : features) {
            width = std::max(width, f.cols());
        }
        Vector draw(width);
        for (std::size_t i = 0; i < n; ++i) {
            for (auto& u : draw) {
                u = rng.uniform01();
            }
            for (auto& f : features) {
                auto row = f.row(i);
                for (std::size_t j = 0; j < row.size(); ++j) {
                    if (draw[j] < spec.p) {
                        row[j] = 0.0;
                    }
                }
            }
        }
        break;
    }
    case NoiseKind::feature_drop_independent:
        for (auto& f : features) {
            for (auto& v : f.data()) {
                if (rng.uniform01() < spec.p) {
                    v = 0.0;
                }
            }
        }
        break;
    case NoiseKind::text_drop:
    case NoiseKind::text_mean_replace: {
        auto& text = features.front();
        if (spec.kind == NoiseKind::text_mean_replace && (means.empty() || means.front().size() != text.cols())) {
            throw ShapeError("apply_noise: train-split means are required for text_mean_replace");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform01() < spec.p) {
                auto row = text.row(i);
                for (std::size_t j = 0; j < row.size(); ++j) {
                    row[j] = spec.kind == NoiseKind::text_drop ? 0.0 : means.front()[j];
                }
            }
        }
        break;
    }
    }
    return features;
}

/// Incremental mean of metric reports; averaging identical reports returns
/// them bit-for-bit.
class MetricAverager {
public:
    void add(MetricReport const& r)
    {
        ++count_;
        double const k = static_cast<double>(count_);
        auto upd = [k](double& acc, double x) { acc += (x - acc) / k; };
        upd(avg_.mae, r.mae);
        upd(avg_.acc2, r.acc2);
        upd(avg_.f1, r.f1);
        upd(avg_.acc5, r.acc5);
        upd(avg_.acc7, r.acc7);
        upd(binary_, static_cast<double>(r.binary_count));
        upd(excluded_, static_cast<double>(r.excluded_count));
        if (r.corr) {
            ++corr_count_;
            corr_ += (*r.corr - corr_) / static_cast<double>(corr_count_);
        }
    }

    [[nodiscard]] auto result() const -> MetricReport
    {
        MetricReport out = avg_;
        if (corr_count_ > 0) {
            out.corr = corr_;
        }
        out.binary_count = static_cast<std::size_t>(std::lround(binary_));
        out.excluded_count = static_cast<std::size_t>(std::lround(excluded_));
        return out;
    }

private:
    MetricReport avg_;
    double corr_ = 0.0;
    double binary_ = 0.0;
    double excluded_ = 0.0;
    std::size_t count_ = 0;
    std::size_t corr_count_ = 0;
};

/// Spearman rank correlation with average ranks for ties.
inline auto spearman_correlation(std::span<double const> x, std::span<double const> y) -> std::optional<double>
{
    auto ranks = [](std::span<double const> v) {
        std::vector<std::size_t> order(v.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
        Vector r(v.size());
        for (std::size_t i = 0; i < order.size();) {
            std::size_t j = i;
            while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) {
                ++j;
            }
            double const avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) {
                r[order[k]] = avg;
            }
            i = j + 1;
        }
        return r;
    };
    if (x.size() != y.size()) {
        throw ShapeError("spearman_correlation: length mismatch");
    }
    Vector const rx = ranks(x);
    Vector const ry = ranks(y);
    return pearson_correlation(rx, ry);
}

inline auto default_noise_grid() -> Vector { return {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40}; }

struct NoiseCurveRow {
    double p = 0.0;
    MetricReport metrics; // averaged over noise kinds and runs
};

/// Test-split metrics under each noise intensity, averaged over `kinds` and
/// `runs` independent corruptions. Each (p, kind, run) cell has its own stream.
inline auto robustness_curve(ModelParams const& params, Dataset const& dataset, std::vector<NoiseKind> const& kinds,
                             Vector const& grid, std::size_t runs, std::uint64_t seed, std::size_t jobs = 1,
                             MetricOptions opts = {})
    -> std::vector<NoiseCurveRow>
{
    if (kinds.empty() || runs == 0) {
        throw ParameterError("robustness_curve: need at least one noise kind and one run");
    }
    SplitView const test = split_view(dataset, Split::test);
    auto const means = train_means(dataset);
    std::size_t const cells = grid.size() * kinds.size() * runs;
    std::vector<MetricReport> reports(cells);
    parallel_for(cells, jobs, [&](std::size_t c) {
        std::size_t const gi = c / (kinds.size() * runs);
        std::size_t const ki = (c / runs) % kinds.size();
        std::size_t const run = c % runs;
        RngStream rng(detail::fnv1a64("noise:" + std::to_string(gi) + ":" + std::string(to_string(kinds[ki])) + ":" +
                                          std::to_string(run),
                                      seed));
        auto noisy = apply_noise(test.features, {kinds[ki], grid[gi]}, means, rng);
        reports[c] = compute_metrics(predict(params, noisy), test.labels, opts);
    });
    std::vector<NoiseCurveRow> rows;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        MetricAverager avg;
        for (std::size_t k = 0; k < kinds.size() * runs; ++k) {
            avg.add(reports[gi * kinds.size() * runs + k]);
        }
        rows.push_back({grid[gi], avg.result()});
    }
    return rows;
}

/// Closed-form ridge regression with an unpenalized intercept.
struct LinearHead {
    Vector weights;
    double bias = 0.0;

    [[nodiscard]] auto predict(Matrix const& x) const -> Vector
    {
        Vector out = matvec(x, weights);
        for (auto& v : out) {
            v += bias;
        }
        return out;
    }
};

inline auto fit_ridge(Matrix const& x, std::span<double const> y, double ridge = 1e-6) -> LinearHead
{
    if (x.rows() != y.size() || x.rows() == 0) {
        throw ShapeError("fit_ridge: design " + x.shape_string() + " for " + std::to_string(y.size()) + " targets");
    }
    std::size_t const n = x.rows();
    std::size_t const d = x.cols();
    Vector mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            mu[j] += x(i, j);
        }
    }
    for (auto& v : mu) {
        v /= static_cast<double>(n);
    }
    double const ybar = mean(y);
    Matrix xc(n, d);
    Matrix yc(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            xc(i, j) = x(i, j) - mu[j];
        }
        yc(i, 0) = y[i] - ybar;
    }
    Matrix gram = matmul_tn(xc, xc);
    // scale-aware ridge keeps the solve well posed for degenerate features
    double trace = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        trace += gram(j, j);
    }
    double const lambda = ridge * std::max(1.0, trace / static_cast<double>(std::max<std::size_t>(1, d)));
    for (std::size_t j = 0; j < d; ++j) {
        gram(j, j) += lambda;
    }
    Matrix w = solve_spd(std::move(gram), matmul_tn(xc, yc));
    LinearHead head;
    head.weights.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        head.weights[j] = w(j, 0);
    }
    head.bias = ybar;
    for (std::size_t j = 0; j < d; ++j) {
        head.bias -= head.weights[j] * mu[j];
    }
    return head;
}

struct ProbeReport {
    std::vector<MetricReport> modalities; // test metrics of each per-modality probe
    MetricReport fusion;                  // test metrics of the trained fusion head
};

/// Fits a linear head on each frozen encoder output over the train split and
/// scores it on the test split.
inline auto linear_probe(ModelParams const& params, Dataset const& dataset, MetricOptions opts = {},
                         double ridge = 1e-6) -> ProbeReport
{
    SplitView const train_split = split_view(dataset, Split::train);
    SplitView const test_split = split_view(dataset, Split::test);
    auto const h_train = encode(params, train_split.features);
    auto const h_test = encode(params, test_split.features);
    ProbeReport out;
    for (std::size_t m = 0; m < h_train.size(); ++m) {
        LinearHead head = fit_ridge(h_train[m], train_split.labels, ridge);
        out.modalities.push_back(compute_metrics(head.predict(h_test[m]), test_split.labels, opts));
    }
    out.fusion = compute_metrics(fuse_predict(params, h_test), test_split.labels, opts);
    return out;
}

/// Trains one model per seed, probes it, and averages the reports.
inline auto unimodal_evaluation(Dataset const& dataset, TrainConfig const& cfg, std::vector<std::uint64_t> seeds,
                                std::size_t jobs = 1) -> ProbeReport
{
    auto agg = run_seeds(dataset, cfg, std::move(seeds), jobs);
    std::vector<MetricAverager> per(dataset.modality_count());
    MetricAverager fusion;
    for (auto const& run : agg.runs) {
        auto rep = linear_probe(run.result.best_params, dataset, cfg.metrics);
        for (std::size_t m = 0; m < per.size(); ++m) {
            per[m].add(rep.modalities[m]);
        }
        fusion.add(rep.fusion);
    }
    ProbeReport out;
    for (auto const& a : per) {
        out.modalities.push_back(a.result());
    }
    out.fusion = fusion.result();
    return out;
}

/// Keeps `count` train examples chosen by a seeded shuffle; val and test are untouched.
inline auto subsample_train_count(Dataset const& ds, std::size_t count, std::uint64_t seed) -> Dataset
{
    auto train_idx = ds.indices(Split::train);
    if (count == 0 || count > train_idx.size()) {
        throw ParameterError("subsample_train: cannot keep " + std::to_string(count) + " of " +
                             std::to_string(train_idx.size()) + " train examples");
    }
    RngStream rng = RngStream(seed).split("subsample");
    for (std::size_t i = train_idx.size(); i > 1; --i) {
        std::swap(train_idx[i - 1], train_idx[rng.uniform_index(i)]);
    }
    std::vector<bool> keep(ds.size(), false);
    for (std::size_t k = 0; k < count; ++k) {
        keep[train_idx[k]] = true;
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.splits[i] != Split::train || keep[i]) {
            rows.push_back(i);
        }
    }
    Dataset out;
    out.features = gather_rows(ds.features, rows);
    out.labels = gather(ds.labels, rows);
    for (auto i : rows) {
        out.splits.push_back(ds.splits[i]);
    }
    out.label_lo = ds.label_lo;
    out.label_hi = ds.label_hi;
    return out;
}

inline auto subsample_train(Dataset const& ds, double fraction, std::uint64_t seed) -> Dataset
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ParameterError("subsample_train: fraction must lie in (0, 1]");
    }
    std::size_t const n = ds.indices(Split::train).size();
    auto const count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return subsample_train_count(ds, std::max<std::size_t>(1, count), seed);
}

inline auto default_fractions() -> Vector { return {0.1, 0.2, 0.3, 0.5, 0.8, 1.0}; }

struct LimitedDataRow {
    double fraction = 0.0;
    std::size_t train_size = 0;
    SeedAggregate baseline;
    SeedAggregate mixed;
    std::array<Summary, kMetricNames.size()> gap; // mixed minus baseline, paired by seed
};

/// Paired comparison of `cfg` against the same config without mixing on
/// progressively larger train subsets. The subset depends on (fraction, data_seed) only.
inline auto limited_data_sweep(Dataset const& dataset, TrainConfig const& cfg, Vector const& fractions,
                               std::vector<std::uint64_t> const& seeds, std::uint64_t data_seed = 0,
                               std::size_t jobs = 1) -> std::vector<LimitedDataRow>
{
    std::vector<LimitedDataRow> rows;
    for (double fraction : fractions) {
        Dataset const sub = subsample_train(dataset, fraction, data_seed);
        TrainConfig base = cfg;
        base.algorithm = MixAlgorithm::none;
        LimitedDataRow row;
        row.fraction = fraction;
        row.train_size = sub.indices(Split::train).size();
        row.baseline = run_seeds(sub, base, seeds, jobs);
        row.mixed = run_seeds(sub, cfg, seeds, jobs);
        for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
            Vector diffs;
            for (std::size_t i = 0; i < row.mixed.runs.size(); ++i) {
                double const d = metric_value(row.mixed.runs[i].test, kMetricNames[k]) -
                                 metric_value(row.baseline.runs[i].test, kMetricNames[k]);
                if (std::isfinite(d)) {
                    diffs.push_back(d);
                }
            }
            row.gap[k] = summarize(diffs);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace mixlab
