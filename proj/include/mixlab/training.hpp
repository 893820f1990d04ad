// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded training loop. Mixing runs on encoder outputs right before the
// fusion head and only while training; validation never mixes.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "mixlab/metrics.hpp"
#include "mixlab/mixing.hpp"
#include "mixlab/model.hpp"
#include "mixlab/synthdata.hpp"

namespace mixlab {

/// Non-finite loss during training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    std::size_t epochs = 60;
    std::size_t batch_size = 32;
    OptimizerConfig optimizer;
    std::size_t patience = 10;
    MixAlgorithm algorithm = MixAlgorithm::none;
    MixConfig mix;
    ModelShape model;
    /// Also add the unmixed-batch loss on steps where mixing fires.
    bool add_clean_loss = false;
    /// Options for the reported test metrics (validation MAE does not depend on them).
    MetricOptions metrics;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (epochs == 0 || batch_size == 0) {
            throw ParameterError("TrainConfig: epochs and batch_size must be positive");
        }
        if (!(optimizer.learning_rate >= 0.0)) {
            throw ParameterError("TrainConfig: learning rate must be nonnegative");
        }
        if (patience == 0) {
            throw ParameterError("TrainConfig: patience must be at least 1");
        }
        mix.validate();
    }
};

/// Canonical text of every field that influences a training run.
inline auto describe(TrainConfig const& c) -> std::string
{
    std::ostringstream os;
    os.precision(17);
    os << "epochs=" << c.epochs << ";batch=" << c.batch_size << ";opt=" << (c.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd")
       << ";lr=" << c.optimizer.learning_rate << ";b1=" << c.optimizer.beta1 << ";b2=" << c.optimizer.beta2
       << ";eps=" << c.optimizer.epsilon << ";patience=" << c.patience << ";algo=" << to_string(c.algorithm)
       << ";n_out=" << c.mix.n_out << ";p_mix=" << c.mix.p_mix << ";alpha=" << c.mix.alpha_lo << ":" << c.mix.alpha_hi
       << ";p=" << c.mix.p_lo << ":" << c.mix.p_hi << ";toggles=" << c.mix.toggle_bits()
       << ";warmup=" << c.mix.warmup_epochs << ";manifold_alpha=" << c.mix.manifold_alpha
       << ";fusion=" << to_string(c.model.mode) << ";dims=";
    for (auto d : c.model.input_dims) {
        os << d << ",";
    }
    os << ";h=" << c.model.hidden << ";e=" << c.model.embed << ";hf=" << c.model.fusion_hidden
       << ";cross=" << c.model.cross << ";clean=" << c.add_clean_loss << ";zero_pred=" << c.metrics.exclude_zero_predictions
       << ";wf1=" << c.metrics.weighted_f1 << ";seed=" << c.seed;
    return os.str();
}

inline auto hex64(std::uint64_t h) -> std::string
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline auto config_hash(TrainConfig const& c) -> std::string { return hex64(detail::fnv1a64(describe(c))); }

struct OptimizerState {
    Gradients first;
    Gradients second;
    std::size_t step = 0;
};

inline auto make_optimizer_state(ModelParams const& params) -> OptimizerState
{
    return {zeros_like(params), zeros_like(params), 0};
}

namespace detail {

/// Visits matching tensors of params, grads and both moment buffers.
template <typename Fn>
void zip_tensors(ModelParams& params, Gradients const& grads, OptimizerState& state, Fn&& fn)
{
    std::vector<Matrix*> p;
    std::vector<Matrix const*> g;
    std::vector<Matrix*> m1;
    std::vector<Matrix*> m2;
    for_each_tensor(params, [&](std::string const&, Matrix& t) { p.push_back(&t); });
    for_each_tensor(grads, [&](std::string const&, Matrix const& t) { g.push_back(&t); });
    for_each_tensor(state.first, [&](std::string const&, Matrix& t) { m1.push_back(&t); });
    for_each_tensor(state.second, [&](std::string const&, Matrix& t) { m2.push_back(&t); });
    if (g.size() != p.size() || m1.size() != p.size()) {
        throw ShapeError("optimizer_step: gradient layout does not match parameters");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (g[i]->rows() != p[i]->rows() || g[i]->cols() != p[i]->cols()) {
            throw ShapeError("optimizer_step: gradient " + g[i]->shape_string() + " for parameter " +
                             p[i]->shape_string());
        }
        fn(p[i]->data(), g[i]->data(), m1[i]->data(), m2[i]->data());
    }
}

} // namespace detail

inline void optimizer_step(ModelParams& params, Gradients const& grads, OptimizerState& state,
                           OptimizerConfig const& cfg)
{
    ++state.step;
    double const lr = cfg.learning_rate;
    if (cfg.kind == OptimizerKind::sgd) {
        detail::zip_tensors(params, grads, state, [&](auto p, auto g, auto, auto) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                p[i] -= lr * g[i];
            }
        });
        return;
    }
    double const t = static_cast<double>(state.step);
    double const c1 = 1.0 - std::pow(cfg.beta1, t);
    double const c2 = 1.0 - std::pow(cfg.beta2, t);
    detail::zip_tensors(params, grads, state, [&](auto p, auto g, auto m, auto v) {
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double const mhat = m[i] / c1;
            double const vhat = v[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    });
}

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    MetricReport val;
    std::size_t mixing_steps = 0; // cumulative
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    ModelParams best_params;
    std::size_t best_epoch = 0;
    double best_val_mae = 0.0;
    std::size_t total_steps = 0;
    std::size_t mixing_steps = 0;
    double wall_seconds = 0.0;
};

/// Features and labels of one split.
struct SplitView {
    std::vector<Matrix> features;
    Vector labels;
};

inline auto split_view(Dataset const& ds, Split s) -> SplitView
{
    auto idx = ds.indices(s);
    return {gather_rows(ds.features, idx), gather(ds.labels, idx)};
}

inline auto evaluate(ModelParams const& params, SplitView const& split, MetricOptions opts = {}) -> MetricReport
{
    return compute_metrics(predict(params, split.features), split.labels, opts);
}

using EpochCallback = std::function<void(EpochLog const&)>;

inline auto train(Dataset const& dataset, ModelParams init, TrainConfig const& cfg, RngStream& rng,
                  EpochCallback const& on_epoch = {}) -> TrainResult
{
    cfg.validate();
    dataset.validate();
    auto const start = std::chrono::steady_clock::now();

    SplitView const train_split = split_view(dataset, Split::train);
    SplitView const val_split = split_view(dataset, Split::val);
    if (train_split.labels.empty() || val_split.labels.size() < 2) {
        throw ParameterError("train: need a nonempty train split and at least two validation examples");
    }

    RngStream shuffle_rng = rng.split("shuffle");
    RngStream mix_rng = rng.split("mix");
    std::string const hash = config_hash(cfg);

    // Manifold MixUp pairs the two halves of a double-size batch.
    std::size_t const batch =
        cfg.algorithm == MixAlgorithm::manifold ? 2 * cfg.batch_size : cfg.batch_size;
    std::size_t const n = train_split.labels.size();

    ModelParams params = std::move(init);
    OptimizerState opt = make_optimizer_state(params);
    TrainResult result;
    result.best_params = params;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
        }
        // example-weighted mean of batch losses
        double loss_sum = 0.0;
        for (std::size_t lo = 0; lo < n; lo += batch) {
            std::size_t const hi = std::min(n, lo + batch);
            std::span<std::size_t const> idx(order.data() + lo, hi - lo);
            auto features = gather_rows(train_split.features, idx);
            Vector labels = gather(train_split.labels, idx);

            EncoderCache cache = encode_cached(params, features);
            LossAndGradients lg;
            bool mixed = false;
            bool const odd_pairing = cfg.algorithm == MixAlgorithm::manifold && labels.size() % 2 != 0;
            if (cfg.algorithm != MixAlgorithm::none && !odd_pairing) {
                ModalBatch mb{cache.hidden, labels, {}};
                MixedBatch out = maybe_mix(mb, cfg.mix, cfg.algorithm, epoch, mix_rng);
                if (out.mixed) {
                    mixed = true;
                    lg = loss_and_gradients(params, cache, out.mixing, out.labels);
                    if (cfg.add_clean_loss) {
                        auto clean = loss_and_gradients(params, cache, {}, labels);
                        lg.loss += clean.loss;
                        std::vector<Matrix*> dst;
                        for_each_tensor(lg.grads, [&](std::string const&, Matrix& t) { dst.push_back(&t); });
                        std::size_t k = 0;
                        for_each_tensor(clean.grads, [&](std::string const&, Matrix const& t) {
                            auto d = dst[k++]->data();
                            auto s = t.data();
                            for (std::size_t i = 0; i < d.size(); ++i) {
                                d[i] += s[i];
                            }
                        });
                    }
                }
            }
            if (!mixed) {
                lg = loss_and_gradients(params, cache, {}, labels);
            }
            if (!std::isfinite(lg.loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                    std::to_string(result.total_steps) + " (config " + hash + ")");
            }
            optimizer_step(params, lg.grads, opt, cfg.optimizer);
            ++result.total_steps;
            result.mixing_steps += mixed ? 1 : 0;
            loss_sum += lg.loss * static_cast<double>(labels.size());
        }

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(n);
        log.val = evaluate(params, val_split);
        log.mixing_steps = result.mixing_steps;
        result.epochs.push_back(log);
        if (on_epoch) {
            on_epoch(log);
        }

        if (log.val.mae < result.best_val_mae) {
            result.best_val_mae = log.val.mae;
            result.best_epoch = epoch;
            result.best_params = params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

/// Runs `fn(i)` for i in [0, count) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : workers) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

struct SeedRun {
    std::uint64_t seed = 0;
    ModelParams init;
    TrainResult result;
    MetricReport test;
};

struct Summary {
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

/// Mean and sample standard deviation (zero for a single value).
inline auto summarize(std::span<double const> values) -> Summary
{
    Summary s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    s.mean = mean(values);
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) {
            acc += (v - s.mean) * (v - s.mean);
        }
        s.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

inline constexpr std::array<std::string_view, 6> kMetricNames{"mae", "corr", "acc2", "f1", "acc5", "acc7"};

/// Metric by name; an undefined correlation yields NaN.
inline auto metric_value(MetricReport const& r, std::string_view name) -> double
{
    if (name == "mae") {
        return r.mae;
    }
    if (name == "corr") {
        return r.corr.value_or(std::numeric_limits<double>::quiet_NaN());
    }
    if (name == "acc2") {
        return r.acc2;
    }
    if (name == "f1") {
        return r.f1;
    }
    if (name == "acc5") {
        return r.acc5;
    }
    if (name == "acc7") {
        return r.acc7;
    }
    throw ParameterError("unknown metric '" + std::string(name) + "'");
}

struct SeedAggregate {
    std::vector<SeedRun> runs; // sorted by seed
    std::array<Summary, kMetricNames.size()> test;
    Summary best_val_mae;
};

/// Initial parameters depend only on (shape, seed), so runs that differ only in
/// the mixing setup start from the same point.
inline auto init_for_seed(ModelShape const& shape, std::uint64_t seed) -> ModelParams
{
    RngStream init_rng = RngStream(seed).split("init");
    return init_params(shape, init_rng);
}

inline auto run_one_seed(Dataset const& dataset, TrainConfig cfg, std::uint64_t seed) -> SeedRun
{
    cfg.seed = seed;
    SeedRun run;
    run.seed = seed;
    run.init = init_for_seed(cfg.model, seed);
    RngStream train_rng = RngStream(seed).split("train");
    run.result = train(dataset, run.init, cfg, train_rng);
    run.test = evaluate(run.result.best_params, split_view(dataset, Split::test), cfg.metrics);
    return run;
}

inline auto aggregate_runs(std::vector<SeedRun> runs) -> SeedAggregate
{
    std::sort(runs.begin(), runs.end(), [](auto const& a, auto const& b) { return a.seed < b.seed; });
    SeedAggregate agg;
    for (std::size_t k = 0; k < kMetricNames.size(); ++k) {
        Vector values;
        for (auto const& r : runs) {
            double const v = metric_value(r.test, kMetricNames[k]);
            if (std::isfinite(v)) {
                values.push_back(v);
            }
        }
        agg.test[k] = summarize(values);
    }
    Vector val;
    for (auto const& r : runs) {
        val.push_back(r.result.best_val_mae);
    }
    agg.best_val_mae = summarize(val);
    agg.runs = std::move(runs);
    return agg;
}

inline auto run_seeds(Dataset const& dataset, TrainConfig const& cfg, std::vector<std::uint64_t> seeds,
                      std::size_t jobs = 1) -> SeedAggregate
{
    if (seeds.empty()) {
        throw ParameterError("run_seeds: at least one seed is required");
    }
    std::sort(seeds.begin(), seeds.end());
    std::vector<SeedRun> runs(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) { runs[i] = run_one_seed(dataset, cfg, seeds[i]); });
    return aggregate_runs(std::move(runs));
}

} // namespace mixlab
