// Copyright (c) 2026, mixlab contributors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "gradcheck.hpp"
#include "metric_oracle.hpp"
#include "mixlab/mixlab.hpp"
#include "oracles.hpp"

using namespace mixlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

auto seconds_since(Clock::time_point t0) -> double
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

auto fmt(char const* f, auto... args) -> std::string
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

auto slurp(fs::path const& p) -> std::string
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

auto criterion_invariants() -> Outcome
{
    auto const t0 = Clock::now();
    RngStream rng(101);
    double row_err = 0.0;
    double neg = 0.0;
    double hull = 0.0;
    double label = 0.0;
    unsigned seen = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t const B = 1 + rng.uniform_index(64);
        std::size_t const M = 1 + rng.uniform_index(4);
        unsigned const bits = static_cast<unsigned>(trial % 16);
        seen |= 1U << bits;
        ModalBatch b = oracle::random_batch(B, M, 5, rng);
        auto cfg = oracle::config_from_bits(bits, 1 + rng.uniform_index(512));
        auto r = oracle::check_invariants(b, powmix(b, cfg, rng));
        row_err = std::max(row_err, r.row_sum_error);
        neg = std::max(neg, r.negative);
        hull = std::max(hull, r.hull_excess);
        label = std::max(label, r.label_excess);
    }
    double const secs = seconds_since(t0);
    bool const ok = row_err <= 1e-9 && neg <= 0.0 && hull <= 1e-9 && label <= 1e-9 && seen == 0xFFFF && secs < 30.0;
    return {ok, fmt("1000 configs, 16 toggle sets, row-sum err %.2e, min weight %.2e, hull excess %.2e, %.2fs",
                    row_err, -neg, hull, secs)};
}

auto criterion_sparsity() -> Outcome
{
    auto const t0 = Clock::now();
    RngStream rng(102);
    MixConfig cfg; // defaults: P ~ U(2, 4)
    cfg.n_out = 256;
    double total = 0.0;
    std::size_t rows = 0;
    while (rows < 20000) {
        ModalBatch b = oracle::random_batch(32, 3, 4, rng);
        // encoder outputs are post-ReLU in practice; keep attention positive
        for (auto& h : b.hidden) {
            for (auto& v : h.data()) {
                v = std::abs(v);
            }
        }
        auto out = powmix(b, cfg, rng);
        for (auto const& t : out.mixing) {
            for (std::size_t r = 0; r < t.rows(); ++r) {
                for (double v : t.row(r)) {
                    total += v != 0.0 ? 1.0 : 0.0;
                }
                ++rows;
            }
        }
    }
    double const mean_nnz = total / static_cast<double>(rows);
    double const secs = seconds_since(t0);
    return {mean_nnz >= 2.8 && mean_nnz <= 3.2 && secs < 10.0,
            fmt("mean nonzeros %.4f over %zu rows, %.2fs", mean_nnz, rows, secs)};
}

auto criterion_oracles() -> Outcome
{
    auto const t0 = Clock::now();
    RngStream rng(103);
    double worst = 0.0;
    int cases = 0;
    for (int trial = 0; trial < 600; ++trial) {
        std::size_t const B = 1 + rng.uniform_index(6);
        std::size_t const M = 1 + rng.uniform_index(3);
        std::size_t const n_out = 1 + rng.uniform_index(8);
        ModalBatch b = oracle::random_batch(B, M, 3, rng);
        auto cfg = oracle::config_from_bits(static_cast<unsigned>(trial % 16), n_out);
        std::uint64_t const s = 7000 + static_cast<std::uint64_t>(trial);

        RngStream r1(s);
        worst = std::max(worst, oracle::deviation(powmix(b, cfg, r1), oracle::powmix(b, cfg, RngStream(s))));
        RngStream r2(s);
        worst = std::max(worst, oracle::deviation(multimix(b, n_out, r2), oracle::multimix(b, n_out, RngStream(s))));
        cases += 2;
        if (B % 2 == 0) {
            RngStream r3(s);
            worst = std::max(worst, oracle::deviation(manifold_mixup(b, 1.0, r3), oracle::manifold(b, 1.0, RngStream(s))));
            ++cases;
        }
    }
    double const secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 10.0, fmt("%d seeded cases, max deviation %.2e, %.2fs", cases, worst, secs)};
}

auto criterion_degenerate() -> Outcome
{
    bool a_ok = true;
    RngStream data(104);
    for (int trial = 0; trial < 100; ++trial) {
        ModalBatch b = oracle::random_batch(1 + data.uniform_index(32), 1 + data.uniform_index(4), 4, data);
        MixConfig cfg;
        cfg.n_out = 1 + data.uniform_index(64);
        cfg.reweight = false;
        cfg.anisotropic = false;
        cfg.dynamic_mix = false;
        cfg.mask_share = trial % 2 == 0;
        RngStream r1(500 + static_cast<std::uint64_t>(trial));
        RngStream r2(500 + static_cast<std::uint64_t>(trial));
        auto p = powmix(b, cfg, r1);
        auto m = multimix(b, cfg.n_out, r2);
        a_ok = a_ok && p.labels == m.labels && p.hidden == m.hidden && p.mixing == m.mixing;
    }

    bool b_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        ModalBatch b = oracle::random_batch(1, 1 + data.uniform_index(4), 4, data);
        auto cfg = oracle::config_from_bits(static_cast<unsigned>(trial % 16), 1 + data.uniform_index(32));
        auto out = powmix(b, cfg, data);
        for (std::size_t m = 0; m < b.hidden.size(); ++m) {
            for (std::size_t i = 0; i < out.hidden[m].rows(); ++i) {
                for (std::size_t c = 0; c < out.hidden[m].cols(); ++c) {
                    b_ok = b_ok && out.hidden[m](i, c) == b.hidden[m](0, c);
                }
            }
        }
        for (double y : out.labels) {
            b_ok = b_ok && y == b.labels[0];
        }
    }

    DataGenConfig dc;
    dc.n_examples = 500;
    dc.seed = 104;
    Dataset ds = generate(dc);
    TrainConfig base;
    base.epochs = 5;
    base.patience = 100;
    TrainConfig zero = base;
    zero.algorithm = MixAlgorithm::powmix;
    zero.mix.p_mix = 0.0;
    RngStream ra(9);
    RngStream rb(9);
    auto ta = train(ds, init_for_seed(base.model, 9), base, ra);
    auto tb = train(ds, init_for_seed(base.model, 9), zero, rb);
    bool c_ok = ta.epochs.size() == tb.epochs.size() && ta.best_params == tb.best_params && tb.mixing_steps == 0;
    for (std::size_t e = 0; c_ok && e < ta.epochs.size(); ++e) {
        c_ok = ta.epochs[e].train_loss == tb.epochs[e].train_loss && ta.epochs[e].val.mae == tb.epochs[e].val.mae;
    }
    return {a_ok && b_ok && c_ok, fmt("(a) powmix==multimix bit-exact: %s, (b) B=1 collapse: %s, (c) p_mix=0 "
                                      "trajectory identical: %s",
                                      a_ok ? "yes" : "no", b_ok ? "yes" : "no", c_ok ? "yes" : "no")};
}

auto criterion_gradients() -> Outcome
{
    auto const t0 = Clock::now();
    double worst = 0.0;
    std::size_t max_params = 0;
    std::size_t checked = 0;
    for (auto mode : {FusionMode::late, FusionMode::early}) {
        RngStream rng(1);
        max_params = std::max(max_params, parameter_count(init_params(gradcheck::tiny_shape(mode), rng)));
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            auto r = gradcheck::powmix_training_check(mode, seed);
            worst = std::max(worst, r.max_rel_err);
            checked += r.checked;
        }
    }
    double const secs = seconds_since(t0);
    return {worst < 1e-4 && max_params <= 200 && secs < 60.0,
            fmt("%zu parameter checks, largest model %zu params, max rel err %.2e, %.2fs", checked, max_params, worst,
                secs)};
}

auto criterion_limited_data() -> Outcome
{
    auto const t0 = Clock::now();
    Dataset ds = subsample_train_count(generate(DataGenConfig{}), 200, 0);
    TrainConfig base;
    TrainConfig mixed = base;
    mixed.algorithm = MixAlgorithm::powmix;
    std::vector<std::uint64_t> const seeds{1, 2, 3, 4, 5};
    auto a = run_seeds(ds, base, seeds, 1);
    auto b = run_seeds(ds, mixed, seeds, 1);
    double gap = 0.0;
    bool paired = true;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        paired = paired && a.runs[i].init == b.runs[i].init;
        gap += a.runs[i].result.best_val_mae - b.runs[i].result.best_val_mae;
    }
    gap /= static_cast<double>(seeds.size());
    double const secs = seconds_since(t0);
    bool const ok = paired && b.best_val_mae.mean <= a.best_val_mae.mean && gap >= 0.0 && secs < 300.0;
    return {ok, fmt("val MAE baseline %.4f, powmix %.4f, paired gap (baseline - powmix) %+.4f, %.1fs",
                    a.best_val_mae.mean, b.best_val_mae.mean, gap, secs)};
}

auto criterion_ablation() -> Outcome
{
    auto const t0 = Clock::now();
    fs::path root = fs::temp_directory_path() / "mixlab_acceptance_ablate";
    fs::remove_all(root);
    ExperimentConfig cfg = parse_config_text("");
    cfg.output_dir = root.string();
    cfg.seeds = {1, 2, 3};
    cfg.jobs = 1;
    fs::path dir = cmd_ablate(cfg, false);

    std::istringstream csv(slurp(dir / "results.csv"));
    std::string line;
    std::getline(csv, line);
    bool ok = line.find("acc2_mean") != std::string::npos && line.find("acc5_mean") != std::string::npos &&
              line.find("mae_mean") != std::string::npos;
    std::vector<std::vector<std::string>> rows;
    while (std::getline(csv, line)) {
        std::vector<std::string> cells;
        for (auto f : detail::split_fields(line, ',')) {
            cells.emplace_back(f);
        }
        rows.push_back(cells);
    }
    ok = ok && rows.size() == 5;
    if (ok) {
        auto const& full = rows[0];
        ok = full[0] == "full" && full.size() == 13;
        for (std::size_t c = 7; ok && c < full.size(); ++c) {
            ok = std::isfinite(std::stod(full[c]));
        }
        for (std::size_t r = 1; ok && r < rows.size(); ++r) {
            ok = rows[r][6] != full[6];
        }
    }
    double const secs = seconds_since(t0);
    fs::remove_all(root);
    return {ok && secs < 600.0, fmt("%zu variant rows, full-row hash distinct and metrics finite: %s, %.1fs",
                                    rows.size(), ok ? "yes" : "no", secs)};
}

auto criterion_metrics() -> Outcome
{
    RngStream rng(108);
    double worst = 0.0;
    bool counts = true;
    int vectors = 0;
    while (vectors < 1000) {
        std::size_t const n = 2 + rng.uniform_index(80);
        Vector p(n);
        Vector t(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = std::round((6.0 * rng.uniform01() - 3.0) * 3.0) / 3.0;
            p[i] = t[i] + 1.5 * rng.normal();
        }
        if (std::all_of(t.begin(), t.end(), [](double v) { return v == 0.0; })) {
            continue;
        }
        ++vectors;
        auto got = compute_metrics(p, t);
        auto want = oracle::naive_metrics(p, t);
        for (auto d : {got.mae - want.mae, got.acc2 - want.acc2, got.f1 - want.f1, got.acc5 - want.acc5,
                       got.acc7 - want.acc7, got.corr ? *got.corr - want.corr : 0.0}) {
            worst = std::max(worst, std::abs(d));
        }
        auto const nonzero = static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](double v) { return v != 0.0; }));
        counts = counts && got.binary_count == nonzero && want.binary_count == nonzero;
    }
    return {worst <= 1e-12 && counts,
            fmt("%d vectors, max deviation %.2e, inclusion counts exact: %s", vectors, worst, counts ? "yes" : "no")};
}

auto criterion_robustness() -> Outcome
{
    Dataset ds = generate(DataGenConfig{});
    TrainConfig base;
    TrainConfig mixed = base;
    mixed.algorithm = MixAlgorithm::powmix;
    Vector grid{0.0};
    for (double p : default_noise_grid()) {
        grid.push_back(p);
    }
    std::vector<NoiseKind> const kinds{NoiseKind::feature_drop_aligned, NoiseKind::feature_drop_independent};
    bool ok = true;
    std::string detail;
    for (auto const* cfg : {&base, &mixed}) {
        auto run = run_one_seed(ds, *cfg, 1);
        auto rows = robustness_curve(run.result.best_params, ds, kinds, grid, 15, 11);
        auto clean = evaluate(run.result.best_params, split_view(ds, Split::test));
        bool const exact = rows[0].metrics.mae == clean.mae && rows[0].metrics.f1 == clean.f1 &&
                           rows[0].metrics.acc2 == clean.acc2 && rows[0].metrics.acc7 == clean.acc7 &&
                           rows[0].metrics.corr == clean.corr;
        Vector ps;
        Vector f1s;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            ps.push_back(rows[i].p);
            f1s.push_back(rows[i].metrics.f1);
        }
        auto rho = spearman_correlation(ps, f1s);
        ok = ok && exact && rho && *rho < 0.0;
        detail += fmt("%s: p=0 exact %s, spearman(p,F1) %+.3f; ", std::string(to_string(cfg->algorithm)).c_str(),
                      exact ? "yes" : "no", rho ? *rho : 0.0);
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

auto criterion_determinism() -> Outcome
{
    fs::path root = fs::temp_directory_path() / "mixlab_acceptance_determinism";
    fs::remove_all(root);
    std::string out[2];
    bool ran = true;
    for (int i = 0; i < 2; ++i) {
        fs::path dir = root / std::to_string(i);
        std::string const cmd = "MIXLAB_DETERMINISTIC=1 " + std::string(MIXLAB_CLI_PATH) +
                                " train --algorithm powmix --seeds 1 2 --jobs 4 --out " + dir.string() + " > " +
                                (root.string() + "_log" + std::to_string(i)) + " 2>&1";
        ran = ran && std::system(cmd.c_str()) == 0;
        for (auto const& e : fs::recursive_directory_iterator(dir)) {
            if (e.path().filename() == "results.csv") {
                out[i] = slurp(e.path());
            }
        }
    }
    fs::remove_all(root);
    bool const same = ran && !out[0].empty() && out[0] == out[1];
    return {same, fmt("two CLI train runs, results.csv byte-identical: %s (%zu bytes)", same ? "yes" : "no",
                      out[0].size())};
}

} // namespace

int main()
{
    std::vector<std::pair<char const*, std::function<Outcome()>>> const criteria{
        {"mixing-matrix invariants", criterion_invariants},
        {"sparsity statistic", criterion_sparsity},
        {"oracle equivalence", criterion_oracles},
        {"degenerate reductions", criterion_degenerate},
        {"gradient correctness", criterion_gradients},
        {"limited-data regularization", criterion_limited_data},
        {"ablation grid", criterion_ablation},
        {"metric suite", criterion_metrics},
        {"robustness harness", criterion_robustness},
        {"determinism", criterion_determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (std::exception const& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
